//! A deliberately naive reference implementation used to cross-check the
//! engine: instead of propagating belief updates eagerly into per-person
//! tables, it records every perceivable event in a flat log of sightings and
//! answers belief queries by scanning that log backwards. The two
//! implementations share no code and no data layout, so agreement on every
//! queryable fact is strong evidence both are right.
#![allow(dead_code)]

use std::collections::BTreeSet;

use mindforge_core::{
    ActionBody, ActionInstance, CommFact, FactKey, Modifier, StoryContext, StoryState, Value,
};

/// A queryable fact, in the reference implementation's own vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefFact {
    PersonAt(usize),
    ObjRoom,
    ObjContainer,
    VisState,
    InvisState,
    Topic(usize),
}

/// A fact value. `Absent` stands for "offstage", "not in any container", or
/// "no state phrase applied", depending on the fact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefValue {
    Room(usize),
    Container(usize),
    Phrase(usize),
    Flag(bool),
    Absent,
}

/// One entry in the log: `fact` was perceived to take `value`. `seen_by` is
/// everyone who actually perceived it; `seen_openly_by` is everyone the
/// perceivers would say perceived it.
#[derive(Debug, Clone)]
pub struct Sighting {
    pub fact: RefFact,
    pub value: RefValue,
    pub seen_by: BTreeSet<usize>,
    pub seen_openly_by: BTreeSet<usize>,
}

/// World state plus the full sighting log.
#[derive(Clone)]
pub struct LogWorld {
    pub people: usize,
    pub person_room: Vec<Option<usize>>,
    pub obj_room: usize,
    pub obj_container: Option<usize>,
    pub visible: Option<usize>,
    pub invisible: Option<usize>,
    pub topics: Vec<bool>,
    pub visible_phrases: usize,
    pub log: Vec<Sighting>,
}

impl LogWorld {
    pub fn new(ctx: &StoryContext) -> LogWorld {
        LogWorld {
            people: ctx.people.len(),
            person_room: vec![None; ctx.people.len()],
            obj_room: 0,
            obj_container: None,
            visible: None,
            invisible: None,
            topics: vec![false; ctx.topics.len()],
            visible_phrases: ctx.visible_updates.len(),
            log: Vec::new(),
        }
    }

    fn occupants(&self, room: usize) -> BTreeSet<usize> {
        (0..self.people)
            .filter(|&p| self.person_room[p] == Some(room))
            .collect()
    }

    fn sight(&mut self, fact: RefFact, value: RefValue, group: &BTreeSet<usize>) {
        self.log.push(Sighting {
            fact,
            value,
            seen_by: group.clone(),
            seen_openly_by: group.clone(),
        });
    }

    /// Replays one action, assuming the engine already accepted it as valid.
    pub fn replay(&mut self, action: ActionInstance) {
        let actor = action.actor.index();
        let log_start = self.log.len();
        // Sightings from this action that a secret onlooker would also catch
        // carry the action itself; incidental sightings (a newcomer looking
        // around a room) do not.
        let mut onlooker_catches: Vec<usize> = Vec::new();

        match action.body {
            ActionBody::Enter { room } => {
                let room = room.index();
                self.person_room[actor] = Some(room);
                let group = self.occupants(room);
                onlooker_catches.push(self.log.len());
                self.sight(RefFact::PersonAt(actor), RefValue::Room(room), &group);
                for other in group.iter().copied().filter(|&p| p != actor) {
                    self.sight(RefFact::PersonAt(other), RefValue::Room(room), &group);
                }
                if self.obj_room == room && self.obj_container.is_none() {
                    let alone: BTreeSet<usize> = [actor].into();
                    self.sight(RefFact::ObjRoom, RefValue::Room(room), &alone);
                    self.sight(RefFact::ObjContainer, RefValue::Absent, &alone);
                    self.sight(
                        RefFact::VisState,
                        self.visible.map_or(RefValue::Absent, RefValue::Phrase),
                        &alone,
                    );
                }
            }
            ActionBody::Leave { room } => {
                let room = room.index();
                let group = self.occupants(room);
                self.person_room[actor] = None;
                onlooker_catches.push(self.log.len());
                self.sight(RefFact::PersonAt(actor), RefValue::Absent, &group);
            }
            ActionBody::MoveObjContainer { container } => {
                let room = self.person_room[actor].unwrap();
                self.obj_container = Some(container.index());
                let group = self.occupants(room);
                onlooker_catches.push(self.log.len());
                self.sight(
                    RefFact::ObjContainer,
                    RefValue::Container(container.index()),
                    &group,
                );
            }
            ActionBody::MoveObjRoom { room: dest } => {
                let origin = self.person_room[actor].unwrap();
                let dest = dest.index();
                let origin_group = self.occupants(origin);
                self.person_room[actor] = Some(dest);
                self.obj_room = dest;
                self.obj_container = None;
                let dest_group = self.occupants(dest);
                for group in [&origin_group, &dest_group] {
                    onlooker_catches.push(self.log.len());
                    self.sight(RefFact::ObjRoom, RefValue::Room(dest), group);
                    self.sight(RefFact::ObjContainer, RefValue::Absent, group);
                    self.sight(RefFact::PersonAt(actor), RefValue::Room(dest), group);
                }
            }
            ActionBody::UpdateObjState { phrase } => {
                let room = self.person_room[actor].unwrap();
                let phrase = phrase.index();
                let fact = if phrase < self.visible_phrases {
                    self.visible = Some(phrase);
                    RefFact::VisState
                } else {
                    self.invisible = Some(phrase);
                    RefFact::InvisState
                };
                let group = self.occupants(room);
                onlooker_catches.push(self.log.len());
                self.sight(fact, RefValue::Phrase(phrase), &group);
            }
            ActionBody::InfoPrivate { addressee, fact } => {
                let pair: BTreeSet<usize> = [actor, addressee.index()].into();
                let (rf, value) = self.told_fact(actor, fact);
                onlooker_catches.push(self.log.len());
                self.sight(rf, value, &pair);
            }
            ActionBody::InfoPublic { room, fact } => {
                let group = self.occupants(room.index());
                let (rf, value) = self.told_fact(actor, fact);
                onlooker_catches.push(self.log.len());
                self.sight(rf, value, &group);
            }
            ActionBody::ChitChatPrivate { addressee, topic } => {
                let pair: BTreeSet<usize> = [actor, addressee.index()].into();
                self.topics[topic.index()] = true;
                onlooker_catches.push(self.log.len());
                self.sight(RefFact::Topic(topic.index()), RefValue::Flag(true), &pair);
            }
            ActionBody::ChitChatPublic { room, topic } => {
                let group = self.occupants(room.index());
                self.topics[topic.index()] = true;
                onlooker_catches.push(self.log.len());
                self.sight(RefFact::Topic(topic.index()), RefValue::Flag(true), &group);
            }
        }

        match action.modifier {
            Some(Modifier::Peek(w)) => {
                // The onlooker catches the action-carrying sightings, and
                // where one action produces several (a cross-room move), all
                // of them. Nobody notices the onlooker.
                let span = match action.body {
                    ActionBody::MoveObjRoom { .. } => 3,
                    _ => 1,
                };
                for &start in &onlooker_catches {
                    for i in start..(start + span).min(self.log.len()) {
                        self.log[i].seen_by.insert(w.index());
                    }
                }
            }
            Some(Modifier::Distracted(d)) => {
                // The distracted person misses everything the action made
                // perceivable, while everyone else still pictures them as
                // having seen it.
                for s in &mut self.log[log_start..] {
                    s.seen_by.remove(&d.index());
                }
            }
            None => {}
        }
    }

    /// What the speaker would say the fact is: their own latest sighting of
    /// it, or the story-opening common knowledge.
    fn told_fact(&self, speaker: usize, fact: CommFact) -> (RefFact, RefValue) {
        let rf = match fact {
            CommFact::ObjectRoom => RefFact::ObjRoom,
            CommFact::ObjectContainer => RefFact::ObjContainer,
            CommFact::VisibleState => RefFact::VisState,
            CommFact::InvisibleState => RefFact::InvisState,
        };
        (rf, self.first_order(speaker, rf))
    }

    fn initial(&self, fact: RefFact) -> RefValue {
        match fact {
            RefFact::PersonAt(_) => RefValue::Absent,
            RefFact::ObjRoom => RefValue::Room(0),
            RefFact::ObjContainer | RefFact::VisState | RefFact::InvisState => RefValue::Absent,
            RefFact::Topic(_) => RefValue::Flag(false),
        }
    }

    /// The true current value.
    pub fn world(&self, fact: RefFact) -> RefValue {
        match fact {
            RefFact::PersonAt(p) => self.person_room[p].map_or(RefValue::Absent, RefValue::Room),
            RefFact::ObjRoom => RefValue::Room(self.obj_room),
            RefFact::ObjContainer => self.obj_container.map_or(RefValue::Absent, RefValue::Container),
            RefFact::VisState => self.visible.map_or(RefValue::Absent, RefValue::Phrase),
            RefFact::InvisState => self.invisible.map_or(RefValue::Absent, RefValue::Phrase),
            RefFact::Topic(t) => RefValue::Flag(self.topics[t]),
        }
    }

    /// What `p` believes: the last sighting of the fact that `p` caught.
    pub fn first_order(&self, p: usize, fact: RefFact) -> RefValue {
        self.log
            .iter()
            .rev()
            .find(|s| s.fact == fact && s.seen_by.contains(&p))
            .map(|s| s.value)
            .unwrap_or_else(|| self.initial(fact))
    }

    /// What `p` believes `q` believes: the last sighting of the fact that
    /// `p` caught and either `q` openly caught too or `q` is `p`.
    pub fn second_order(&self, p: usize, q: usize, fact: RefFact) -> RefValue {
        self.log
            .iter()
            .rev()
            .find(|s| {
                s.fact == fact
                    && s.seen_by.contains(&p)
                    && (q == p || s.seen_openly_by.contains(&q))
            })
            .map(|s| s.value)
            .unwrap_or_else(|| self.initial(fact))
    }
}

// ---------------------------------------------------------------------------
// Bridging to the engine's vocabulary
// ---------------------------------------------------------------------------

pub fn ref_fact(key: FactKey) -> RefFact {
    match key {
        FactKey::PersonRoom(p) => RefFact::PersonAt(p.index()),
        FactKey::ObjectRoom => RefFact::ObjRoom,
        FactKey::ObjectContainer => RefFact::ObjContainer,
        FactKey::VisibleState => RefFact::VisState,
        FactKey::InvisibleState => RefFact::InvisState,
        FactKey::TopicKnown(t) => RefFact::Topic(t.index()),
    }
}

pub fn ref_value(value: Value) -> RefValue {
    match value {
        Value::Room(r) => RefValue::Room(r.index()),
        Value::Container(c) => RefValue::Container(c.index()),
        Value::Phrase(p) => RefValue::Phrase(p.index()),
        Value::Bool(b) => RefValue::Flag(b),
        Value::Nowhere => RefValue::Absent,
        Value::Unknown => panic!("engine produced an Unknown value"),
    }
}

/// Asserts that the engine state and the reference agree on the world, every
/// first-order belief, and every second-order belief, for every fact.
pub fn assert_agreement(state: &StoryState, reference: &LogWorld, label: &str) {
    let ctx = state.context();
    for key in mindforge_core::state::fact_keys(ctx) {
        let rf = ref_fact(key);
        assert_eq!(
            ref_value(state.world(key)),
            reference.world(rf),
            "{label}: world disagrees on {key:?}"
        );
        for p in ctx.person_ids() {
            assert_eq!(
                ref_value(state.belief(p, key)),
                reference.first_order(p.index(), rf),
                "{label}: belief of {} disagrees on {key:?}",
                ctx.person_name(p)
            );
            for q in ctx.person_ids() {
                assert_eq!(
                    ref_value(state.nested_belief(p, q, key)),
                    reference.second_order(p.index(), q.index(), rf),
                    "{label}: {}'s model of {} disagrees on {key:?}",
                    ctx.person_name(p),
                    ctx.person_name(q)
                );
            }
        }
    }
}

/// Renders an action sequence compactly for failure messages.
pub fn describe(actions: &[ActionInstance]) -> String {
    actions
        .iter()
        .map(|a| format!("{a:?}"))
        .collect::<Vec<_>>()
        .join(" ; ")
}
