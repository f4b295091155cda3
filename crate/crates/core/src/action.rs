//! The action DSL: nine story operations with exact belief-update semantics.
//!
//! Every operation is defined by three things:
//!
//! 1. **Preconditions** — checked against the true world state, never
//!    against beliefs (except the tell operations, which require the speaker
//!    to believe *something* tellable).
//! 2. **World changes** — the facts the action rewrites.
//! 3. **Observation events** — who perceives which fact taking which value,
//!    and who they *think* perceived it alongside them.
//!
//! An observation event carries a set of facts, an `actual` set (the people
//! whose first-order beliefs update) and an `overt` set (the people whom
//! every actual observer pictures as co-observers, driving second-order
//! updates). For an unmodified action the two sets are equal, which yields
//! mutual knowledge among witnesses; the two asymmetry modifiers pull them
//! apart:
//!
//! * `peek(w)` adds `w` to `actual` without touching `overt`: `w` learns the
//!   change (and knows the overt witnesses saw it), while nobody updates
//!   their picture of `w`.
//! * `distracted(d)` removes `d` from `actual` while leaving it in `overt`:
//!   `d` learns nothing, while everyone present wrongly updates their picture
//!   of `d`.
//!
//! Non-witnesses keep whatever they believed before — beliefs go stale, they
//! are never invalidated.
//!
//! The full transition table (who witnesses what, per operation) is spelled
//! out on [`apply`].

use crate::context::{ContainerId, PersonId, PhraseId, RoomId, StoryContext, TopicId};
use crate::state::{FactKey, StoryState, Value};
use serde::Serialize;
use thiserror::Error;

/// The nine operation kinds, with stable integer ids used by exports.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, serde::Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Enter = 0,
    Leave = 1,
    MoveObjContainer = 2,
    MoveObjRoom = 3,
    UpdateObjState = 4,
    InfoPrivate = 5,
    InfoPublic = 6,
    ChitChatPrivate = 7,
    ChitChatPublic = 8,
}

impl ActionKind {
    pub const ALL: [ActionKind; 9] = [
        ActionKind::Enter,
        ActionKind::Leave,
        ActionKind::MoveObjContainer,
        ActionKind::MoveObjRoom,
        ActionKind::UpdateObjState,
        ActionKind::InfoPrivate,
        ActionKind::InfoPublic,
        ActionKind::ChitChatPrivate,
        ActionKind::ChitChatPublic,
    ];

    /// The movement/communication primitives of classic belief-task stories:
    /// enter, leave, and container moves.
    pub const MOVEMENT_PRIMITIVES: [ActionKind; 3] = [
        ActionKind::Enter,
        ActionKind::Leave,
        ActionKind::MoveObjContainer,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            ActionKind::Enter => "enter",
            ActionKind::Leave => "leave",
            ActionKind::MoveObjContainer => "move_obj_container",
            ActionKind::MoveObjRoom => "move_obj_room",
            ActionKind::UpdateObjState => "update_obj_state",
            ActionKind::InfoPrivate => "info_private",
            ActionKind::InfoPublic => "info_public",
            ActionKind::ChitChatPrivate => "chit_chat_private",
            ActionKind::ChitChatPublic => "chit_chat_public",
        }
    }

    pub fn from_name(name: &str) -> Option<ActionKind> {
        ActionKind::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// Which fact a tell operation communicates. The value sent is always the
/// speaker's current belief about that fact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CommFact {
    ObjectRoom,
    ObjectContainer,
    VisibleState,
    InvisibleState,
}

impl CommFact {
    pub const ALL: [CommFact; 4] = [
        CommFact::ObjectRoom,
        CommFact::ObjectContainer,
        CommFact::VisibleState,
        CommFact::InvisibleState,
    ];

    pub fn key(self) -> FactKey {
        match self {
            CommFact::ObjectRoom => FactKey::ObjectRoom,
            CommFact::ObjectContainer => FactKey::ObjectContainer,
            CommFact::VisibleState => FactKey::VisibleState,
            CommFact::InvisibleState => FactKey::InvisibleState,
        }
    }
}

/// Operation-specific parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ActionBody {
    Enter { room: RoomId },
    Leave { room: RoomId },
    MoveObjContainer { container: ContainerId },
    MoveObjRoom { room: RoomId },
    UpdateObjState { phrase: PhraseId },
    InfoPrivate { addressee: PersonId, fact: CommFact },
    InfoPublic { room: RoomId, fact: CommFact },
    ChitChatPrivate { addressee: PersonId, topic: TopicId },
    ChitChatPublic { room: RoomId, topic: TopicId },
}

impl ActionBody {
    pub fn kind(self) -> ActionKind {
        match self {
            ActionBody::Enter { .. } => ActionKind::Enter,
            ActionBody::Leave { .. } => ActionKind::Leave,
            ActionBody::MoveObjContainer { .. } => ActionKind::MoveObjContainer,
            ActionBody::MoveObjRoom { .. } => ActionKind::MoveObjRoom,
            ActionBody::UpdateObjState { .. } => ActionKind::UpdateObjState,
            ActionBody::InfoPrivate { .. } => ActionKind::InfoPrivate,
            ActionBody::InfoPublic { .. } => ActionKind::InfoPublic,
            ActionBody::ChitChatPrivate { .. } => ActionKind::ChitChatPrivate,
            ActionBody::ChitChatPublic { .. } => ActionKind::ChitChatPublic,
        }
    }
}

/// Perception asymmetry attached to an action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Modifier {
    /// Someone who would not witness the action observes it in secret.
    Peek(PersonId),
    /// Someone who would witness the action misses it, unnoticed by the rest.
    Distracted(PersonId),
}

/// One concrete story step: actor, operation, optional asymmetry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ActionInstance {
    pub actor: PersonId,
    pub body: ActionBody,
    pub modifier: Option<Modifier>,
}

impl ActionInstance {
    pub fn new(actor: PersonId, body: ActionBody) -> Self {
        ActionInstance {
            actor,
            body,
            modifier: None,
        }
    }

    pub fn with_modifier(actor: PersonId, body: ActionBody, modifier: Modifier) -> Self {
        ActionInstance {
            actor,
            body,
            modifier: Some(modifier),
        }
    }

    pub fn kind(self) -> ActionKind {
        self.body.kind()
    }

    fn sort_key(self) -> (u8, u8, ActionBody, u8, u8) {
        let (mrank, mperson) = match self.modifier {
            None => (0, 0),
            Some(Modifier::Peek(w)) => (1, w.0),
            Some(Modifier::Distracted(d)) => (2, d.0),
        };
        (self.kind().id(), self.actor.0, self.body, mrank, mperson)
    }
}

impl PartialOrd for ActionInstance {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ActionInstance {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

/// Why an action was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum PreconditionFailure {
    #[error("the actor is already in that room")]
    AlreadyInRoom,
    #[error("the actor is not in that room")]
    NotInRoom,
    #[error("the actor is not in any room")]
    ActorOffstage,
    #[error("the object is not in the actor's room")]
    ObjectNotPresent,
    #[error("the object is already in that container")]
    AlreadyInContainer,
    #[error("the object is already in that room")]
    ObjectAlreadyInRoom,
    #[error("that update is already applied to the object")]
    StateAlreadyApplied,
    #[error("the addressee is the speaker")]
    SelfAddressee,
    #[error("the speaker has no tellable belief about that fact")]
    NothingToTell,
    #[error("there is no audience in the room")]
    NoAudience,
    #[error("the secret witness already witnesses the action")]
    SecretWitnessAlreadyPresent,
    #[error("the distracted person would not witness the action anyway")]
    DistractedNotWitness,
    #[error("the actor cannot be the distracted person")]
    DistractedIsActor,
}

/// Errors from applying an action.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ActionError {
    #[error("action references an undeclared {category} (index {index})")]
    InvalidReference { category: &'static str, index: u8 },
    #[error("precondition failed: {failure}")]
    Rejected { failure: PreconditionFailure },
}

// ----------------------------------------------------------------------
// Occupancy masks
// ----------------------------------------------------------------------

fn bit(p: PersonId) -> u32 {
    1u32 << p.0
}

fn occupants_mask(state: &StoryState, room: RoomId) -> u32 {
    let mut mask = 0;
    for p in state.context().person_ids() {
        if state.world(FactKey::PersonRoom(p)) == Value::Room(room) {
            mask |= bit(p);
        }
    }
    mask
}

fn iter_bits(mask: u32) -> impl Iterator<Item = PersonId> {
    (0..32u8).filter(move |i| mask & (1 << i) != 0).map(PersonId)
}

// ----------------------------------------------------------------------
// Transition table
// ----------------------------------------------------------------------

/// One observation event: `facts` took these values, everyone in `actual`
/// perceived that, and each perceiver pictures everyone in `overt` (plus
/// themselves) as having perceived it too.
struct Event {
    facts: Vec<(FactKey, Value)>,
    actual: u32,
    overt: u32,
    /// Whether a secret witness added by `peek` perceives this event. True
    /// for the event that carries the action's observable change (or the
    /// message content for communications); false for incidental perception
    /// such as a newcomer taking in a room.
    spectacle: bool,
}

struct Transition {
    world_changes: Vec<(FactKey, Value)>,
    events: Vec<Event>,
    /// Everyone who would witness the unmodified action; used to validate
    /// and enumerate modifiers.
    witnesses: u32,
}

/// The speaker's belief for a communicated fact, if it is concrete enough to
/// put into words. Rooms are always tellable (the belief is always a real
/// room); containers and states are tellable only when the speaker believes
/// a specific container/phrase, not the "none" placeholder.
fn tellable_value(state: &StoryState, speaker: PersonId, fact: CommFact) -> Option<Value> {
    let v = state.belief(speaker, fact.key());
    match (fact, v) {
        (CommFact::ObjectRoom, Value::Room(_)) => Some(v),
        (CommFact::ObjectContainer, Value::Container(_)) => Some(v),
        (CommFact::VisibleState, Value::Phrase(_)) => Some(v),
        (CommFact::InvisibleState, Value::Phrase(_)) => Some(v),
        _ => None,
    }
}

fn room_of(state: &StoryState, p: PersonId) -> Option<RoomId> {
    match state.world(FactKey::PersonRoom(p)) {
        Value::Room(r) => Some(r),
        _ => None,
    }
}

fn check_reference(ctx: &StoryContext, action: ActionInstance) -> Result<(), ActionError> {
    let person = |id: PersonId| -> Result<(), ActionError> {
        if id.index() < ctx.person_count() {
            Ok(())
        } else {
            Err(ActionError::InvalidReference {
                category: "person",
                index: id.0,
            })
        }
    };
    let room = |id: RoomId| -> Result<(), ActionError> {
        if id.index() < ctx.rooms.len() {
            Ok(())
        } else {
            Err(ActionError::InvalidReference {
                category: "room",
                index: id.0,
            })
        }
    };
    person(action.actor)?;
    match action.body {
        ActionBody::Enter { room: r } | ActionBody::Leave { room: r } | ActionBody::MoveObjRoom { room: r } => {
            room(r)?
        }
        ActionBody::MoveObjContainer { container } => {
            if container.index() >= ctx.containers.len() {
                return Err(ActionError::InvalidReference {
                    category: "container",
                    index: container.0,
                });
            }
        }
        ActionBody::UpdateObjState { phrase } => {
            if phrase.index() >= ctx.phrase_count() {
                return Err(ActionError::InvalidReference {
                    category: "update phrase",
                    index: phrase.0,
                });
            }
        }
        ActionBody::InfoPrivate { addressee, .. } => person(addressee)?,
        ActionBody::InfoPublic { room: r, .. } => room(r)?,
        ActionBody::ChitChatPrivate { addressee, topic } => {
            person(addressee)?;
            if topic.index() >= ctx.topic_count() {
                return Err(ActionError::InvalidReference {
                    category: "topic",
                    index: topic.0,
                });
            }
        }
        ActionBody::ChitChatPublic { room: r, topic } => {
            room(r)?;
            if topic.index() >= ctx.topic_count() {
                return Err(ActionError::InvalidReference {
                    category: "topic",
                    index: topic.0,
                });
            }
        }
    }
    match action.modifier {
        Some(Modifier::Peek(w)) => person(w)?,
        Some(Modifier::Distracted(d)) => person(d)?,
        None => {}
    }
    Ok(())
}

/// Builds the transition (world changes + observation events) for a valid
/// base action, or reports which precondition fails. Modifiers are handled
/// by the caller.
fn transition(state: &StoryState, action: ActionInstance) -> Result<Transition, PreconditionFailure> {
    let ctx = state.context();
    let actor = action.actor;
    let obj_room = state.world(FactKey::ObjectRoom);

    match action.body {
        ActionBody::Enter { room } => {
            if state.world(FactKey::PersonRoom(actor)) == Value::Room(room) {
                return Err(PreconditionFailure::AlreadyInRoom);
            }
            let group = occupants_mask(state, room) | bit(actor);
            let mut events = vec![Event {
                facts: vec![(FactKey::PersonRoom(actor), Value::Room(room))],
                actual: group,
                overt: group,
                spectacle: true,
            }];
            // Presence of everyone already in the room becomes mutual
            // knowledge of the whole (new) group.
            let roster: Vec<(FactKey, Value)> = iter_bits(group)
                .filter(|x| *x != actor)
                .map(|x| (FactKey::PersonRoom(x), Value::Room(room)))
                .collect();
            if !roster.is_empty() {
                events.push(Event {
                    facts: roster,
                    actual: group,
                    overt: group,
                    spectacle: false,
                });
            }
            // The newcomer sees the object if it sits in the open: its room,
            // that it is unenclosed, and its visible state. Container
            // contents stay hidden, and the invisible state cannot be seen.
            if obj_room == Value::Room(room)
                && state.world(FactKey::ObjectContainer) == Value::Nowhere
            {
                events.push(Event {
                    facts: vec![
                        (FactKey::ObjectRoom, Value::Room(room)),
                        (FactKey::ObjectContainer, Value::Nowhere),
                        (FactKey::VisibleState, state.world(FactKey::VisibleState)),
                    ],
                    actual: bit(actor),
                    overt: bit(actor),
                    spectacle: false,
                });
            }
            Ok(Transition {
                world_changes: vec![(FactKey::PersonRoom(actor), Value::Room(room))],
                events,
                witnesses: group,
            })
        }
        ActionBody::Leave { room } => {
            if state.world(FactKey::PersonRoom(actor)) != Value::Room(room) {
                return Err(PreconditionFailure::NotInRoom);
            }
            let group = occupants_mask(state, room);
            Ok(Transition {
                world_changes: vec![(FactKey::PersonRoom(actor), Value::Nowhere)],
                events: vec![Event {
                    facts: vec![(FactKey::PersonRoom(actor), Value::Nowhere)],
                    actual: group,
                    overt: group,
                    spectacle: true,
                }],
                witnesses: group,
            })
        }
        ActionBody::MoveObjContainer { container } => {
            let room = room_of(state, actor).ok_or(PreconditionFailure::ActorOffstage)?;
            if obj_room != Value::Room(room) {
                return Err(PreconditionFailure::ObjectNotPresent);
            }
            if state.world(FactKey::ObjectContainer) == Value::Container(container) {
                return Err(PreconditionFailure::AlreadyInContainer);
            }
            let group = occupants_mask(state, room);
            Ok(Transition {
                world_changes: vec![(FactKey::ObjectContainer, Value::Container(container))],
                events: vec![Event {
                    facts: vec![(FactKey::ObjectContainer, Value::Container(container))],
                    actual: group,
                    overt: group,
                    spectacle: true,
                }],
                witnesses: group,
            })
        }
        ActionBody::MoveObjRoom { room: dest } => {
            let origin = room_of(state, actor).ok_or(PreconditionFailure::ActorOffstage)?;
            if obj_room != Value::Room(origin) {
                return Err(PreconditionFailure::ObjectNotPresent);
            }
            if dest == origin {
                return Err(PreconditionFailure::ObjectAlreadyInRoom);
            }
            let facts = vec![
                (FactKey::ObjectRoom, Value::Room(dest)),
                (FactKey::ObjectContainer, Value::Nowhere),
                (FactKey::PersonRoom(actor), Value::Room(dest)),
            ];
            let origin_group = occupants_mask(state, origin);
            let dest_group = occupants_mask(state, dest) | bit(actor);
            Ok(Transition {
                world_changes: facts.clone(),
                events: vec![
                    // Departure and arrival are witnessed by two separate
                    // groups; knowledge is mutual within each group only.
                    Event {
                        facts: facts.clone(),
                        actual: origin_group,
                        overt: origin_group,
                        spectacle: true,
                    },
                    Event {
                        facts,
                        actual: dest_group,
                        overt: dest_group,
                        spectacle: true,
                    },
                ],
                witnesses: origin_group | dest_group,
            })
        }
        ActionBody::UpdateObjState { phrase } => {
            let room = room_of(state, actor).ok_or(PreconditionFailure::ActorOffstage)?;
            if obj_room != Value::Room(room) {
                return Err(PreconditionFailure::ObjectNotPresent);
            }
            let slot = if ctx.phrase_is_visible(phrase) {
                FactKey::VisibleState
            } else {
                FactKey::InvisibleState
            };
            if state.world(slot) == Value::Phrase(phrase) {
                return Err(PreconditionFailure::StateAlreadyApplied);
            }
            let group = occupants_mask(state, room);
            Ok(Transition {
                world_changes: vec![(slot, Value::Phrase(phrase))],
                events: vec![Event {
                    facts: vec![(slot, Value::Phrase(phrase))],
                    actual: group,
                    overt: group,
                    spectacle: true,
                }],
                witnesses: group,
            })
        }
        ActionBody::InfoPrivate { addressee, fact } => {
            if addressee == actor {
                return Err(PreconditionFailure::SelfAddressee);
            }
            let value = tellable_value(state, actor, fact).ok_or(PreconditionFailure::NothingToTell)?;
            let pair = bit(actor) | bit(addressee);
            Ok(Transition {
                world_changes: Vec::new(),
                events: vec![Event {
                    facts: vec![(fact.key(), value)],
                    actual: pair,
                    overt: pair,
                    spectacle: true,
                }],
                witnesses: pair,
            })
        }
        ActionBody::InfoPublic { room, fact } => {
            if state.world(FactKey::PersonRoom(actor)) != Value::Room(room) {
                return Err(PreconditionFailure::NotInRoom);
            }
            let group = occupants_mask(state, room);
            if group == bit(actor) {
                return Err(PreconditionFailure::NoAudience);
            }
            let value = tellable_value(state, actor, fact).ok_or(PreconditionFailure::NothingToTell)?;
            Ok(Transition {
                world_changes: Vec::new(),
                events: vec![Event {
                    facts: vec![(fact.key(), value)],
                    actual: group,
                    overt: group,
                    spectacle: true,
                }],
                witnesses: group,
            })
        }
        ActionBody::ChitChatPrivate { addressee, topic } => {
            if addressee == actor {
                return Err(PreconditionFailure::SelfAddressee);
            }
            let pair = bit(actor) | bit(addressee);
            Ok(Transition {
                world_changes: vec![(FactKey::TopicKnown(topic), Value::Bool(true))],
                events: vec![Event {
                    facts: vec![(FactKey::TopicKnown(topic), Value::Bool(true))],
                    actual: pair,
                    overt: pair,
                    spectacle: true,
                }],
                witnesses: pair,
            })
        }
        ActionBody::ChitChatPublic { room, topic } => {
            if state.world(FactKey::PersonRoom(actor)) != Value::Room(room) {
                return Err(PreconditionFailure::NotInRoom);
            }
            let group = occupants_mask(state, room);
            if group == bit(actor) {
                return Err(PreconditionFailure::NoAudience);
            }
            Ok(Transition {
                world_changes: vec![(FactKey::TopicKnown(topic), Value::Bool(true))],
                events: vec![Event {
                    facts: vec![(FactKey::TopicKnown(topic), Value::Bool(true))],
                    actual: group,
                    overt: group,
                    spectacle: true,
                }],
                witnesses: group,
            })
        }
    }
}

fn check_modifier(action: ActionInstance, witnesses: u32) -> Result<(), PreconditionFailure> {
    match action.modifier {
        None => Ok(()),
        Some(Modifier::Peek(w)) => {
            if witnesses & bit(w) != 0 {
                Err(PreconditionFailure::SecretWitnessAlreadyPresent)
            } else {
                Ok(())
            }
        }
        Some(Modifier::Distracted(d)) => {
            if d == action.actor {
                Err(PreconditionFailure::DistractedIsActor)
            } else if witnesses & bit(d) == 0 {
                Err(PreconditionFailure::DistractedNotWitness)
            } else {
                Ok(())
            }
        }
    }
}

/// Applies one action to a state, returning the successor state.
///
/// The operation semantics, in terms of witnesses (whose beliefs update,
/// mutually, unless a modifier interferes):
///
/// * `enter(p, R)` — pre: `p` not already in `R`. `p` relocates to `R`. The
///   arrival is witnessed by everyone then in `R` (including `p`), presence
///   of all occupants becomes mutual knowledge of the group, and `p` alone
///   takes in the object if it sits unenclosed in `R` (room, unenclosed,
///   visible state — never container contents, never the invisible state).
/// * `leave(p, R)` — pre: `p` in `R`. `p` relocates offstage (`Nowhere`);
///   witnessed by everyone in `R` including `p`. Others keep believing `p`
///   is in `R`.
/// * `moveObjContainer(p, c)` — pre: `p` and the object share a room, and
///   the object is not already in `c`. Witnessed by the room's occupants.
/// * `moveObjRoom(p, R2)` — pre: `p` and the object share a room, `R2`
///   differs. The object moves to `R2` and out of any container, and `p`
///   moves with it. Origin occupants witness the departure, `R2` occupants
///   the arrival; knowledge is mutual within each group only.
/// * `updateObjState(p, f)` — pre: co-located, `f` not already in force.
///   Sets the visible or invisible state slot per `f`'s classification;
///   witnessed by the room's occupants.
/// * `infoPrivate(p, q, fact)` — pre: `q ≠ p` and `p` believes something
///   tellable. Sends `p`'s believed value (true or not) to `q`; only the two
///   participants update, mutually. Works across rooms and offstage.
/// * `infoPublic(p, R, fact)` — pre: `p` in `R` with at least one other
///   occupant. Same as above for every occupant, mutually.
/// * `chitChatPrivate(p, q, t)` / `chitChatPublic(p, R, t)` — same audience
///   rules; the topic `t` becomes discussed (world state) and every hearer
///   now knows about it, mutually among the audience.
///
/// Modifier preconditions: `peek(w)` requires `w` not already a witness;
/// `distracted(d)` requires that `d` would witness the action and is not the
/// actor.
///
/// The function is pure: the input state is never touched, identical inputs
/// produce identical outputs, and on error nothing is produced at all.
///
/// # Errors
///
/// [`ActionError::InvalidReference`] if the action names an id outside the
/// context, [`ActionError::Rejected`] with the specific
/// [`PreconditionFailure`] otherwise.
pub fn apply(state: &StoryState, action: ActionInstance) -> Result<StoryState, ActionError> {
    apply_inner(state, action, true)
}

/// Like [`apply`] but skips the history snapshot; used by samplers that only
/// need reachability, not memory questions.
pub(crate) fn apply_transient(state: &StoryState, action: ActionInstance) -> Result<StoryState, ActionError> {
    apply_inner(state, action, false)
}

fn apply_inner(
    state: &StoryState,
    action: ActionInstance,
    record_history: bool,
) -> Result<StoryState, ActionError> {
    check_reference(state.context(), action)?;
    let tr = transition(state, action).map_err(|failure| ActionError::Rejected { failure })?;
    check_modifier(action, tr.witnesses).map_err(|failure| ActionError::Rejected { failure })?;

    let mut next = state.clone();
    for &(key, value) in &tr.world_changes {
        next.set_world(key, value);
    }
    for mut ev in tr.events {
        match action.modifier {
            Some(Modifier::Peek(w)) if ev.spectacle => ev.actual |= bit(w),
            Some(Modifier::Distracted(d)) => ev.actual &= !bit(d),
            _ => {}
        }
        for (key, value) in ev.facts {
            for x in iter_bits(ev.actual) {
                next.set_belief(x, key, value);
                for y in iter_bits(ev.overt | bit(x)) {
                    next.set_nested_belief(x, y, key, value);
                }
            }
        }
    }
    if record_history {
        next.push_history(action);
    }
    Ok(next)
}

/// Quick validity check without building the successor state.
pub fn is_valid(state: &StoryState, action: ActionInstance) -> bool {
    check_reference(state.context(), action).is_ok()
        && transition(state, action)
            .and_then(|tr| check_modifier(action, tr.witnesses))
            .is_ok()
}

// ----------------------------------------------------------------------
// Enumeration
// ----------------------------------------------------------------------

/// Enumerates every valid action instance, in a deterministic order: by
/// kind id, then actor, then parameters, then modifier (`none`, then
/// `peek(w)` by witness, then `distracted(d)` by person). Asymmetry
/// modifiers are enumerated only when `allow_asymmetry` is set.
pub fn enumerate_valid_actions(
    state: &StoryState,
    kinds: &[ActionKind],
    allow_asymmetry: bool,
) -> Vec<ActionInstance> {
    let mut out = Vec::new();
    enumerate_valid_actions_into(state, kinds, allow_asymmetry, &mut out);
    out
}

/// [`enumerate_valid_actions`] writing into a reusable buffer.
pub fn enumerate_valid_actions_into(
    state: &StoryState,
    kinds: &[ActionKind],
    allow_asymmetry: bool,
    out: &mut Vec<ActionInstance>,
) {
    out.clear();
    let ctx = state.context().clone();
    let mut kind_ids: Vec<ActionKind> = kinds.to_vec();
    kind_ids.sort();
    kind_ids.dedup();

    let everyone: u32 = ctx.person_ids().map(bit).fold(0, |a, b| a | b);

    let push_with_modifiers = |out: &mut Vec<ActionInstance>, state: &StoryState, actor: PersonId, body: ActionBody| {
        let Ok(tr) = transition(state, ActionInstance::new(actor, body)) else {
            return;
        };
        out.push(ActionInstance::new(actor, body));
        if !allow_asymmetry {
            return;
        }
        for w in iter_bits(everyone & !tr.witnesses) {
            out.push(ActionInstance::with_modifier(actor, body, Modifier::Peek(w)));
        }
        for d in iter_bits(tr.witnesses & !bit(actor)) {
            out.push(ActionInstance::with_modifier(actor, body, Modifier::Distracted(d)));
        }
    };

    for kind in kind_ids {
        for actor in ctx.person_ids() {
            match kind {
                ActionKind::Enter => {
                    for room in ctx.room_ids() {
                        push_with_modifiers(out, state, actor, ActionBody::Enter { room });
                    }
                }
                ActionKind::Leave => {
                    for room in ctx.room_ids() {
                        push_with_modifiers(out, state, actor, ActionBody::Leave { room });
                    }
                }
                ActionKind::MoveObjContainer => {
                    for container in ctx.container_ids() {
                        push_with_modifiers(
                            out,
                            state,
                            actor,
                            ActionBody::MoveObjContainer { container },
                        );
                    }
                }
                ActionKind::MoveObjRoom => {
                    for room in ctx.room_ids() {
                        push_with_modifiers(out, state, actor, ActionBody::MoveObjRoom { room });
                    }
                }
                ActionKind::UpdateObjState => {
                    for phrase in ctx.phrase_ids() {
                        push_with_modifiers(out, state, actor, ActionBody::UpdateObjState { phrase });
                    }
                }
                ActionKind::InfoPrivate => {
                    for addressee in ctx.person_ids() {
                        for fact in CommFact::ALL {
                            push_with_modifiers(
                                out,
                                state,
                                actor,
                                ActionBody::InfoPrivate { addressee, fact },
                            );
                        }
                    }
                }
                ActionKind::InfoPublic => {
                    for room in ctx.room_ids() {
                        for fact in CommFact::ALL {
                            push_with_modifiers(out, state, actor, ActionBody::InfoPublic { room, fact });
                        }
                    }
                }
                ActionKind::ChitChatPrivate => {
                    for addressee in ctx.person_ids() {
                        for topic in ctx.topic_ids() {
                            push_with_modifiers(
                                out,
                                state,
                                actor,
                                ActionBody::ChitChatPrivate { addressee, topic },
                            );
                        }
                    }
                }
                ActionKind::ChitChatPublic => {
                    for room in ctx.room_ids() {
                        for topic in ctx.topic_ids() {
                            push_with_modifiers(
                                out,
                                state,
                                actor,
                                ActionBody::ChitChatPublic { room, topic },
                            );
                        }
                    }
                }
            }
        }
    }
}

// ----------------------------------------------------------------------
// JSON form (used by state dumps)
// ----------------------------------------------------------------------

/// Structured JSON form of an action instance, with names resolved.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct ActionJson {
    pub kind: String,
    pub kind_id: u8,
    pub actor: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub room: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub container: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phrase: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub addressee: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fact: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub topic: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modifier: Option<ModifierJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct ModifierJson {
    pub kind: String,
    pub person: String,
}

impl ActionJson {
    pub fn build(ctx: &StoryContext, action: ActionInstance) -> Self {
        let mut json = ActionJson {
            kind: action.kind().name().to_string(),
            kind_id: action.kind().id(),
            actor: ctx.person_name(action.actor).to_string(),
            room: None,
            container: None,
            phrase: None,
            addressee: None,
            fact: None,
            topic: None,
            modifier: action.modifier.map(|m| match m {
                Modifier::Peek(w) => ModifierJson {
                    kind: "peek".to_string(),
                    person: ctx.person_name(w).to_string(),
                },
                Modifier::Distracted(d) => ModifierJson {
                    kind: "distracted".to_string(),
                    person: ctx.person_name(d).to_string(),
                },
            }),
        };
        let fact_name = |f: CommFact| f.key().property_name().to_string();
        match action.body {
            ActionBody::Enter { room } | ActionBody::Leave { room } | ActionBody::MoveObjRoom { room } => {
                json.room = Some(ctx.room_name(room).to_string());
            }
            ActionBody::MoveObjContainer { container } => {
                json.container = Some(ctx.container_name(container).to_string());
            }
            ActionBody::UpdateObjState { phrase } => {
                json.phrase = Some(ctx.phrase_text(phrase).to_string());
            }
            ActionBody::InfoPrivate { addressee, fact } => {
                json.addressee = Some(ctx.person_name(addressee).to_string());
                json.fact = Some(fact_name(fact));
            }
            ActionBody::InfoPublic { room, fact } => {
                json.room = Some(ctx.room_name(room).to_string());
                json.fact = Some(fact_name(fact));
            }
            ActionBody::ChitChatPrivate { addressee, topic } => {
                json.addressee = Some(ctx.person_name(addressee).to_string());
                json.topic = Some(ctx.topic_name(topic).to_string());
            }
            ActionBody::ChitChatPublic { room, topic } => {
                json.room = Some(ctx.room_name(room).to_string());
                json.topic = Some(ctx.topic_name(topic).to_string());
            }
        }
        json
    }
}
