//! Exact world state and nested belief tracking.
//!
//! A [`StoryState`] keeps three tables over the same space of facts:
//!
//! * `ws` — the true world state: one value per fact.
//! * `b1` — first-order beliefs: what each person believes each fact to be.
//! * `b2` — second-order beliefs: what each person believes some other
//!   person believes each fact to be.
//!
//! Facts are `(subject, property)` pairs — a person's room, the object's room
//! and container, the object's current visible and invisible state phrase,
//! and whether each topic has come up. Beliefs hold the same kind of value as
//! the world state plus the distinguished `Nowhere` ("offstage" / "in no
//! container" / "no update applied") and `Unknown` markers, so a belief can
//! be silently stale: nothing in the tables says *whether* a belief is
//! correct, only what it is.
//!
//! The state also records the full action history together with a world-state
//! snapshot after every action, which is what memory questions ("where was it
//! before ...?") are answered from.

use crate::action::ActionInstance;
use crate::context::{ContainerId, PersonId, PhraseId, RoomId, StoryContext, TopicId};
use serde::Serialize;
use std::sync::Arc;
use thiserror::Error;

/// The value a fact (or a belief about it) can take.
///
/// `Nowhere` is a first-class value, not an error: a person who has left the
/// stage is `Nowhere`, an object outside every container is `Nowhere` in its
/// container slot, and an object with no update applied is `Nowhere` in its
/// state slots. `Unknown` is reserved for beliefs with no information at all;
/// the standard initial state is fully common knowledge, so `Unknown` only
/// shows up in states built by hand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Value {
    Room(RoomId),
    Container(ContainerId),
    Phrase(PhraseId),
    Bool(bool),
    Nowhere,
    Unknown,
}

impl Value {
    /// Human-readable form, used by answer rendering and state dumps.
    pub fn render(self, ctx: &StoryContext) -> String {
        match self {
            Value::Room(r) => ctx.room_name(r).to_string(),
            Value::Container(c) => ctx.container_name(c).to_string(),
            Value::Phrase(p) => ctx.phrase_text(p).to_string(),
            Value::Bool(true) => "yes".to_string(),
            Value::Bool(false) => "no".to_string(),
            Value::Nowhere => "nowhere".to_string(),
            Value::Unknown => "unknown".to_string(),
        }
    }
}

/// Identity of one tracked fact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FactKey {
    /// Which room a person is in (`Nowhere` when offstage).
    PersonRoom(PersonId),
    /// Which room the object is in. Always a real room.
    ObjectRoom,
    /// Which container the object is in (`Nowhere` when unenclosed).
    ObjectContainer,
    /// The outwardly visible update phrase currently applied to the object
    /// (`Nowhere` before any visible update).
    VisibleState,
    /// The externally invisible update phrase currently applied.
    InvisibleState,
    /// Whether a topic has come up in conversation.
    TopicKnown(TopicId),
}

impl FactKey {
    /// Dense index of this fact: person rooms first, then the four object
    /// slots, then topics. The layout is stable and shared by snapshots and
    /// serialization.
    pub fn index(self, ctx: &StoryContext) -> usize {
        let p = ctx.person_count();
        match self {
            FactKey::PersonRoom(id) => id.index(),
            FactKey::ObjectRoom => p,
            FactKey::ObjectContainer => p + 1,
            FactKey::VisibleState => p + 2,
            FactKey::InvisibleState => p + 3,
            FactKey::TopicKnown(id) => p + 4 + id.index(),
        }
    }

    pub fn from_index(ctx: &StoryContext, index: usize) -> Option<FactKey> {
        let p = ctx.person_count();
        Some(match index {
            i if i < p => FactKey::PersonRoom(PersonId(i as u8)),
            i if i == p => FactKey::ObjectRoom,
            i if i == p + 1 => FactKey::ObjectContainer,
            i if i == p + 2 => FactKey::VisibleState,
            i if i == p + 3 => FactKey::InvisibleState,
            i if i < p + 4 + ctx.topic_count() => FactKey::TopicKnown(TopicId((i - p - 4) as u8)),
            _ => return None,
        })
    }

    /// Property name as it appears in the JSON schema.
    pub fn property_name(self) -> &'static str {
        match self {
            FactKey::PersonRoom(_) => "person_room",
            FactKey::ObjectRoom => "object_room",
            FactKey::ObjectContainer => "object_container",
            FactKey::VisibleState => "visible_state",
            FactKey::InvisibleState => "invisible_state",
            FactKey::TopicKnown(_) => "topic_known",
        }
    }
}

/// Number of tracked facts for a context.
pub fn fact_count(ctx: &StoryContext) -> usize {
    ctx.person_count() + 4 + ctx.topic_count()
}

/// All fact keys in index order.
pub fn fact_keys(ctx: &StoryContext) -> impl Iterator<Item = FactKey> + '_ {
    (0..fact_count(ctx)).map(|i| FactKey::from_index(ctx, i).expect("index in range"))
}

/// One applied action plus the world state right after it.
#[derive(Debug, Clone)]
pub struct HistoryEntry {
    pub action: ActionInstance,
    ws_after: Arc<[Value]>,
}

impl HistoryEntry {
    pub fn ws_after(&self) -> &[Value] {
        &self.ws_after
    }
}

/// Errors from state queries.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum StateError {
    #[error("unknown {category} name: {name:?}")]
    UnknownName { category: &'static str, name: String },
    #[error("unknown property: {0:?}")]
    UnknownProperty(String),
    #[error("query order {order} {problem}")]
    BadQuery { order: u8, problem: &'static str },
    #[error("history index {index} out of range 0..={len}")]
    HistoryIndex { index: usize, len: usize },
}

/// Full story state: context, the three belief tables, and history.
#[derive(Debug, Clone)]
pub struct StoryState {
    context: Arc<StoryContext>,
    initial_ws: Arc<[Value]>,
    pub(crate) ws: Box<[Value]>,
    /// `b1[person * F + fact]`
    pub(crate) b1: Box<[Value]>,
    /// `b2[(believer * P + about) * F + fact]`
    pub(crate) b2: Box<[Value]>,
    history: Vec<HistoryEntry>,
}

impl StoryState {
    /// Builds the canonical initial state for a context: everyone offstage
    /// (`Nowhere`), the object in the main room and in no container, no
    /// update applied, no topic discussed — and all of it common knowledge,
    /// so every belief table starts equal to the world state.
    ///
    /// # Errors
    ///
    /// Fails with the context's validation error if the context is
    /// malformed.
    pub fn init(context: Arc<StoryContext>) -> Result<Self, crate::context::ContextError> {
        context.validate()?;
        let f = fact_count(&context);
        let p = context.person_count();
        let mut ws = vec![Value::Nowhere; f];
        ws[FactKey::ObjectRoom.index(&context)] = Value::Room(context.main_room());
        ws[FactKey::ObjectContainer.index(&context)] = Value::Nowhere;
        for t in context.topic_ids() {
            ws[FactKey::TopicKnown(t).index(&context)] = Value::Bool(false);
        }
        let b1: Vec<Value> = std::iter::repeat_n(ws.iter().copied(), p)
            .flatten()
            .collect();
        let b2: Vec<Value> = std::iter::repeat_n(ws.iter().copied(), p * p)
            .flatten()
            .collect();
        let ws: Box<[Value]> = ws.into();
        Ok(StoryState {
            context,
            initial_ws: Arc::from(&*ws),
            ws,
            b1: b1.into(),
            b2: b2.into(),
            history: Vec::new(),
        })
    }

    pub fn context(&self) -> &Arc<StoryContext> {
        &self.context
    }

    pub fn history(&self) -> &[HistoryEntry] {
        &self.history
    }

    pub fn actions(&self) -> impl Iterator<Item = ActionInstance> + '_ {
        self.history.iter().map(|h| h.action)
    }

    /// Current true value of a fact.
    pub fn world(&self, key: FactKey) -> Value {
        self.ws[key.index(&self.context)]
    }

    /// What `believer` believes the fact to be.
    pub fn belief(&self, believer: PersonId, key: FactKey) -> Value {
        self.b1[believer.index() * fact_count(&self.context) + key.index(&self.context)]
    }

    /// What `believer` believes `about` believes the fact to be.
    pub fn nested_belief(&self, believer: PersonId, about: PersonId, key: FactKey) -> Value {
        let f = fact_count(&self.context);
        let p = self.context.person_count();
        self.b2[(believer.index() * p + about.index()) * f + key.index(&self.context)]
    }

    /// The world-state snapshot after the first `index` actions; `0` is the
    /// initial state.
    ///
    /// # Errors
    ///
    /// Fails when `index` exceeds the history length.
    pub fn state_at(&self, index: usize) -> Result<&[Value], StateError> {
        if index == 0 {
            Ok(&self.initial_ws)
        } else if index <= self.history.len() {
            Ok(self.history[index - 1].ws_after())
        } else {
            Err(StateError::HistoryIndex {
                index,
                len: self.history.len(),
            })
        }
    }

    /// Value of `key` in the snapshot after the first `index` actions.
    pub fn world_at(&self, index: usize, key: FactKey) -> Result<Value, StateError> {
        Ok(self.state_at(index)?[key.index(&self.context)])
    }

    /// Name-based query used by the CLI and the Python bindings.
    ///
    /// `order` 0 reads the world state (no persons), 1 reads `believer`'s
    /// belief, 2 reads `believer`'s belief about `about`'s belief. `subject`
    /// is a person name for `person_room`, a topic name for `topic_known`,
    /// and the object name otherwise.
    ///
    /// # Errors
    ///
    /// Rejects unknown names, unknown properties, and person arguments that
    /// do not match the order.
    pub fn query(
        &self,
        order: u8,
        believer: Option<&str>,
        about: Option<&str>,
        subject: &str,
        property: &str,
    ) -> Result<Value, StateError> {
        let key = self.key_by_name(subject, property)?;
        let want = |name: Option<&str>, needed: bool, label: &'static str| -> Result<Option<PersonId>, StateError> {
            match (name, needed) {
                (Some(n), true) => {
                    let id = self.context.person_id(n).ok_or(StateError::UnknownName {
                        category: "person",
                        name: n.to_string(),
                    })?;
                    Ok(Some(id))
                }
                (None, false) => Ok(None),
                (Some(_), false) => Err(StateError::BadQuery {
                    order,
                    problem: match label {
                        "believer" => "takes no believer argument",
                        _ => "takes no about-person argument",
                    },
                }),
                (None, true) => Err(StateError::BadQuery {
                    order,
                    problem: match label {
                        "believer" => "requires a believer argument",
                        _ => "requires an about-person argument",
                    },
                }),
            }
        };
        match order {
            0 => {
                want(believer, false, "believer")?;
                want(about, false, "about")?;
                Ok(self.world(key))
            }
            1 => {
                let b = want(believer, true, "believer")?.expect("required");
                want(about, false, "about")?;
                Ok(self.belief(b, key))
            }
            2 => {
                let b = want(believer, true, "believer")?.expect("required");
                let a = want(about, true, "about")?.expect("required");
                Ok(self.nested_belief(b, a, key))
            }
            _ => Err(StateError::BadQuery {
                order,
                problem: "must be 0, 1, or 2",
            }),
        }
    }

    fn key_by_name(&self, subject: &str, property: &str) -> Result<FactKey, StateError> {
        match property {
            "person_room" => {
                let id = self.context.person_id(subject).ok_or(StateError::UnknownName {
                    category: "person",
                    name: subject.to_string(),
                })?;
                Ok(FactKey::PersonRoom(id))
            }
            "topic_known" => {
                let id = self.context.topic_id(subject).ok_or(StateError::UnknownName {
                    category: "topic",
                    name: subject.to_string(),
                })?;
                Ok(FactKey::TopicKnown(id))
            }
            "object_room" | "object_container" | "visible_state" | "invisible_state" => {
                if subject != self.context.object {
                    return Err(StateError::UnknownName {
                        category: "object",
                        name: subject.to_string(),
                    });
                }
                Ok(match property {
                    "object_room" => FactKey::ObjectRoom,
                    "object_container" => FactKey::ObjectContainer,
                    "visible_state" => FactKey::VisibleState,
                    _ => FactKey::InvisibleState,
                })
            }
            other => Err(StateError::UnknownProperty(other.to_string())),
        }
    }

    // ------------------------------------------------------------------
    // Mutation — only the action interpreter writes to the tables.
    // ------------------------------------------------------------------

    pub(crate) fn set_world(&mut self, key: FactKey, value: Value) {
        self.ws[key.index(&self.context)] = value;
    }

    pub(crate) fn set_belief(&mut self, believer: PersonId, key: FactKey, value: Value) {
        let f = fact_count(&self.context);
        self.b1[believer.index() * f + key.index(&self.context)] = value;
    }

    pub(crate) fn set_nested_belief(
        &mut self,
        believer: PersonId,
        about: PersonId,
        key: FactKey,
        value: Value,
    ) {
        let f = fact_count(&self.context);
        let p = self.context.person_count();
        self.b2[(believer.index() * p + about.index()) * f + key.index(&self.context)] = value;
    }

    pub(crate) fn push_history(&mut self, action: ActionInstance) {
        self.history.push(HistoryEntry {
            action,
            ws_after: Arc::from(&*self.ws),
        });
    }

    /// Everyone currently located in `room`.
    pub fn occupants(&self, room: RoomId) -> Vec<PersonId> {
        self.context
            .person_ids()
            .filter(|p| self.world(FactKey::PersonRoom(*p)) == Value::Room(room))
            .collect()
    }

    /// JSON dump of the full state (context, tables, history snapshots).
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&StateJson::build(self)).expect("state serializes")
    }
}

// ----------------------------------------------------------------------
// JSON schema
// ----------------------------------------------------------------------

/// Serialized form of a [`Value`]: tagged for rooms/containers/phrases,
/// plain literals for the distinguished values.
#[derive(Serialize)]
#[serde(rename_all = "snake_case")]
enum ValueJson {
    Room(String),
    Container(String),
    Phrase(String),
    Bool(bool),
    Nowhere,
    Unknown,
}

impl ValueJson {
    fn build(ctx: &StoryContext, v: Value) -> Self {
        match v {
            Value::Room(r) => ValueJson::Room(ctx.room_name(r).to_string()),
            Value::Container(c) => ValueJson::Container(ctx.container_name(c).to_string()),
            Value::Phrase(p) => ValueJson::Phrase(ctx.phrase_text(p).to_string()),
            Value::Bool(b) => ValueJson::Bool(b),
            Value::Nowhere => ValueJson::Nowhere,
            Value::Unknown => ValueJson::Unknown,
        }
    }
}

#[derive(Serialize)]
struct FactJson {
    #[serde(skip_serializing_if = "Option::is_none")]
    believer: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    about_person: Option<String>,
    subject: String,
    property: &'static str,
    value: ValueJson,
}

#[derive(Serialize)]
struct HistoryJson {
    action: crate::action::ActionJson,
    ws_after: Vec<FactJson>,
}

#[derive(Serialize)]
struct StateJson {
    context: StoryContext,
    ws: Vec<FactJson>,
    b1: Vec<FactJson>,
    b2: Vec<FactJson>,
    history: Vec<HistoryJson>,
}

impl StateJson {
    fn build(state: &StoryState) -> Self {
        let ctx = state.context();
        let subject_of = |key: FactKey| -> String {
            match key {
                FactKey::PersonRoom(p) => ctx.person_name(p).to_string(),
                FactKey::TopicKnown(t) => ctx.topic_name(t).to_string(),
                _ => ctx.object.clone(),
            }
        };
        let fact_row = |believer: Option<PersonId>, about: Option<PersonId>, key: FactKey, v: Value| FactJson {
            believer: believer.map(|p| ctx.person_name(p).to_string()),
            about_person: about.map(|p| ctx.person_name(p).to_string()),
            subject: subject_of(key),
            property: key.property_name(),
            value: ValueJson::build(ctx, v),
        };
        let ws_rows = |ws: &[Value]| -> Vec<FactJson> {
            fact_keys(ctx)
                .map(|k| fact_row(None, None, k, ws[k.index(ctx)]))
                .collect()
        };
        StateJson {
            context: (**ctx).clone(),
            ws: ws_rows(&state.ws),
            b1: ctx
                .person_ids()
                .flat_map(|p| {
                    fact_keys(ctx).map(move |k| (p, k))
                })
                .map(|(p, k)| fact_row(Some(p), None, k, state.belief(p, k)))
                .collect(),
            b2: ctx
                .person_ids()
                .flat_map(|p| ctx.person_ids().map(move |q| (p, q)))
                .flat_map(|(p, q)| fact_keys(ctx).map(move |k| (p, q, k)))
                .map(|(p, q, k)| fact_row(Some(p), Some(q), k, state.nested_belief(p, q, k)))
                .collect(),
            history: state
                .history
                .iter()
                .map(|h| HistoryJson {
                    action: crate::action::ActionJson::build(ctx, h.action),
                    ws_after: ws_rows(h.ws_after()),
                })
                .collect(),
        }
    }
}
