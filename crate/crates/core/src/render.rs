//! Canonical story text: a fixed, invertible line format for actions.
//!
//! Every action renders to exactly one English line, and every rendered line
//! parses back to the action that produced it. Entity names appear verbatim,
//! which is why contexts reject names that collide across categories. The
//! communication actions embed the value the speaker asserts (their belief
//! at that moment), so rendering a story replays it from the start; parsing
//! only needs the line and the context.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{apply, ActionBody, ActionInstance, CommFact, Modifier};
use crate::context::StoryContext;
use crate::state::{FactKey, StoryState, Value};

/// A line (or span of text) could not be interpreted as a story.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}: unrecognized action line: {text:?}")]
    UnrecognizedLine { line: usize, text: String },
    #[error("line {line}: action is invalid at this point in the story: {text:?}")]
    InvalidAtThisPoint { line: usize, text: String },
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

fn modifier_suffix(ctx: &StoryContext, modifier: Option<Modifier>) -> String {
    match modifier {
        None => String::new(),
        Some(Modifier::Peek(w)) => format!(
            " While this action was happening, {} witnessed this action in secret (and only this action).",
            ctx.person_name(w)
        ),
        Some(Modifier::Distracted(d)) => format!(
            " While this action was happening, {} was distracted and did not notice it (and only this action).",
            ctx.person_name(d)
        ),
    }
}

/// How a communicated fact reads inside "told ... that the `<object>` ...".
fn fact_clause(ctx: &StoryContext, fact: CommFact, value: Value) -> String {
    match (fact, value) {
        (CommFact::ObjectRoom, Value::Room(r)) => format!("is in the {}", ctx.room_name(r)),
        (CommFact::ObjectContainer, Value::Container(c)) => {
            format!("is in the {}", ctx.container_name(c))
        }
        (CommFact::VisibleState | CommFact::InvisibleState, Value::Phrase(p)) => {
            ctx.phrase_text(p).to_string()
        }
        _ => unreachable!("communication preconditions guarantee a concrete value"),
    }
}

/// Renders one action as its canonical line. `state` must be the state the
/// action applies to (communications read the speaker's belief from it).
pub fn render_action(state: &StoryState, action: ActionInstance) -> String {
    let ctx = state.context();
    let actor = ctx.person_name(action.actor);
    let object = &ctx.object;
    let main = match action.body {
        ActionBody::Enter { room } => format!("{actor} entered the {}.", ctx.room_name(room)),
        ActionBody::Leave { room } => format!("{actor} left the {}.", ctx.room_name(room)),
        ActionBody::MoveObjContainer { container } => {
            let Value::Room(here) = state.world(FactKey::ObjectRoom) else {
                unreachable!("a placed object always has a room");
            };
            format!(
                "{actor} moved the {object} to the {}, which is also located in the {}.",
                ctx.container_name(container),
                ctx.room_name(here)
            )
        }
        ActionBody::MoveObjRoom { room } => {
            // Relocation pulls the object out of its container, so the line
            // says which container stays behind (when there is one).
            match state.world(FactKey::ObjectContainer) {
                Value::Container(c) => format!(
                    "{actor} moved the {object} to the {}, leaving the {} in its original location.",
                    ctx.room_name(room),
                    ctx.container_name(c)
                ),
                _ => format!("{actor} moved the {object} to the {}.", ctx.room_name(room)),
            }
        }
        ActionBody::UpdateObjState { phrase } => format!(
            "{actor} made sure the {object} {}.",
            ctx.phrase_text(phrase)
        ),
        ActionBody::InfoPrivate { addressee, fact } => {
            let value = state.belief(action.actor, fact.key());
            format!(
                "{actor} told privately to {} that the {object} {}.",
                ctx.person_name(addressee),
                fact_clause(ctx, fact, value)
            )
        }
        ActionBody::InfoPublic { room, fact } => {
            let value = state.belief(action.actor, fact.key());
            format!(
                "{actor} announced to everyone in the {} that the {object} {}.",
                ctx.room_name(room),
                fact_clause(ctx, fact, value)
            )
        }
        ActionBody::ChitChatPrivate { addressee, topic } => format!(
            "{actor} privately chatted with {} about {}.",
            ctx.person_name(addressee),
            ctx.topic_name(topic)
        ),
        ActionBody::ChitChatPublic { room, topic } => format!(
            "{actor} chatted with everyone in the {} about {}.",
            ctx.room_name(room),
            ctx.topic_name(topic)
        ),
    };
    format!("{main}{}", modifier_suffix(ctx, action.modifier))
}

/// The fixed scene-setting line stating where the object starts.
pub fn scene_line(ctx: &StoryContext) -> String {
    format!(
        "The {} is in the {}.",
        ctx.object,
        ctx.room_name(ctx.main_room())
    )
}

/// How a rendered story was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RenderStyle {
    /// One fixed template line per action.
    Canonical,
    /// Freeform prose written around the action skeleton.
    Infilled,
}

/// One unit of story prose narrating a run of consecutive actions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedLine {
    /// Indices into the story's action list that this text narrates.
    pub actions: Range<usize>,
    pub text: String,
}

/// A story as prose, with per-line provenance back to the actions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedStory {
    /// Scene-setting text preceding any action.
    pub opening: Option<String>,
    pub lines: Vec<RenderedLine>,
    pub style: RenderStyle,
}

impl RenderedStory {
    /// The full prose: opening (if any) then each line, newline-separated.
    pub fn text(&self) -> String {
        let mut parts = Vec::with_capacity(self.lines.len() + 1);
        if let Some(opening) = &self.opening {
            parts.push(opening.as_str());
        }
        parts.extend(self.lines.iter().map(|l| l.text.as_str()));
        parts.join("\n")
    }

    /// True when the lines tile `0..action_count` in order, each covering at
    /// least one action, with no gaps or overlaps.
    pub fn covers(&self, action_count: usize) -> bool {
        let mut next = 0;
        for line in &self.lines {
            if line.actions.start != next || line.actions.is_empty() {
                return false;
            }
            next = line.actions.end;
        }
        next == action_count
    }
}

/// Renders one fixed template line per action. The opening holds any
/// narration from the context followed by the scene-setting line.
/// Communications are rendered against the state they applied to, so the
/// story is replayed from its initial state.
pub fn render_canonical(state: &StoryState) -> RenderedStory {
    let ctx = state.context();
    let opening = match &ctx.opening_narration {
        Some(narration) => format!("{narration}\n{}", scene_line(ctx)),
        None => scene_line(ctx),
    };
    let mut cursor = StoryState::init(ctx.clone()).expect("context was already validated");
    let mut lines = Vec::new();
    for (i, action) in state.actions().enumerate() {
        lines.push(RenderedLine {
            actions: i..i + 1,
            text: render_action(&cursor, action),
        });
        cursor = apply(&cursor, action).expect("recorded history replays cleanly");
    }
    RenderedStory {
        opening: Some(opening),
        lines,
        style: RenderStyle::Canonical,
    }
}

/// Renders a full story as plain text: optional opening narration, the
/// scene-setting line, then one line per action, newline-separated.
pub fn render_story(state: &StoryState) -> String {
    render_canonical(state).text()
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

/// Strips `prefix` from `s` if present.
fn eat<'a>(s: &'a str, prefix: &str) -> Option<&'a str> {
    s.strip_prefix(prefix)
}

/// Matches a known entity name at the start of `s`, returning the remainder.
/// The longest matching name wins, so names sharing a prefix cannot shadow
/// each other.
fn eat_name<'a, 'n>(
    s: &'a str,
    names: impl Iterator<Item = (usize, &'n str)>,
) -> Option<(usize, &'a str)> {
    names
        .filter(|(_, name)| s.starts_with(name))
        .max_by_key(|(_, name)| name.len())
        .map(|(idx, name)| (idx, &s[name.len()..]))
}

fn person_names(ctx: &StoryContext) -> impl Iterator<Item = (usize, &str)> {
    ctx.people.iter().enumerate().map(|(i, p)| (i, p.name.as_str()))
}

fn room_names(ctx: &StoryContext) -> impl Iterator<Item = (usize, &str)> {
    ctx.rooms.iter().enumerate().map(|(i, r)| (i, r.as_str()))
}

fn container_names(ctx: &StoryContext) -> impl Iterator<Item = (usize, &str)> {
    ctx.containers.iter().enumerate().map(|(i, c)| (i, c.as_str()))
}

fn topic_names(ctx: &StoryContext) -> impl Iterator<Item = (usize, &str)> {
    ctx.topics.iter().enumerate().map(|(i, t)| (i, t.as_str()))
}

fn phrase_texts(ctx: &StoryContext) -> impl Iterator<Item = (usize, &str)> {
    ctx.visible_updates
        .iter()
        .chain(ctx.invisible_updates.iter())
        .enumerate()
        .map(|(i, p)| (i, p.as_str()))
}

/// Parses the trailing modifier sentence, returning the main clause and the
/// modifier.
fn split_modifier(ctx: &StoryContext, line: &str) -> Option<(String, Option<Modifier>)> {
    const MARKER: &str = " While this action was happening, ";
    let Some(pos) = line.find(MARKER) else {
        return Some((line.to_string(), None));
    };
    let (main, suffix) = line.split_at(pos);
    let rest = &suffix[MARKER.len()..];
    let (who, rest) = eat_name(rest, person_names(ctx))?;
    let person = crate::context::PersonId(who as u8);
    let modifier = if rest == " witnessed this action in secret (and only this action)." {
        Modifier::Peek(person)
    } else if rest == " was distracted and did not notice it (and only this action)." {
        Modifier::Distracted(person)
    } else {
        return None;
    };
    Some((main.to_string(), Some(modifier)))
}

/// Parses "is in the R/C" or a state phrase, as used by the info actions.
fn parse_fact_clause(ctx: &StoryContext, clause: &str) -> Option<CommFact> {
    if let Some(rest) = eat(clause, "is in the ") {
        if let Some((_, "")) = eat_name(rest, room_names(ctx)) {
            return Some(CommFact::ObjectRoom);
        }
        if let Some((_, "")) = eat_name(rest, container_names(ctx)) {
            return Some(CommFact::ObjectContainer);
        }
    }
    if let Some((idx, "")) = eat_name(clause, phrase_texts(ctx)) {
        return Some(if idx < ctx.visible_updates.len() {
            CommFact::VisibleState
        } else {
            CommFact::InvisibleState
        });
    }
    None
}

/// Parses one canonical action line.
pub fn parse_action_line(ctx: &StoryContext, line: &str) -> Option<ActionInstance> {
    use crate::context::{ContainerId, PersonId, PhraseId, RoomId, TopicId};

    let (main, modifier) = split_modifier(ctx, line)?;
    let main = main.strip_suffix('.')?;
    let (actor_idx, rest) = eat_name(main, person_names(ctx))?;
    let actor = PersonId(actor_idx as u8);

    let body = if let Some(rest) = eat(rest, " entered the ") {
        let (room, "") = eat_name(rest, room_names(ctx))? else {
            return None;
        };
        ActionBody::Enter {
            room: RoomId(room as u8),
        }
    } else if let Some(rest) = eat(rest, " left the ") {
        let (room, "") = eat_name(rest, room_names(ctx))? else {
            return None;
        };
        ActionBody::Leave {
            room: RoomId(room as u8),
        }
    } else if let Some(rest) = eat(rest, &format!(" moved the {} to the ", ctx.object)) {
        if let Some((container, rest)) = eat_name(rest, container_names(ctx)) {
            let rest = eat(rest, ", which is also located in the ")?;
            let (_room, "") = eat_name(rest, room_names(ctx))? else {
                return None;
            };
            ActionBody::MoveObjContainer {
                container: ContainerId(container as u8),
            }
        } else {
            let (room, rest) = eat_name(rest, room_names(ctx))?;
            if !rest.is_empty() {
                // "..., leaving the <container> in its original location"
                let rest = eat(rest, ", leaving the ")?;
                let (_container, " in its original location") =
                    eat_name(rest, container_names(ctx))?
                else {
                    return None;
                };
            }
            ActionBody::MoveObjRoom {
                room: RoomId(room as u8),
            }
        }
    } else if let Some(rest) = eat(rest, &format!(" made sure the {} ", ctx.object)) {
        let (phrase, "") = eat_name(rest, phrase_texts(ctx))? else {
            return None;
        };
        ActionBody::UpdateObjState {
            phrase: PhraseId(phrase as u8),
        }
    } else if let Some(rest) = eat(rest, " told privately to ") {
        let (addressee, rest) = eat_name(rest, person_names(ctx))?;
        let rest = eat(rest, &format!(" that the {} ", ctx.object))?;
        let fact = parse_fact_clause(ctx, rest)?;
        ActionBody::InfoPrivate {
            addressee: PersonId(addressee as u8),
            fact,
        }
    } else if let Some(rest) = eat(rest, " announced to everyone in the ") {
        let (room, rest) = eat_name(rest, room_names(ctx))?;
        let rest = eat(rest, &format!(" that the {} ", ctx.object))?;
        let fact = parse_fact_clause(ctx, rest)?;
        ActionBody::InfoPublic {
            room: RoomId(room as u8),
            fact,
        }
    } else if let Some(rest) = eat(rest, " privately chatted with ") {
        let (addressee, rest) = eat_name(rest, person_names(ctx))?;
        let rest = eat(rest, " about ")?;
        let (topic, "") = eat_name(rest, topic_names(ctx))? else {
            return None;
        };
        ActionBody::ChitChatPrivate {
            addressee: PersonId(addressee as u8),
            topic: TopicId(topic as u8),
        }
    } else {
        let rest = eat(rest, " chatted with everyone in the ")?;
        let (room, rest) = eat_name(rest, room_names(ctx))?;
        let rest = eat(rest, " about ")?;
        let (topic, "") = eat_name(rest, topic_names(ctx))? else {
            return None;
        };
        ActionBody::ChitChatPublic {
            room: RoomId(room as u8),
            topic: TopicId(topic as u8),
        }
    };

    Some(ActionInstance {
        actor,
        body,
        modifier,
    })
}

/// Parses a full canonical story back into a replayed state. The opening
/// narration and scene-setting lines are skipped when present; every other
/// line must parse and apply cleanly, in order.
///
/// # Errors
///
/// [`ParseError::UnrecognizedLine`] for text that matches no action
/// template, [`ParseError::InvalidAtThisPoint`] for an action line whose
/// preconditions fail where it appears.
pub fn parse_story(
    ctx: &std::sync::Arc<StoryContext>,
    text: &str,
) -> Result<StoryState, ParseError> {
    let mut state = StoryState::init(ctx.clone()).map_err(|e| ParseError::UnrecognizedLine {
        line: 0,
        text: e.to_string(),
    })?;
    let scene = scene_line(ctx);
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty()
            || line == scene
            || ctx.opening_narration.as_deref() == Some(line)
        {
            continue;
        }
        let action =
            parse_action_line(ctx, line).ok_or_else(|| ParseError::UnrecognizedLine {
                line: i + 1,
                text: line.to_string(),
            })?;
        state = apply(&state, action).map_err(|_| ParseError::InvalidAtThisPoint {
            line: i + 1,
            text: line.to_string(),
        })?;
    }
    Ok(state)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
