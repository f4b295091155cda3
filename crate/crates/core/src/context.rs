//! Story contexts: the fixed cast, setting, and props that a story is built
//! from.
//!
//! A [`StoryContext`] declares everyone and everything a story may mention:
//! the people (with optional persona lines), exactly two rooms, a single
//! movable object, the opaque containers that can hold it, the topics people
//! can chat about, and the state-update phrases that can be applied to the
//! object. Every other layer (state tracking, action enumeration, question
//! generation, rendering) resolves names through the context, so the engine
//! itself works on small integer ids.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One member of the cast.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Person {
    pub name: String,
    /// Short free-text persona ("a meticulous nurse"). May be empty; it is
    /// only used as flavor for narrative prompts.
    #[serde(default)]
    pub persona: String,
}

/// The declaration a story is generated against.
///
/// Field names double as the JSON schema: contexts serialize with exactly
/// these `lower_snake_case` keys. `rooms` always holds two entries; the first
/// is the main room where the object starts, the second the alternative room.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoryContext {
    pub people: Vec<Person>,
    pub rooms: Vec<String>,
    pub object: String,
    pub containers: Vec<String>,
    pub topics: Vec<String>,
    /// State phrases whose effect is outwardly visible on the object
    /// ("is painted gold"). Phrased so that `the <object> <phrase>` reads as
    /// a sentence.
    #[serde(default)]
    pub visible_updates: Vec<String>,
    /// State phrases that cannot be noticed by just looking ("is salted").
    #[serde(default)]
    pub invisible_updates: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opening_narration: Option<String>,
}

/// A context failed validation. `issues` lists every offending field.
#[derive(Debug, Error)]
#[error("invalid story context: {}", issues.join("; "))]
pub struct ContextError {
    pub issues: Vec<String>,
}

macro_rules! id_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub u8);

        impl $name {
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }
    };
}

id_type!(
    /// Index into [`StoryContext::people`].
    PersonId
);
id_type!(
    /// Index into [`StoryContext::rooms`] (0 = main room, 1 = alternative).
    RoomId
);
id_type!(
    /// Index into [`StoryContext::containers`].
    ContainerId
);
id_type!(
    /// Index into [`StoryContext::topics`].
    TopicId
);
id_type!(
    /// Index into the concatenation of visible then invisible update phrases.
    PhraseId
);

impl StoryContext {
    /// Checks every schema rule and returns the full list of violations.
    ///
    /// # Errors
    ///
    /// Returns a [`ContextError`] naming each offending field when the
    /// context is malformed (too few people/containers/topics, a room count
    /// other than two, empty names, or name collisions).
    pub fn validate(&self) -> Result<(), ContextError> {
        let mut issues = Vec::new();
        if self.people.len() < 2 {
            issues.push(format!("people: need at least 2, got {}", self.people.len()));
        }
        if self.people.len() > 32 {
            issues.push("people: more than 32 entries".into());
        }
        for (i, p) in self.people.iter().enumerate() {
            if p.name.trim().is_empty() {
                issues.push(format!("people[{i}].name: empty"));
            }
        }
        if self.rooms.len() != 2 {
            issues.push(format!(
                "rooms: need exactly 2 (main room then alternative), got {}",
                self.rooms.len()
            ));
        }
        for (i, r) in self.rooms.iter().enumerate() {
            if r.trim().is_empty() {
                issues.push(format!("rooms[{i}]: empty"));
            }
        }
        if self.object.trim().is_empty() {
            issues.push("object: empty".into());
        }
        if self.containers.len() < 2 {
            issues.push(format!(
                "containers: need at least 2, got {}",
                self.containers.len()
            ));
        }
        for (i, c) in self.containers.iter().enumerate() {
            if c.trim().is_empty() {
                issues.push(format!("containers[{i}]: empty"));
            }
        }
        if self.topics.len() < 2 {
            issues.push(format!("topics: need at least 2, got {}", self.topics.len()));
        }
        for (i, t) in self.topics.iter().enumerate() {
            if t.trim().is_empty() {
                issues.push(format!("topics[{i}]: empty"));
            }
        }
        for (i, u) in self.visible_updates.iter().enumerate() {
            if u.trim().is_empty() {
                issues.push(format!("visible_updates[{i}]: empty"));
            }
        }
        for (i, u) in self.invisible_updates.iter().enumerate() {
            if u.trim().is_empty() {
                issues.push(format!("invisible_updates[{i}]: empty"));
            }
        }
        if self.phrase_count() > 250 {
            issues.push("visible_updates/invisible_updates: more than 250 phrases".into());
        }
        if self.containers.len() > 250 {
            issues.push("containers: more than 250 entries".into());
        }
        if self.topics.len() > 250 {
            issues.push("topics: more than 250 entries".into());
        }

        // Uniqueness within each category.
        dup_check(&mut issues, "people", self.people.iter().map(|p| p.name.as_str()));
        dup_check(&mut issues, "rooms", self.rooms.iter().map(String::as_str));
        dup_check(&mut issues, "containers", self.containers.iter().map(String::as_str));
        dup_check(&mut issues, "topics", self.topics.iter().map(String::as_str));
        dup_check(
            &mut issues,
            "visible_updates/invisible_updates",
            self.visible_updates
                .iter()
                .chain(self.invisible_updates.iter())
                .map(String::as_str),
        );

        // Names must also be unique across categories: the canonical line
        // renderer and the answer grader both identify entities by name, so a
        // container that shares its name with a room would make action lines
        // ambiguous and grading unsound.
        let mut named: Vec<(&'static str, &str)> = Vec::new();
        named.extend(self.people.iter().map(|p| ("people", p.name.as_str())));
        named.extend(self.rooms.iter().map(|r| ("rooms", r.as_str())));
        named.push(("object", self.object.as_str()));
        named.extend(self.containers.iter().map(|c| ("containers", c.as_str())));
        named.extend(self.topics.iter().map(|t| ("topics", t.as_str())));
        for (i, (category, name)) in named.iter().enumerate() {
            if let Some((other_cat, _)) = named[..i]
                .iter()
                .find(|(c, n)| c != category && n.eq_ignore_ascii_case(name))
            {
                issues.push(format!(
                    "{category}: name {name:?} collides with an entry in {other_cat}"
                ));
            }
        }

        if issues.is_empty() {
            Ok(())
        } else {
            Err(ContextError { issues })
        }
    }

    /// Parses and validates a context from its JSON form.
    ///
    /// # Errors
    ///
    /// Returns a [`ContextError`] for both malformed JSON and schema
    /// violations.
    pub fn from_json(text: &str) -> Result<Self, ContextError> {
        let ctx: StoryContext = serde_json::from_str(text).map_err(|e| ContextError {
            issues: vec![format!("json: {e}")],
        })?;
        ctx.validate()?;
        Ok(ctx)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("context serializes")
    }

    pub fn person_count(&self) -> usize {
        self.people.len()
    }

    pub fn phrase_count(&self) -> usize {
        self.visible_updates.len() + self.invisible_updates.len()
    }

    pub fn topic_count(&self) -> usize {
        self.topics.len()
    }

    pub fn person_name(&self, id: PersonId) -> &str {
        &self.people[id.index()].name
    }

    pub fn room_name(&self, id: RoomId) -> &str {
        &self.rooms[id.index()]
    }

    pub fn container_name(&self, id: ContainerId) -> &str {
        &self.containers[id.index()]
    }

    pub fn topic_name(&self, id: TopicId) -> &str {
        &self.topics[id.index()]
    }

    /// The phrase text for a [`PhraseId`]; ids index visible phrases first,
    /// then invisible ones.
    pub fn phrase_text(&self, id: PhraseId) -> &str {
        let i = id.index();
        if i < self.visible_updates.len() {
            &self.visible_updates[i]
        } else {
            &self.invisible_updates[i - self.visible_updates.len()]
        }
    }

    pub fn phrase_is_visible(&self, id: PhraseId) -> bool {
        id.index() < self.visible_updates.len()
    }

    pub fn main_room(&self) -> RoomId {
        RoomId(0)
    }

    pub fn person_id(&self, name: &str) -> Option<PersonId> {
        self.people
            .iter()
            .position(|p| p.name == name)
            .map(|i| PersonId(i as u8))
    }

    pub fn room_id(&self, name: &str) -> Option<RoomId> {
        self.rooms.iter().position(|r| r == name).map(|i| RoomId(i as u8))
    }

    pub fn container_id(&self, name: &str) -> Option<ContainerId> {
        self.containers
            .iter()
            .position(|c| c == name)
            .map(|i| ContainerId(i as u8))
    }

    pub fn topic_id(&self, name: &str) -> Option<TopicId> {
        self.topics.iter().position(|t| t == name).map(|i| TopicId(i as u8))
    }

    pub fn phrase_id(&self, text: &str) -> Option<PhraseId> {
        self.visible_updates
            .iter()
            .chain(self.invisible_updates.iter())
            .position(|p| p == text)
            .map(|i| PhraseId(i as u8))
    }

    pub fn person_ids(&self) -> impl Iterator<Item = PersonId> + '_ {
        (0..self.people.len()).map(|i| PersonId(i as u8))
    }

    pub fn room_ids(&self) -> impl Iterator<Item = RoomId> + '_ {
        (0..self.rooms.len()).map(|i| RoomId(i as u8))
    }

    pub fn container_ids(&self) -> impl Iterator<Item = ContainerId> + '_ {
        (0..self.containers.len()).map(|i| ContainerId(i as u8))
    }

    pub fn topic_ids(&self) -> impl Iterator<Item = TopicId> + '_ {
        (0..self.topics.len()).map(|i| TopicId(i as u8))
    }

    pub fn phrase_ids(&self) -> impl Iterator<Item = PhraseId> + '_ {
        (0..self.phrase_count()).map(|i| PhraseId(i as u8))
    }
}

fn dup_check<'a>(issues: &mut Vec<String>, field: &str, names: impl Iterator<Item = &'a str>) {
    let mut seen: Vec<&str> = Vec::new();
    for n in names {
        if seen.iter().any(|s| s.eq_ignore_ascii_case(n)) {
            issues.push(format!("{field}: duplicate name {n:?}"));
        }
        seen.push(n);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;

    #[test]
    fn builtin_contexts_all_validate() {
        let pool = builtin::builtin_contexts();
        assert!(pool.len() >= 20, "curated pool has {} entries", pool.len());
        for ctx in &pool {
            ctx.validate().expect("curated context validates");
            assert!(ctx.people.len() >= 4);
            assert!(ctx.containers.len() >= 3);
            assert!(ctx.topics.len() >= 3);
            assert!(!ctx.visible_updates.is_empty());
            assert!(!ctx.invisible_updates.is_empty());
        }
    }

    #[test]
    fn single_container_rejected() {
        let mut ctx = builtin::builtin_contexts()[0].clone();
        ctx.containers.truncate(1);
        let err = ctx.validate().unwrap_err();
        assert!(
            err.issues.iter().any(|i| i.contains("containers")),
            "issues: {:?}",
            err.issues
        );
    }

    #[test]
    fn duplicate_and_cross_category_names_rejected() {
        let mut ctx = builtin::builtin_contexts()[0].clone();
        ctx.topics[0] = ctx.topics[1].clone();
        ctx.containers[0] = ctx.rooms[0].clone();
        let err = ctx.validate().unwrap_err();
        assert!(err.issues.iter().any(|i| i.contains("topics")));
        assert!(err.issues.iter().any(|i| i.contains("collides")));
    }

    #[test]
    fn json_round_trip_preserves_context() {
        let ctx = builtin::builtin_contexts()[3].clone();
        let json = ctx.to_json();
        let back = StoryContext::from_json(&json).unwrap();
        assert_eq!(ctx, back);
    }

    #[test]
    fn malformed_json_reports_validation_error() {
        let err = StoryContext::from_json("{\"people\": []").unwrap_err();
        assert!(err.issues[0].starts_with("json:"));
    }
}
