//! Answer oracles and the grading rule.
//!
//! An oracle is anything that can answer a story question with free text:
//! the `perfect` oracle echoes the gold answer; `literal` answers every
//! question from the current true world state (ignoring beliefs and memory
//! anchors — an omniscient tracker with no theory of mind); `recency`
//! answers location questions with the location mentioned latest in the
//! story text and says "yes" to everything binary; `remote:<model>@<url>`
//! forwards to an HTTP chat-completions endpoint. Responses are graded
//! leniently but deterministically, and per-(oracle, story, question)
//! responses can be cached concurrently.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::context::StoryContext;
use crate::question::{QAItem, QuestionCategory, QuestionOrder, TemplateId};
use crate::remote::RemoteOracle;
use crate::render::render_story;
use crate::state::{FactKey, StoryState, Value};

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Error)]
pub enum OracleError {
    /// Accuracy over zero questions is undefined, never silently 0 or 1.
    #[error("no questions to score after filtering")]
    NoQuestions,
    #[error("unknown oracle spec {0:?} (expected \"perfect\", \"literal\", \"recency\", or \"remote:<model>@<url>\")")]
    UnknownSpec(String),
    #[error("remote oracle failed after {attempts} attempt(s): {message}")]
    Remote { attempts: u32, message: String },
}

// ---------------------------------------------------------------------------
// Grading
// ---------------------------------------------------------------------------

/// A graded response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GradedAnswer {
    pub raw: String,
    pub normalized: String,
    pub correct: bool,
    /// The response normalized to nothing at all; always graded incorrect.
    pub empty_response: bool,
}

/// Lowercases, strips punctuation, and collapses whitespace.
pub fn normalize(text: &str) -> String {
    let lowered: String = text
        .chars()
        .map(|c| {
            if c.is_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                ' '
            }
        })
        .collect();
    lowered.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn tokens(normalized: &str) -> Vec<&str> {
    normalized.split(' ').filter(|t| !t.is_empty()).collect()
}

/// Whether `needle`'s tokens appear as a contiguous run inside `haystack`'s.
fn contains_tokens(haystack: &[&str], needle: &[&str]) -> bool {
    !needle.is_empty()
        && (needle.len() <= haystack.len())
        && haystack.windows(needle.len()).any(|w| w == needle)
}

/// Grades a free-text response against a gold answer.
///
/// Both sides are normalized. A `yes`/`no` gold is matched against the first
/// polarity token in the response (so "No, she left." is a valid "no", while
/// "yes and no" answers "yes"). Any other gold must appear as a contiguous
/// token run inside the response.
pub fn grade(gold: &str, response: &str) -> GradedAnswer {
    let normalized = normalize(response);
    let gold_norm = normalize(gold);
    let empty = normalized.is_empty();
    let correct = !empty
        && match gold_norm.as_str() {
            "yes" | "no" => tokens(&normalized)
                .iter()
                .find(|t| **t == "yes" || **t == "no")
                .is_some_and(|t| *t == gold_norm),
            _ => contains_tokens(&tokens(&normalized), &tokens(&gold_norm)),
        };
    GradedAnswer {
        raw: response.to_string(),
        normalized,
        correct,
        empty_response: empty,
    }
}

/// Grading with the question's closed answer set. When a response names two
/// or more different candidate answers, plain containment would accept
/// hedged answers like "not in the basket but in the box" for either gold;
/// here such a response only counts for the candidate mentioned last.
pub(crate) fn grade_with_candidates(
    gold: &str,
    response: &str,
    candidates: &[&str],
) -> GradedAnswer {
    let mut graded = grade(gold, response);
    if !graded.correct {
        return graded;
    }
    let response_tokens = tokens(&graded.normalized);
    let normalized_candidates: Vec<String> = candidates.iter().map(|c| normalize(c)).collect();
    // Find, for each candidate, the start of its last mention.
    let mut last_mentions: Vec<(usize, usize)> = Vec::new(); // (position, candidate idx)
    for (ci, cand) in normalized_candidates.iter().enumerate() {
        let cand_tokens = tokens(cand);
        if cand_tokens.is_empty() || cand_tokens.len() > response_tokens.len() {
            continue;
        }
        let last = (0..=response_tokens.len() - cand_tokens.len())
            .rev()
            .find(|&i| &response_tokens[i..i + cand_tokens.len()] == cand_tokens.as_slice());
        if let Some(pos) = last {
            last_mentions.push((pos, ci));
        }
    }
    // Drop candidates whose mention is just part of a longer candidate's
    // mention (e.g. "bin" inside "bread bin") by preferring, at equal
    // positions, the longest.
    if last_mentions.len() >= 2 {
        let gold_norm = normalize(gold);
        let winner = last_mentions
            .iter()
            .max_by_key(|&&(pos, ci)| (pos, normalized_candidates[ci].len()))
            .map(|&(_, ci)| normalized_candidates[ci].clone());
        if winner.as_deref() != Some(gold_norm.as_str()) {
            graded.correct = false;
        }
    }
    graded
}

/// Grades a response to a generated question, using the question's category
/// to pick the candidate answer set.
pub fn grade_item(ctx: &StoryContext, item: &QAItem, response: &str) -> GradedAnswer {
    match item.category {
        QuestionCategory::Room => {
            let names: Vec<&str> = ctx.rooms.iter().map(String::as_str).collect();
            grade_with_candidates(&item.gold, response, &names)
        }
        QuestionCategory::Container => {
            let names: Vec<&str> = ctx.containers.iter().map(String::as_str).collect();
            grade_with_candidates(&item.gold, response, &names)
        }
        QuestionCategory::YesNo | QuestionCategory::KnowsAbout => grade(&item.gold, response),
    }
}

// ---------------------------------------------------------------------------
// The oracle interface
// ---------------------------------------------------------------------------

/// Anything that can answer story questions.
pub trait Oracle: Send + Sync {
    /// Stable identity used in cache keys and reports.
    fn spec(&self) -> String;
    /// Answers one question about one story.
    ///
    /// # Errors
    ///
    /// Only transport-like failures error; a wrong answer is just a wrong
    /// answer.
    fn answer(&self, story_text: &str, state: &StoryState, item: &QAItem)
        -> Result<String, OracleError>;
}

/// Builds an oracle from its textual spec.
///
/// # Errors
///
/// [`OracleError::UnknownSpec`] when the spec matches no known kind.
pub fn parse_oracle_spec(spec: &str) -> Result<Box<dyn Oracle>, OracleError> {
    match spec {
        "perfect" => Ok(Box::new(PerfectOracle)),
        "literal" | "omniscient-literal" => Ok(Box::new(LiteralOracle)),
        "recency" | "recency-heuristic" => Ok(Box::new(RecencyOracle)),
        other => {
            if let Some(rest) = other.strip_prefix("remote:") {
                if let Some((model, url)) = rest.split_once('@') {
                    if !model.is_empty() && !url.is_empty() {
                        return Ok(Box::new(RemoteOracle::new(model, url)));
                    }
                }
            }
            Err(OracleError::UnknownSpec(other.to_string()))
        }
    }
}

/// Echoes the gold answer; the ceiling every other oracle is measured
/// against.
pub struct PerfectOracle;

impl Oracle for PerfectOracle {
    fn spec(&self) -> String {
        "perfect".into()
    }

    fn answer(&self, _: &str, _: &StoryState, item: &QAItem) -> Result<String, OracleError> {
        Ok(item.gold.clone())
    }
}

/// Answers every question from the current true world state: perfect world
/// tracking, no perspective tracking, no memory. Fails exactly on questions
/// whose gold diverges from the present world.
pub struct LiteralOracle;

impl LiteralOracle {
    fn topic_of(ctx: &StoryContext, question: &str) -> Option<FactKey> {
        ctx.topic_ids()
            .find(|&t| question.contains(ctx.topic_name(t)))
            .map(FactKey::TopicKnown)
    }

    fn phrase_slot_of(ctx: &StoryContext, question: &str) -> Option<(FactKey, Value)> {
        ctx.phrase_ids()
            .find(|&p| question.contains(ctx.phrase_text(p)))
            .map(|p| {
                let key = if ctx.phrase_is_visible(p) {
                    FactKey::VisibleState
                } else {
                    FactKey::InvisibleState
                };
                (key, Value::Phrase(p))
            })
    }
}

impl Oracle for LiteralOracle {
    fn spec(&self) -> String {
        "literal".into()
    }

    fn answer(&self, _: &str, state: &StoryState, item: &QAItem) -> Result<String, OracleError> {
        let ctx = state.context();
        let text = match item.template_id {
            TemplateId::TopicKnowledgeFirst | TemplateId::TopicKnowledgeSecond => {
                match Self::topic_of(ctx, &item.question) {
                    Some(key) => {
                        let known = state.world(key) == Value::Bool(true);
                        if item.template_id == TemplateId::TopicKnowledgeFirst {
                            if known { "yes" } else { "no" }.into()
                        } else if known {
                            "knows about it".into()
                        } else {
                            "does not know about it".into()
                        }
                    }
                    None => "unknown".into(),
                }
            }
            TemplateId::StateBeliefFirst | TemplateId::StateBeliefSecond => {
                match Self::phrase_slot_of(ctx, &item.question) {
                    Some((key, phrase)) => {
                        if state.world(key) == phrase {
                            "yes".into()
                        } else {
                            "no".into()
                        }
                    }
                    None => "unknown".into(),
                }
            }
            _ => match item.category {
                QuestionCategory::Room => state.world(FactKey::ObjectRoom).render(ctx),
                QuestionCategory::Container => state.world(FactKey::ObjectContainer).render(ctx),
                QuestionCategory::YesNo | QuestionCategory::KnowsAbout => "unknown".into(),
            },
        };
        Ok(text)
    }
}

/// Answers location questions with the location mentioned latest in the
/// story text, and all binary questions with "yes". A pure surface reader.
pub struct RecencyOracle;

impl RecencyOracle {
    fn last_mention(text: &str, names: impl Iterator<Item = String>) -> Option<String> {
        names
            .filter_map(|name| text.rfind(&name).map(|pos| (pos, name)))
            .max_by_key(|(pos, name)| (*pos, name.len()))
            .map(|(_, name)| name)
    }
}

impl Oracle for RecencyOracle {
    fn spec(&self) -> String {
        "recency".into()
    }

    fn answer(&self, story_text: &str, state: &StoryState, item: &QAItem)
        -> Result<String, OracleError> {
        let ctx = state.context();
        let text = match item.category {
            QuestionCategory::Room => Self::last_mention(
                story_text,
                ctx.room_ids().map(|r| ctx.room_name(r).to_string()),
            )
            .unwrap_or_else(|| ctx.room_name(ctx.main_room()).to_string()),
            QuestionCategory::Container => Self::last_mention(
                story_text,
                ctx.container_ids().map(|c| ctx.container_name(c).to_string()),
            )
            .unwrap_or_else(|| "nowhere".to_string()),
            QuestionCategory::YesNo => "yes".to_string(),
            QuestionCategory::KnowsAbout => "knows about it".to_string(),
        };
        Ok(text)
    }
}

// ---------------------------------------------------------------------------
// Accuracy
// ---------------------------------------------------------------------------

/// Which questions count toward an accuracy figure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionFilter {
    All,
    #[serde(alias = "first-order")]
    FirstOrder,
    Interesting,
    Uninteresting,
}

impl QuestionFilter {
    pub fn keep(self, item: &QAItem) -> bool {
        match self {
            QuestionFilter::All => true,
            QuestionFilter::FirstOrder => item.order == QuestionOrder::First,
            QuestionFilter::Interesting => item.interesting,
            QuestionFilter::Uninteresting => !item.interesting,
        }
    }
}

/// A concurrency-safe response cache keyed by (oracle spec, story text,
/// question text). The story is interned per call, so entries share one
/// allocation of the text.
/// Cache key: oracle spec, interned story text, question text.
type CacheKey = (String, Arc<str>, String);

#[derive(Default)]
pub struct OracleCache {
    map: Mutex<HashMap<CacheKey, String>>,
}

impl OracleCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get(&self, key: &(String, Arc<str>, String)) -> Option<String> {
        self.map.lock().expect("cache lock").get(key).cloned()
    }

    fn put(&self, key: (String, Arc<str>, String), value: String) {
        self.map.lock().expect("cache lock").insert(key, value);
    }
}

/// One story's text and the per-question verdicts behind an accuracy figure.
#[derive(Debug, Clone)]
pub struct ScoredStory {
    pub story_text: String,
    /// (question index into the caller's item slice, graded response).
    pub verdicts: Vec<(usize, GradedAnswer)>,
    pub accuracy: f64,
}

/// Scores an oracle on the filtered questions of one story, returning the
/// fraction answered correctly.
///
/// # Errors
///
/// [`OracleError::NoQuestions`] when the filter leaves nothing to score
/// (accuracy would be undefined); remote failures propagate.
pub fn oracle_accuracy(
    oracle: &dyn Oracle,
    state: &StoryState,
    items: &[QAItem],
    filter: QuestionFilter,
    cache: &OracleCache,
) -> Result<f64, OracleError> {
    score_story(oracle, state, items, filter, cache).map(|s| s.accuracy)
}

/// Like [`oracle_accuracy`], but keeps every graded response.
///
/// # Errors
///
/// Same conditions as [`oracle_accuracy`].
pub fn score_story(
    oracle: &dyn Oracle,
    state: &StoryState,
    items: &[QAItem],
    filter: QuestionFilter,
    cache: &OracleCache,
) -> Result<ScoredStory, OracleError> {
    let story_text = render_story(state);
    let story_key: Arc<str> = Arc::from(story_text.as_str());
    let spec = oracle.spec();
    let ctx = state.context();

    let mut verdicts = Vec::new();
    let mut correct = 0usize;
    for (i, item) in items.iter().enumerate() {
        if !filter.keep(item) {
            continue;
        }
        let key = (spec.clone(), story_key.clone(), item.question.clone());
        let response = match cache.get(&key) {
            Some(hit) => hit,
            None => {
                let fresh = oracle.answer(&story_text, state, item)?;
                cache.put(key, fresh.clone());
                fresh
            }
        };
        let graded = grade_item(ctx, item, &response);
        if graded.correct {
            correct += 1;
        }
        verdicts.push((i, graded));
    }
    if verdicts.is_empty() {
        return Err(OracleError::NoQuestions);
    }
    Ok(ScoredStory {
        story_text,
        accuracy: correct as f64 / verdicts.len() as f64,
        verdicts,
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{apply, ActionBody, ActionInstance};
    use crate::builtin::{sample_builtin, ContextParams};
    use crate::context::{ContainerId, PersonId, RoomId};
    use crate::question::generate_questions;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    #[test]
    fn grading_matches_the_pinned_examples() {
        // Entity answers: containment after normalization.
        assert!(grade("metal filing cabinet", "the metal filing cabinet.").correct);
        assert!(
            grade(
                "metal filing cabinet",
                "david will search for it in the metal filing cabinet."
            )
            .correct
        );
        assert!(
            !grade(
                "wooden chest",
                "sarah will search for the prototype model in the metal filing cabinet."
            )
            .correct
        );
        assert!(!grade("basket", "the box").correct);
        // Polarity answers: first yes/no token decides.
        assert!(grade("yes", "Yes.").correct);
        assert!(grade("no", "No, she left earlier.").correct);
        assert!(!grade("no", "yes and no").correct);
        assert!(grade("yes", "I think that yes, she does.").correct);
        assert!(!grade("yes", "she does").correct, "no polarity token at all");
        // Case and punctuation do not matter.
        assert!(grade("Bread Bin", "BREAD, bin!").correct);
        // Token boundaries do: "binder" does not contain "bin".
        assert!(!grade("bin", "the binder").correct);
    }

    #[test]
    fn empty_responses_are_flagged_and_incorrect() {
        let graded = grade("yes", "  ... ");
        assert!(!graded.correct);
        assert!(graded.empty_response);
        assert!(!grade("yes", "yes").empty_response);
    }

    #[test]
    fn hedged_answers_only_count_for_the_last_candidate() {
        let candidates = ["wicker basket", "bread bin"];
        let hedged = "not in the wicker basket but in the bread bin";
        assert!(grade_with_candidates("bread bin", hedged, &candidates).correct);
        assert!(
            !grade_with_candidates("wicker basket", hedged, &candidates).correct,
            "containment alone would wrongly accept this"
        );
        // A response naming one candidate is unaffected.
        assert!(grade_with_candidates("wicker basket", "the wicker basket", &candidates).correct);
    }

    fn transfer_story() -> crate::state::StoryState {
        let ctx = sample_builtin(
            0,
            &ContextParams {
                people: 3,
                containers: 2,
                topics: 2,
            },
        )
        .unwrap();
        let mut s = crate::state::StoryState::init(Arc::new(ctx)).unwrap();
        for action in [
            ActionInstance::new(PersonId(0), ActionBody::Enter { room: RoomId(0) }),
            ActionInstance::new(PersonId(1), ActionBody::Enter { room: RoomId(0) }),
            ActionInstance::new(PersonId(0), ActionBody::MoveObjContainer {
                container: ContainerId(0),
            }),
            ActionInstance::new(PersonId(1), ActionBody::Leave { room: RoomId(0) }),
            ActionInstance::new(PersonId(0), ActionBody::MoveObjContainer {
                container: ContainerId(1),
            }),
        ] {
            s = apply(&s, action).unwrap();
        }
        s
    }

    #[test]
    fn perfect_oracle_scores_one_on_everything() {
        let s = transfer_story();
        let items = generate_questions(&s);
        let cache = OracleCache::new();
        for filter in [
            QuestionFilter::All,
            QuestionFilter::FirstOrder,
            QuestionFilter::Interesting,
            QuestionFilter::Uninteresting,
        ] {
            let acc = oracle_accuracy(&PerfectOracle, &s, &items, filter, &cache).unwrap();
            assert_eq!(acc, 1.0, "{filter:?}");
        }
    }

    #[test]
    fn literal_oracle_fails_exactly_on_divergent_beliefs() {
        let s = transfer_story();
        let items = generate_questions(&s);
        let cache = OracleCache::new();
        let scored =
            score_story(&LiteralOracle, &s, &items, QuestionFilter::All, &cache).unwrap();
        for (idx, graded) in &scored.verdicts {
            let item = &items[*idx];
            let expected = match item.order {
                // World questions about the present are its home turf.
                crate::question::QuestionOrder::GroundTruth => true,
                // It ignores the memory anchor and answers with the present.
                crate::question::QuestionOrder::Memory => {
                    item.gold == "kitchen" || item.gold == "bread bin"
                }
                _ => !item.false_belief,
            };
            assert_eq!(
                graded.correct, expected,
                "{:?} (gold {:?}) answered {:?}",
                item.question, item.gold, graded.raw
            );
        }
        let acc =
            oracle_accuracy(&LiteralOracle, &s, &items, QuestionFilter::FirstOrder, &cache)
                .unwrap();
        assert!(acc < 1.0, "Beth's stale belief must cost it, got {acc}");
    }

    #[test]
    fn recency_oracle_reads_the_surface() {
        let s = transfer_story();
        let items = generate_questions(&s);
        let cache = OracleCache::new();
        let scored =
            score_story(&RecencyOracle, &s, &items, QuestionFilter::All, &cache).unwrap();
        // The last container mentioned is the bread bin, the only room ever
        // mentioned is the kitchen.
        for (idx, graded) in &scored.verdicts {
            let item = &items[*idx];
            let expected = match item.category {
                QuestionCategory::Room => item.gold == "kitchen",
                QuestionCategory::Container => item.gold == "bread bin",
                _ => item.gold == "yes",
            };
            assert_eq!(graded.correct, expected, "{:?}", item.question);
        }
    }

    struct CountingOracle(AtomicUsize);

    impl Oracle for CountingOracle {
        fn spec(&self) -> String {
            "counting".into()
        }
        fn answer(&self, _: &str, _: &StoryState, item: &QAItem) -> Result<String, OracleError> {
            self.0.fetch_add(1, Ordering::SeqCst);
            Ok(item.gold.clone())
        }
    }

    #[test]
    fn cache_prevents_repeat_oracle_calls() {
        let s = transfer_story();
        let items = generate_questions(&s);
        let cache = OracleCache::new();
        let oracle = CountingOracle(AtomicUsize::new(0));
        let first = score_story(&oracle, &s, &items, QuestionFilter::All, &cache).unwrap();
        let calls_after_first = oracle.0.load(Ordering::SeqCst);
        assert_eq!(calls_after_first, first.verdicts.len());
        let second = score_story(&oracle, &s, &items, QuestionFilter::All, &cache).unwrap();
        assert_eq!(oracle.0.load(Ordering::SeqCst), calls_after_first);
        assert_eq!(first.accuracy, second.accuracy);
        // A different oracle spec misses the cache.
        let other = CountingOracle(AtomicUsize::new(0));
        struct Renamed<'a>(&'a CountingOracle);
        impl Oracle for Renamed<'_> {
            fn spec(&self) -> String {
                "counting-b".into()
            }
            fn answer(&self, t: &str, s: &StoryState, i: &QAItem) -> Result<String, OracleError> {
                self.0.answer(t, s, i)
            }
        }
        score_story(&Renamed(&other), &s, &items, QuestionFilter::All, &cache).unwrap();
        assert_eq!(other.0.load(Ordering::SeqCst), calls_after_first);
    }

    #[test]
    fn zero_questions_is_an_error_not_a_score() {
        let s = transfer_story();
        let cache = OracleCache::new();
        let err = oracle_accuracy(&PerfectOracle, &s, &[], QuestionFilter::All, &cache)
            .unwrap_err();
        assert!(matches!(err, OracleError::NoQuestions));
    }

    #[test]
    fn oracle_specs_parse_and_reject() {
        assert_eq!(parse_oracle_spec("perfect").unwrap().spec(), "perfect");
        assert_eq!(parse_oracle_spec("literal").unwrap().spec(), "literal");
        assert_eq!(
            parse_oracle_spec("omniscient-literal").unwrap().spec(),
            "literal"
        );
        assert_eq!(parse_oracle_spec("recency").unwrap().spec(), "recency");
        assert_eq!(
            parse_oracle_spec("recency-heuristic").unwrap().spec(),
            "recency"
        );
        let remote = parse_oracle_spec("remote:small-model@http://localhost:9/v1/chat").unwrap();
        assert_eq!(remote.spec(), "remote:small-model@http://localhost:9/v1/chat");
        for bad in ["", "psychic", "remote:", "remote:model", "remote:@url"] {
            assert!(parse_oracle_spec(bad).is_err(), "{bad:?}");
        }
    }
}
