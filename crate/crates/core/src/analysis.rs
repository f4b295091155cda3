//! Statistical studies, baseline comparisons, and dataset serialization.
//!
//! Three analyses back the engine's claims: a random-sampling study that
//! measures how often uniformly sampled stories require belief tracking at
//! all, a head-to-head comparison of the best-first search against plain
//! overgenerate-and-filter under an equal evaluation budget, and an
//! accuracy breakdown over the interesting/uninteresting question split.
//! Datasets round-trip through a line-oriented JSON format whose records
//! carry enough context to re-derive their own gold answers.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{
    apply, apply_transient, enumerate_valid_actions_into, ActionInstance, ActionKind,
};
use crate::builtin::{sample_builtin, ContextParams};
use crate::context::StoryContext;
use crate::oracle::{grade_item, score_story, Oracle, OracleCache, OracleError, QuestionFilter};
use crate::question::{generate_questions, requires_tom, QAItem, QuestionCategory, QuestionOrder, TemplateId};
use crate::render::{parse_action_line, render_action, render_story};
use crate::search::{is_desired, mix_seed, search, DesiredSpec, FoundStory, SearchConfig, SearchError};
use crate::state::StoryState;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(
        "sampling exhausted for setting (people={people}, movements={movements}, \
         max_actions={max_actions}) after {attempts} attempts"
    )]
    SamplingExhausted {
        people: usize,
        movements: usize,
        max_actions: usize,
        attempts: usize,
    },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("record on line {line} is invalid: {message}")]
    BadRecord { line: usize, message: String },
}

// ---------------------------------------------------------------------------
// Random-sampling study
// ---------------------------------------------------------------------------

/// One cell of the study grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudySetting {
    /// Cast size available to the sampler.
    pub people: usize,
    /// Exact number of container-move actions per accepted story.
    pub movements: usize,
    pub max_actions: usize,
}

/// Measured fractions for one setting, with 95% normal-approximation
/// half-widths (`1.96 · sqrt(p(1−p)/n)`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RandomStudyReport {
    pub setting: StudySetting,
    pub samples: usize,
    /// Number of (story, belief-question) pairs measured — the population
    /// for the two per-question probabilities below.
    pub question_pairs: usize,
    /// Fraction of stories with at least one perspective-discriminating
    /// belief question.
    pub p_requires_tom: f64,
    pub ci_requires_tom: f64,
    /// Fraction of belief-question pairs that are interesting.
    pub p_interesting_question: f64,
    pub ci_interesting_question: f64,
    /// Fraction of belief-question pairs whose gold answer differs from the
    /// current world state.
    pub p_false_belief_triple: f64,
    pub ci_false_belief_triple: f64,
}

fn half_width(p: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        1.96 * (p * (1.0 - p) / n as f64).sqrt()
    }
}

const SAMPLE_ATTEMPT_CAP: usize = 100_000;

/// Draws one story: length uniform in `[1, max_actions]`, each step uniform
/// over the valid actions, accepted only when it has exactly
/// `setting.movements` container moves. The cast size only fixes who is
/// available; chance decides who actually appears. Walks that can no longer
/// reach the exact move count abort early, which leaves the accepted
/// distribution unchanged.
fn try_sample_story(
    ctx: &Arc<StoryContext>,
    setting: &StudySetting,
    kinds: &[ActionKind],
    rng: &mut ChaCha8Rng,
    options: &mut Vec<ActionInstance>,
) -> Option<StoryState> {
    let target_len = rng.random_range(1..=setting.max_actions);
    let mut state = StoryState::init(ctx.clone()).ok()?;
    let mut moves = 0usize;
    for step in 0..target_len {
        enumerate_valid_actions_into(&state, kinds, false, options);
        if options.is_empty() {
            return None;
        }
        let action = options[rng.random_range(0..options.len())];
        if action.kind() == ActionKind::MoveObjContainer {
            moves += 1;
            if moves > setting.movements {
                return None;
            }
        }
        state = apply(&state, action).expect("enumerated actions apply");
        // Each remaining step can add at most one move.
        if setting.movements - moves > target_len - step - 1 {
            return None;
        }
    }
    (moves == setting.movements).then_some(state)
}

/// Rejection-samples one accepted story for `setting`, or fails after
/// [`SAMPLE_ATTEMPT_CAP`] attempts.
pub fn sample_study_story(
    ctx: &Arc<StoryContext>,
    setting: &StudySetting,
    kinds: &[ActionKind],
    rng: &mut ChaCha8Rng,
) -> Result<StoryState, AnalysisError> {
    let mut options = Vec::new();
    // Whoever makes the first move must enter the scene beforehand: no
    // story shorter than movements + 1 can be accepted.
    if setting.movements < setting.max_actions {
        for _ in 0..SAMPLE_ATTEMPT_CAP {
            if let Some(state) = try_sample_story(ctx, setting, kinds, rng, &mut options) {
                return Ok(state);
            }
        }
    }
    Err(AnalysisError::SamplingExhausted {
        people: setting.people,
        movements: setting.movements,
        max_actions: setting.max_actions,
        attempts: SAMPLE_ATTEMPT_CAP,
    })
}

#[derive(Default, Clone, Copy)]
struct SampleCounts {
    requires_tom: usize,
    belief_questions: usize,
    interesting: usize,
    false_belief: usize,
}

/// Runs the random-sampling study: `n` accepted stories per setting,
/// sampled with the given action vocabulary (typically
/// [`ActionKind::MOVEMENT_PRIMITIVES`]), measuring how often chance alone
/// produces stories and questions that exercise belief tracking.
///
/// Deterministic for a given seed; samples draw from the built-in context
/// pool with the cast trimmed to `setting.people` and three containers.
/// Three containers keep relocation destinations varied: with only two,
/// the object ping-pongs between them, so a stale belief from an
/// even-numbered move ago coincides with the truth again and belief
/// divergence is systematically undercounted at odd movement counts.
///
/// # Errors
///
/// [`AnalysisError::InvalidParams`] for `n < 100` or an empty settings
/// list; [`AnalysisError::SamplingExhausted`] when a setting's exact
/// counts are unreachable.
pub fn random_study(
    kinds: &[ActionKind],
    settings: &[StudySetting],
    n: usize,
    seed: u64,
) -> Result<Vec<RandomStudyReport>, AnalysisError> {
    if n < 100 {
        return Err(AnalysisError::InvalidParams(format!(
            "need at least 100 samples per setting for stable estimates, got {n}"
        )));
    }
    if settings.is_empty() {
        return Err(AnalysisError::InvalidParams(
            "no study settings given".to_string(),
        ));
    }
    if kinds.is_empty() {
        return Err(AnalysisError::InvalidParams(
            "action vocabulary is empty".to_string(),
        ));
    }
    let mut reports = Vec::with_capacity(settings.len());
    for (s_idx, setting) in settings.iter().enumerate() {
        let params = ContextParams {
            people: setting.people,
            containers: 3,
            topics: 2,
        };
        let per_sample: Result<Vec<SampleCounts>, AnalysisError> = (0..n)
            .into_par_iter()
            .map(|i| {
                let salt = ((s_idx as u64) << 40) ^ i as u64;
                let derived = mix_seed(seed, salt);
                let ctx = Arc::new(
                    sample_builtin(derived, &params)
                        .map_err(|e| AnalysisError::InvalidParams(e.to_string()))?,
                );
                let mut rng = ChaCha8Rng::seed_from_u64(derived);
                let story = sample_study_story(&ctx, setting, kinds, &mut rng)?;
                let items = generate_questions(&story);
                // Only belief questions can be interesting or encode a false
                // belief, so they are the population the two per-question
                // probabilities are measured over.
                Ok(SampleCounts {
                    requires_tom: usize::from(requires_tom(&items)),
                    belief_questions: items.iter().filter(|q| q.is_tom()).count(),
                    interesting: items.iter().filter(|q| q.interesting).count(),
                    false_belief: items.iter().filter(|q| q.false_belief).count(),
                })
            })
            .collect();
        let mut total = SampleCounts::default();
        for c in per_sample? {
            total.requires_tom += c.requires_tom;
            total.belief_questions += c.belief_questions;
            total.interesting += c.interesting;
            total.false_belief += c.false_belief;
        }
        let p_tom = total.requires_tom as f64 / n as f64;
        let p_int = total.interesting as f64 / total.belief_questions.max(1) as f64;
        let p_fb = total.false_belief as f64 / total.belief_questions.max(1) as f64;
        reports.push(RandomStudyReport {
            setting: *setting,
            samples: n,
            question_pairs: total.belief_questions,
            p_requires_tom: p_tom,
            ci_requires_tom: half_width(p_tom, n),
            p_interesting_question: p_int,
            ci_interesting_question: half_width(p_int, total.belief_questions),
            p_false_belief_triple: p_fb,
            ci_false_belief_triple: half_width(p_fb, total.belief_questions),
        });
    }
    Ok(reports)
}

/// Renders study reports as an aligned plain-text table.
pub fn study_table(reports: &[RandomStudyReport]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:>6} {:>9} {:>11} {:>7} {:>11} {:>20} {:>20} {:>20}\n",
        "people",
        "movements",
        "max_actions",
        "samples",
        "belief_qs",
        "p_requires_tom",
        "p_interesting_q",
        "p_false_belief"
    ));
    for r in reports {
        out.push_str(&format!(
            "{:>6} {:>9} {:>11} {:>7} {:>11} {:>13.3} ±{:.3} {:>13.3} ±{:.3} {:>13.3} ±{:.3}\n",
            r.setting.people,
            r.setting.movements,
            r.setting.max_actions,
            r.samples,
            r.question_pairs,
            r.p_requires_tom,
            r.ci_requires_tom,
            r.p_interesting_question,
            r.ci_interesting_question,
            r.p_false_belief_triple,
            r.ci_false_belief_triple,
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Search vs. overgenerate-and-filter
// ---------------------------------------------------------------------------

/// Knobs for [`baseline_compare`]. Both arms receive `eval_budget` story
/// evaluations and deliver at most `stories` stories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub eval_budget: usize,
    pub stories: usize,
    pub question_filter: QuestionFilter,
    pub action_kinds: Vec<ActionKind>,
    pub allow_asymmetry: bool,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            eval_budget: 2500,
            stories: 10,
            question_filter: QuestionFilter::FirstOrder,
            action_kinds: ActionKind::ALL.to_vec(),
            allow_asymmetry: true,
            seed: 0,
        }
    }
}

/// One arm's delivered dataset. Means are absent when the arm found
/// nothing — reported, not fatal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArmReport {
    pub stories: usize,
    pub mean_g: Option<f64>,
    pub mean_length: Option<f64>,
    pub evals_spent: usize,
}

fn arm_report(kept: &[(f64, usize)], evals_spent: usize) -> ArmReport {
    let n = kept.len();
    ArmReport {
        stories: n,
        mean_g: (n > 0).then(|| kept.iter().map(|(g, _)| g).sum::<f64>() / n as f64),
        mean_length: (n > 0).then(|| kept.iter().map(|(_, l)| *l as f64).sum::<f64>() / n as f64),
        evals_spent,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineComparison {
    pub seed: u64,
    pub eval_budget: usize,
    pub best_first: ArmReport,
    pub overgenerate: ArmReport,
}

/// Pits the best-first search against uniform overgeneration under the
/// same evaluation budget. The search arm spends its budget steering; the
/// baseline arm evaluates `eval_budget` uniformly sampled desired stories
/// and keeps the lowest-accuracy `stories` of them.
///
/// # Errors
///
/// Parameter validation and oracle transport failures. An arm that finds
/// nothing yields an empty [`ArmReport`] instead of an error.
pub fn baseline_compare(
    ctx: &Arc<StoryContext>,
    oracle: &dyn Oracle,
    spec: &DesiredSpec,
    config: &BaselineConfig,
) -> Result<BaselineComparison, AnalysisError> {
    if config.stories == 0 || config.eval_budget < config.stories {
        return Err(AnalysisError::InvalidParams(format!(
            "eval_budget ({}) must cover the requested stories ({})",
            config.eval_budget, config.stories
        )));
    }
    spec.validate(Some(ctx))?;

    // Arm A: best-first search, budget split evenly across stories.
    let search_config = SearchConfig {
        node_eval_budget: (config.eval_budget / config.stories).max(1),
        stories_requested: config.stories,
        question_filter: config.question_filter,
        seed: config.seed,
        action_kinds: config.action_kinds.clone(),
        allow_asymmetry: config.allow_asymmetry,
        ..SearchConfig::default()
    };
    let outcome = search(ctx, oracle, spec, &search_config)?;
    let found: Vec<(f64, usize)> = outcome
        .stories
        .iter()
        .map(|s| (s.g, s.actions.len()))
        .collect();
    let best_first = arm_report(&found, outcome.budget_spent);

    // Arm B: uniform overgeneration, filter to desired, evaluate, keep the
    // hardest. Generation itself is free; only evaluations count.
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, 0xB00));
    let cache = OracleCache::new();
    let mut options = Vec::new();
    let mut evaluated: Vec<(f64, usize)> = Vec::new();
    let mut evals = 0usize;
    let mut dry_spells = 0usize;
    'outer: while evals < config.eval_budget {
        let target_len = rng.random_range(1..=spec.max_actions);
        let mut state = StoryState::init(ctx.clone()).expect("context validated");
        for _ in 0..target_len {
            enumerate_valid_actions_into(
                &state,
                &config.action_kinds,
                config.allow_asymmetry,
                &mut options,
            );
            if options.is_empty() {
                break;
            }
            let action = options[rng.random_range(0..options.len())];
            state = apply(&state, action).expect("enumerated actions apply");
        }
        if !is_desired(&state, spec) {
            dry_spells += 1;
            if dry_spells > SAMPLE_ATTEMPT_CAP {
                break 'outer;
            }
            continue;
        }
        dry_spells = 0;
        let items = generate_questions(&state);
        let g = match score_story(oracle, &state, &items, config.question_filter, &cache) {
            Ok(s) => s.accuracy,
            Err(OracleError::NoQuestions) => 1.0,
            Err(e) => return Err(e.into()),
        };
        evals += 1;
        evaluated.push((g, state.actions().count()));
    }
    evaluated.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    evaluated.truncate(config.stories);
    let overgenerate = arm_report(&evaluated, evals);

    Ok(BaselineComparison {
        seed: config.seed,
        eval_budget: config.eval_budget,
        best_first,
        overgenerate,
    })
}

/// Renders a comparison as an aligned plain-text table.
pub fn comparison_table(cmp: &BaselineComparison) -> String {
    let fmt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.3}"));
    let mut out = format!(
        "{:<14} {:>7} {:>8} {:>9} {:>7}\n",
        "arm", "stories", "mean_g", "mean_len", "evals"
    );
    for (name, arm) in [
        ("best-first", &cmp.best_first),
        ("overgenerate", &cmp.overgenerate),
    ] {
        out.push_str(&format!(
            "{:<14} {:>7} {:>8} {:>9} {:>7}\n",
            name,
            arm.stories,
            fmt(arm.mean_g),
            fmt(arm.mean_length),
            arm.evals_spent
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Dataset records
// ---------------------------------------------------------------------------

/// Provenance stamped on every exported record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    /// Oracle specification the story was searched against.
    pub oracle: String,
    pub seed: u64,
    /// That oracle's accuracy on the story.
    pub g: f64,
    pub desired: DesiredSpec,
}

/// One (story, question, answer) triple, self-contained: the context and
/// canonical action lines are enough to re-derive the gold answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub context: StoryContext,
    /// Canonical action lines, one per action, in story order.
    pub actions: Vec<String>,
    /// Optional natural-prose rendering of the same actions.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub infilled: Option<String>,
    pub question: String,
    pub gold: String,
    pub category: QuestionCategory,
    pub order: QuestionOrder,
    pub interesting: bool,
    pub template_id: TemplateId,
    pub meta: RecordMeta,
}

impl DatasetRecord {
    /// Rebuilds the question item this record was exported from.
    /// `action_index` and `false_belief` are derived fields that grading
    /// does not consult, so they take neutral values.
    pub fn to_item(&self) -> QAItem {
        QAItem {
            question: self.question.clone(),
            gold: self.gold.clone(),
            category: self.category,
            order: self.order,
            interesting: self.interesting,
            template_id: self.template_id,
            action_index: None,
            false_belief: false,
        }
    }

    /// Replays the record's action lines against its context.
    ///
    /// # Errors
    ///
    /// A description of the first line that fails to parse or apply.
    pub fn replay(&self) -> Result<StoryState, String> {
        let ctx = Arc::new(self.context.clone());
        ctx.validate().map_err(|e| e.to_string())?;
        let mut state = StoryState::init(ctx.clone()).map_err(|e| e.to_string())?;
        for (i, line) in self.actions.iter().enumerate() {
            let action = parse_action_line(&ctx, line)
                .ok_or_else(|| format!("line {}: unrecognized action: {line}", i + 1))?;
            state = apply(&state, action)
                .map_err(|e| format!("line {}: invalid action: {e}", i + 1))?;
        }
        Ok(state)
    }
}

/// Expands one found story into records, one per generated question.
pub fn records_from_story(
    ctx: &StoryContext,
    story: &FoundStory,
    meta: &RecordMeta,
    infilled: Option<&str>,
) -> Vec<DatasetRecord> {
    let mut lines = Vec::with_capacity(story.actions.len());
    let mut cursor = StoryState::init(story.state.context().clone()).expect("context validated");
    for action in &story.actions {
        lines.push(render_action(&cursor, *action));
        cursor = apply_transient(&cursor, *action).expect("recorded history replays");
    }
    story
        .items
        .iter()
        .map(|q| DatasetRecord {
            context: ctx.clone(),
            actions: lines.clone(),
            infilled: infilled.map(str::to_string),
            question: q.question.clone(),
            gold: q.gold.clone(),
            category: q.category,
            order: q.order,
            interesting: q.interesting,
            template_id: q.template_id,
            meta: meta.clone(),
        })
        .collect()
}

/// Checks that a record is self-consistent: its actions replay, and
/// regenerating questions from the replayed story reproduces this record's
/// question with the same gold answer and flags.
///
/// # Errors
///
/// A human-readable description of the first inconsistency.
pub fn verify_record(record: &DatasetRecord) -> Result<(), String> {
    let state = record.replay()?;
    let items = generate_questions(&state);
    let item = items
        .iter()
        .find(|q| q.question == record.question)
        .ok_or_else(|| format!("question not derivable from story: {}", record.question))?;
    if item.gold != record.gold {
        return Err(format!(
            "gold mismatch for {:?}: stored {:?}, derived {:?}",
            record.question, record.gold, item.gold
        ));
    }
    if item.category != record.category
        || item.order != record.order
        || item.interesting != record.interesting
        || item.template_id != record.template_id
    {
        return Err(format!("metadata mismatch for {:?}", record.question));
    }
    Ok(())
}

/// Writes records as line-oriented JSON, atomically (fully written or not
/// at all), one record per line in input order.
///
/// # Errors
///
/// I/O failures.
pub fn write_jsonl(path: &Path, records: &[DatasetRecord]) -> Result<(), AnalysisError> {
    let mut body = String::new();
    for r in records {
        body.push_str(&serde_json::to_string(r).expect("records serialize"));
        body.push('\n');
    }
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = path.with_extension(format!("tmp.{}", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(body.as_bytes())?;
        f.sync_all()?;
    }
    if let Err(e) = std::fs::rename(&tmp, path) {
        let _ = std::fs::remove_file(&tmp);
        return Err(e.into());
    }
    if let Some(dir) = dir {
        // Persist the rename itself.
        if let Ok(d) = std::fs::File::open(dir) {
            let _ = d.sync_all();
        }
    }
    Ok(())
}

/// Reads a dataset written by [`write_jsonl`], validating every record's
/// context and replayability.
///
/// # Errors
///
/// I/O failures and [`AnalysisError::BadRecord`] with the 1-based line of
/// the first malformed or inconsistent record.
pub fn read_jsonl(path: &Path) -> Result<Vec<DatasetRecord>, AnalysisError> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: DatasetRecord =
            serde_json::from_str(&line).map_err(|e| AnalysisError::BadRecord {
                line: i + 1,
                message: e.to_string(),
            })?;
        record.replay().map_err(|message| AnalysisError::BadRecord {
            line: i + 1,
            message,
        })?;
        records.push(record);
    }
    Ok(records)
}

// ---------------------------------------------------------------------------
// Interestingness breakdown
// ---------------------------------------------------------------------------

/// Per-partition accuracy over the interesting/uninteresting split.
/// An empty partition's accuracy is undefined and reported as absent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BreakdownReport {
    pub records: usize,
    pub interesting_count: usize,
    pub uninteresting_count: usize,
    pub fraction_interesting: f64,
    pub interesting_accuracy: Option<f64>,
    pub uninteresting_accuracy: Option<f64>,
}

/// Re-grades every record with `oracle` and splits accuracy by the stored
/// interesting flag.
///
/// # Errors
///
/// [`AnalysisError::InvalidParams`] on an empty dataset,
/// [`AnalysisError::BadRecord`]-free by construction (records are replayed
/// as stored), oracle failures propagate.
pub fn breakdown(
    records: &[DatasetRecord],
    oracle: &dyn Oracle,
) -> Result<BreakdownReport, AnalysisError> {
    if records.is_empty() {
        return Err(AnalysisError::InvalidParams(
            "breakdown requires a non-empty dataset".to_string(),
        ));
    }
    // Records of the same story share replays and oracle answers.
    let mut stories: HashMap<(String, Vec<String>), (StoryState, String)> = HashMap::new();
    let mut answers: HashMap<(String, String), String> = HashMap::new();
    let mut hits = [0usize; 2];
    let mut totals = [0usize; 2];
    for record in records {
        let story_key = (
            serde_json::to_string(&record.context).expect("contexts serialize"),
            record.actions.clone(),
        );
        if !stories.contains_key(&story_key) {
            let state = record
                .replay()
                .map_err(AnalysisError::InvalidParams)?;
            let text = render_story(&state);
            stories.insert(story_key.clone(), (state, text));
        }
        let (state, text) = &stories[&story_key];
        let item = record.to_item();
        let answer_key = (text.clone(), record.question.clone());
        let response = match answers.get(&answer_key) {
            Some(r) => r.clone(),
            None => {
                let r = oracle.answer(text, state, &item)?;
                answers.insert(answer_key, r.clone());
                r
            }
        };
        let graded = grade_item(&record.context, &item, &response);
        let bucket = usize::from(record.interesting);
        totals[bucket] += 1;
        hits[bucket] += usize::from(graded.correct);
    }
    let accuracy = |bucket: usize| {
        (totals[bucket] > 0).then(|| hits[bucket] as f64 / totals[bucket] as f64)
    };
    Ok(BreakdownReport {
        records: records.len(),
        interesting_count: totals[1],
        uninteresting_count: totals[0],
        fraction_interesting: totals[1] as f64 / records.len() as f64,
        interesting_accuracy: accuracy(1),
        uninteresting_accuracy: accuracy(0),
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{LiteralOracle, PerfectOracle};
    use crate::search::SearchOutcome;

    fn setting(people: usize, movements: usize) -> StudySetting {
        StudySetting {
            people,
            movements,
            max_actions: 10,
        }
    }

    #[test]
    fn study_sampler_hits_exact_counts_and_is_deterministic() {
        let ctx = Arc::new(
            sample_builtin(
                3,
                &ContextParams {
                    people: 3,
                    containers: 2,
                    topics: 2,
                },
            )
            .unwrap(),
        );
        let s = setting(3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let story = sample_study_story(&ctx, &s, &ActionKind::MOVEMENT_PRIMITIVES, &mut rng).unwrap();
        let moves = story
            .actions()
            .filter(|a| a.kind() == ActionKind::MoveObjContainer)
            .count();
        assert_eq!(moves, 2);
        assert!(story.actions().count() <= 10);
        let mut rng2 = ChaCha8Rng::seed_from_u64(9);
        let again =
            sample_study_story(&ctx, &s, &ActionKind::MOVEMENT_PRIMITIVES, &mut rng2).unwrap();
        assert_eq!(story.to_json(), again.to_json());
    }

    #[test]
    fn infeasible_settings_exhaust_immediately() {
        let ctx = Arc::new(
            sample_builtin(
                0,
                &ContextParams {
                    people: 4,
                    containers: 2,
                    topics: 2,
                },
            )
            .unwrap(),
        );
        let s = StudySetting {
            people: 4,
            movements: 8,
            max_actions: 5,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err =
            sample_study_story(&ctx, &s, &ActionKind::MOVEMENT_PRIMITIVES, &mut rng).unwrap_err();
        assert!(matches!(err, AnalysisError::SamplingExhausted { .. }));
    }

    #[test]
    fn study_validates_inputs() {
        let err = random_study(&ActionKind::MOVEMENT_PRIMITIVES, &[setting(2, 2)], 50, 0)
            .unwrap_err();
        assert!(err.to_string().contains("at least 100"));
        let err = random_study(&ActionKind::MOVEMENT_PRIMITIVES, &[], 100, 0).unwrap_err();
        assert!(err.to_string().contains("no study settings"));
    }

    #[test]
    fn small_study_reports_consistent_fractions() {
        let reports =
            random_study(&ActionKind::MOVEMENT_PRIMITIVES, &[setting(2, 2)], 100, 7).unwrap();
        assert_eq!(reports.len(), 1);
        let r = &reports[0];
        assert_eq!(r.samples, 100);
        for (p, ci, n) in [
            (r.p_requires_tom, r.ci_requires_tom, r.samples),
            (
                r.p_interesting_question,
                r.ci_interesting_question,
                r.question_pairs,
            ),
            (
                r.p_false_belief_triple,
                r.ci_false_belief_triple,
                r.question_pairs,
            ),
        ] {
            assert!((0.0..=1.0).contains(&p));
            let expected = 1.96 * (p * (1.0 - p) / n as f64).sqrt();
            assert!((ci - expected).abs() < 1e-12);
        }
        // False-belief triples are a subset of all triples and in practice
        // rarer than interesting pairs.
        assert!(r.p_false_belief_triple <= r.p_interesting_question + 0.05);
        let again =
            random_study(&ActionKind::MOVEMENT_PRIMITIVES, &[setting(2, 2)], 100, 7).unwrap();
        assert_eq!(
            serde_json::to_string(&reports).unwrap(),
            serde_json::to_string(&again).unwrap()
        );
        let table = study_table(&reports);
        assert!(table.contains("p_requires_tom"));
        assert!(table.lines().count() == 2);
    }

    fn quick_baseline_config(seed: u64) -> BaselineConfig {
        BaselineConfig {
            eval_budget: 120,
            stories: 4,
            action_kinds: vec![
                ActionKind::Enter,
                ActionKind::Leave,
                ActionKind::MoveObjContainer,
                ActionKind::UpdateObjState,
            ],
            allow_asymmetry: false,
            seed,
            ..BaselineConfig::default()
        }
    }

    fn compare_spec() -> DesiredSpec {
        DesiredSpec {
            people: 2,
            important_actions: 2,
            rooms: 1,
            max_actions: 12,
            ..DesiredSpec::default()
        }
    }

    #[test]
    fn perfect_oracle_puts_both_arms_at_the_ceiling() {
        let ctx = Arc::new(
            sample_builtin(
                1,
                &ContextParams {
                    people: 3,
                    containers: 3,
                    topics: 2,
                },
            )
            .unwrap(),
        );
        let cmp =
            baseline_compare(&ctx, &PerfectOracle, &compare_spec(), &quick_baseline_config(4))
                .unwrap();
        assert_eq!(cmp.best_first.mean_g, Some(1.0));
        assert_eq!(cmp.overgenerate.mean_g, Some(1.0));
        assert!(cmp.best_first.evals_spent <= 120);
        assert!(cmp.overgenerate.evals_spent <= 120);
        let table = comparison_table(&cmp);
        assert!(table.contains("best-first") && table.contains("overgenerate"));
    }

    #[test]
    fn fallible_oracle_comparison_is_deterministic_and_bounded() {
        let ctx = Arc::new(
            sample_builtin(
                1,
                &ContextParams {
                    people: 3,
                    containers: 3,
                    topics: 2,
                },
            )
            .unwrap(),
        );
        let config = quick_baseline_config(11);
        let a = baseline_compare(&ctx, &LiteralOracle, &compare_spec(), &config).unwrap();
        let b = baseline_compare(&ctx, &LiteralOracle, &compare_spec(), &config).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        let g_a = a.best_first.mean_g.unwrap();
        let g_b = a.overgenerate.mean_g.unwrap();
        assert!((0.0..=1.0).contains(&g_a));
        assert!((0.0..=1.0).contains(&g_b));
        assert!(g_a < 1.0, "search should find stories the oracle misses");
    }

    fn sample_records() -> (Arc<StoryContext>, Vec<DatasetRecord>) {
        let ctx = Arc::new(
            sample_builtin(
                0,
                &ContextParams {
                    people: 3,
                    containers: 3,
                    topics: 2,
                },
            )
            .unwrap(),
        );
        let spec = compare_spec();
        let config = SearchConfig {
            continuation_samples: 8,
            node_eval_budget: 30,
            stories_requested: 2,
            seed: 13,
            action_kinds: vec![
                ActionKind::Enter,
                ActionKind::Leave,
                ActionKind::MoveObjContainer,
                ActionKind::UpdateObjState,
            ],
            allow_asymmetry: false,
            ..SearchConfig::default()
        };
        let outcome: SearchOutcome = search(&ctx, &LiteralOracle, &spec, &config).unwrap();
        assert!(!outcome.stories.is_empty());
        let mut records = Vec::new();
        for story in &outcome.stories {
            let meta = RecordMeta {
                oracle: "literal".to_string(),
                seed: 13,
                g: story.g,
                desired: spec.clone(),
            };
            records.extend(records_from_story(&ctx, story, &meta, None));
        }
        (ctx, records)
    }

    #[test]
    fn records_self_verify_and_detect_corruption() {
        let (_ctx, records) = sample_records();
        assert!(!records.is_empty());
        for r in &records {
            verify_record(r).unwrap();
        }
        let mut bad = records[0].clone();
        bad.gold = "somewhere else entirely".to_string();
        let err = verify_record(&bad).unwrap_err();
        assert!(err.contains("gold mismatch"), "{err}");
        let mut bad = records[0].clone();
        bad.question = "Is this question derivable?".to_string();
        assert!(verify_record(&bad).unwrap_err().contains("not derivable"));
    }

    #[test]
    fn jsonl_round_trips_byte_identically() {
        let (_ctx, records) = sample_records();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dataset.jsonl");
        write_jsonl(&path, &records).unwrap();
        let first = std::fs::read(&path).unwrap();
        let back = read_jsonl(&path).unwrap();
        assert_eq!(back.len(), records.len());
        assert_eq!(back, records);
        let path2 = dir.path().join("again.jsonl");
        write_jsonl(&path2, &back).unwrap();
        assert_eq!(first, std::fs::read(&path2).unwrap());
        // Re-grading every record with the perfect oracle is always correct.
        let report = breakdown(&back, &PerfectOracle).unwrap();
        assert_eq!(report.interesting_accuracy.unwrap_or(1.0), 1.0);
        assert_eq!(report.uninteresting_accuracy.unwrap_or(1.0), 1.0);
        assert_eq!(report.records, records.len());
    }

    #[test]
    fn breakdown_partitions_by_the_stored_flag() {
        let (_ctx, records) = sample_records();
        let report = breakdown(&records, &LiteralOracle).unwrap();
        assert_eq!(
            report.interesting_count + report.uninteresting_count,
            report.records
        );
        let expected = report.interesting_count as f64 / report.records as f64;
        assert!((report.fraction_interesting - expected).abs() < 1e-12);
        // The literal oracle reads the world state, so it aces questions
        // whose answers match it — the uninteresting side of the split on
        // belief-only datasets — and fails exactly the divergent ones.
        let tom_only: Vec<DatasetRecord> = records
            .iter()
            .filter(|r| matches!(r.order, QuestionOrder::First | QuestionOrder::Second))
            .cloned()
            .collect();
        let tom_report = breakdown(&tom_only, &LiteralOracle).unwrap();
        if let (Some(uninteresting), Some(interesting)) = (
            tom_report.uninteresting_accuracy,
            tom_report.interesting_accuracy,
        ) {
            assert!(uninteresting >= interesting);
        }
        // A dataset with no person slot to vary has zero interesting
        // questions by definition.
        let no_person: Vec<DatasetRecord> = records
            .iter()
            .filter(|r| {
                matches!(
                    r.order,
                    QuestionOrder::GroundTruth | QuestionOrder::Memory
                )
            })
            .cloned()
            .collect();
        if !no_person.is_empty() {
            let r = breakdown(&no_person, &PerfectOracle).unwrap();
            assert_eq!(r.fraction_interesting, 0.0);
            assert!(r.interesting_accuracy.is_none());
        }
    }
}
