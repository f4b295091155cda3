//! Adversarial best-first search over story structures.
//!
//! Nodes are valid action sequences. Each node is scored `f = g + h`, where
//! `g` is the answer oracle's accuracy on the node's filtered questions
//! (lower = harder story) and `h` estimates how hard it will be to reach a
//! story with the requested shape: `h = alpha · (1 − d/P)` with `d` of `P`
//! random valid continuations landing in the desired shape. Desired nodes
//! are emitted as found stories when popped, and the search keeps going
//! until it has the requested number of stories or runs out of its
//! node-evaluation allowance.

use std::cmp::Ordering;
use std::collections::BTreeSet;
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
use crate::context::{PersonId, RoomId, StoryContext};
use crate::oracle::{score_story, Oracle, OracleCache, OracleError, QuestionFilter, ScoredStory};
use crate::question::{generate_questions, QAItem};
use crate::state::{FactKey, StoryState, Value};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// The default set of actions that count as "important": the ones that add
/// new basic world knowledge to a story.
pub const DEFAULT_IMPORTANT_SET: [ActionKind; 5] = [
    ActionKind::MoveObjContainer,
    ActionKind::MoveObjRoom,
    ActionKind::UpdateObjState,
    ActionKind::ChitChatPrivate,
    ActionKind::ChitChatPublic,
];

/// The story shape a search must deliver.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesiredSpec {
    /// Exact number of distinct people acting in the story.
    pub people: usize,
    /// Exact number of actions drawn from `important_set`.
    pub important_actions: usize,
    #[serde(default = "default_important_set")]
    pub important_set: Vec<ActionKind>,
    /// Exact number of distinct rooms where story activity happens.
    pub rooms: usize,
    /// Maximum story length.
    pub max_actions: usize,
}

fn default_important_set() -> Vec<ActionKind> {
    DEFAULT_IMPORTANT_SET.to_vec()
}

impl Default for DesiredSpec {
    fn default() -> Self {
        DesiredSpec {
            people: 2,
            important_actions: 2,
            important_set: default_important_set(),
            rooms: 1,
            max_actions: 15,
        }
    }
}

impl DesiredSpec {
    /// Checks the structural invariants, optionally against a context.
    ///
    /// # Errors
    ///
    /// [`SearchError::InvalidSpec`] listing every violated rule.
    pub fn validate(&self, ctx: Option<&StoryContext>) -> Result<(), SearchError> {
        let mut issues = Vec::new();
        if self.people < 2 {
            issues.push("people: must be at least 2".to_string());
        }
        if self.important_actions < 1 {
            issues.push("important_actions: must be at least 1".to_string());
        }
        if !(1..=2).contains(&self.rooms) {
            issues.push("rooms: must be 1 or 2".to_string());
        }
        if self.max_actions < self.important_actions {
            issues.push("max_actions: must be at least important_actions".to_string());
        }
        if self.important_set.is_empty() {
            issues.push("important_set: must not be empty".to_string());
        }
        if let Some(ctx) = ctx {
            if self.people > ctx.person_count() {
                issues.push(format!(
                    "people: {} requested but the context has {}",
                    self.people,
                    ctx.person_count()
                ));
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(SearchError::InvalidSpec { issues })
        }
    }

    fn important_mask(&self) -> u16 {
        self.important_set
            .iter()
            .fold(0u16, |m, k| m | (1 << k.id()))
    }
}

/// Search knobs. Defaults follow the reference setup: `alpha` 0.1, 50
/// continuation samples, grouping factor 3, 8 neighbors per expansion, 50
/// node evaluations per story.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub alpha: f64,
    /// `P`: how many random continuations estimate each node's `h`.
    #[serde(alias = "p")]
    pub continuation_samples: usize,
    /// `k`: every child extends its parent by exactly this many actions.
    #[serde(alias = "k")]
    pub grouping: usize,
    /// Maximum children evaluated per expansion.
    pub neighbor_budget: usize,
    /// Node-evaluation allowance granted per requested story.
    pub node_eval_budget: usize,
    pub stories_requested: usize,
    pub question_filter: QuestionFilter,
    pub seed: u64,
    /// The action vocabulary the search may use.
    #[serde(default = "all_kinds")]
    pub action_kinds: Vec<ActionKind>,
    /// Whether secret-witness and distraction variants are searched.
    #[serde(default = "default_true")]
    pub allow_asymmetry: bool,
    /// Widen `neighbor_budget` to `ceil(base · (1 + (1 − g)))` on nodes the
    /// oracle already struggles with.
    #[serde(default)]
    pub adaptive_neighbors: bool,
}

fn all_kinds() -> Vec<ActionKind> {
    ActionKind::ALL.to_vec()
}

fn default_true() -> bool {
    true
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            alpha: 0.1,
            continuation_samples: 50,
            grouping: 3,
            neighbor_budget: 8,
            node_eval_budget: 50,
            stories_requested: 10,
            question_filter: QuestionFilter::FirstOrder,
            seed: 0,
            action_kinds: all_kinds(),
            allow_asymmetry: true,
            adaptive_neighbors: false,
        }
    }
}

impl SearchConfig {
    /// Checks the structural invariants.
    ///
    /// # Errors
    ///
    /// [`SearchError::InvalidSpec`] listing every violated rule.
    pub fn validate(&self) -> Result<(), SearchError> {
        let mut issues = Vec::new();
        if !(0.0..=1.0).contains(&self.alpha) {
            issues.push("alpha: must be within [0, 1]".to_string());
        }
        for (name, value) in [
            ("continuation_samples", self.continuation_samples),
            ("grouping", self.grouping),
            ("neighbor_budget", self.neighbor_budget),
            ("node_eval_budget", self.node_eval_budget),
            ("stories_requested", self.stories_requested),
        ] {
            if value == 0 {
                issues.push(format!("{name}: must be positive"));
            }
        }
        if self.action_kinds.is_empty() {
            issues.push("action_kinds: must not be empty".to_string());
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(SearchError::InvalidSpec { issues })
        }
    }
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid search parameters: {}", issues.join("; "))]
    InvalidSpec { issues: Vec<String> },
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

// ---------------------------------------------------------------------------
// Desired-shape tracking
// ---------------------------------------------------------------------------

/// Running tallies of the quantities `DesiredSpec` constrains, updatable in
/// O(1) per action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct ShapeTally {
    actors: u32,
    rooms: u32,
    important: u32,
    len: u32,
}

fn actor_room(state: &StoryState, actor: PersonId) -> RoomId {
    match state.world(FactKey::PersonRoom(actor)) {
        Value::Room(r) => r,
        _ => unreachable!("preconditions keep on-stage actions on stage"),
    }
}

impl ShapeTally {
    /// Folds one action in. `state_before` is the state the action applies
    /// to (needed to resolve the actor's room).
    fn record(&mut self, state_before: &StoryState, action: ActionInstance, important_mask: u16) {
        use crate::action::ActionBody::*;
        self.actors |= 1 << action.actor.0;
        match action.body {
            Enter { room } | Leave { room } => self.rooms |= 1 << room.0,
            MoveObjRoom { room } => {
                self.rooms |= 1 << actor_room(state_before, action.actor).0;
                self.rooms |= 1 << room.0;
            }
            MoveObjContainer { .. } | UpdateObjState { .. } => {
                self.rooms |= 1 << actor_room(state_before, action.actor).0;
            }
            InfoPublic { room, .. } | ChitChatPublic { room, .. } => self.rooms |= 1 << room.0,
            InfoPrivate { .. } | ChitChatPrivate { .. } => {}
        }
        if important_mask & (1 << action.kind().id()) != 0 {
            self.important += 1;
        }
        self.len += 1;
    }

    fn desired(&self, spec: &DesiredSpec) -> bool {
        self.actors.count_ones() as usize == spec.people
            && self.important as usize == spec.important_actions
            && self.rooms.count_ones() as usize == spec.rooms
            && self.len as usize <= spec.max_actions
    }

    /// Whether any exact-count target has been exceeded; such a node can
    /// never reach the desired shape because tallies only grow.
    fn overshoot(&self, spec: &DesiredSpec) -> bool {
        self.actors.count_ones() as usize > spec.people
            || self.important as usize > spec.important_actions
            || self.rooms.count_ones() as usize > spec.rooms
            || self.len as usize > spec.max_actions
    }

    /// Distance-to-desired, compared lexicographically: important-action
    /// deficit first, then people, then rooms.
    fn deficit(&self, spec: &DesiredSpec) -> (usize, usize, usize) {
        (
            spec.important_actions
                .saturating_sub(self.important as usize),
            spec.people.saturating_sub(self.actors.count_ones() as usize),
            spec.rooms.saturating_sub(self.rooms.count_ones() as usize),
        )
    }
}

/// Whether a finished story has exactly the desired shape: the required
/// number of distinct actors, important actions, and distinct rooms used,
/// within the length cap.
pub fn is_desired(state: &StoryState, spec: &DesiredSpec) -> bool {
    let mask = spec.important_mask();
    let mut tally = ShapeTally::default();
    let mut cursor = StoryState::init(state.context().clone()).expect("context already validated");
    for action in state.actions() {
        tally.record(&cursor, action, mask);
        cursor = apply_transient(&cursor, action).expect("recorded history replays cleanly");
    }
    tally.desired(spec)
}

// ---------------------------------------------------------------------------
// Random walks
// ---------------------------------------------------------------------------

pub(crate) fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Extends a story by up to `steps` uniformly random valid actions,
/// returning the reached state, tally, and the suffix actually taken (which
/// is shorter than `steps` only if the story got stuck).
#[allow(clippy::too_many_arguments)] // internal; every argument is a distinct walk input
fn random_walk(
    state: &StoryState,
    tally: ShapeTally,
    steps: usize,
    config: &SearchConfig,
    important_mask: u16,
    rng: &mut ChaCha8Rng,
    options: &mut Vec<ActionInstance>,
    record_history: bool,
) -> (StoryState, ShapeTally, Vec<ActionInstance>) {
    let mut current = state.clone();
    let mut tally = tally;
    let mut suffix = Vec::with_capacity(steps);
    for _ in 0..steps {
        enumerate_valid_actions_into(&current, &config.action_kinds, config.allow_asymmetry, options);
        if options.is_empty() {
            break;
        }
        let action = options[rng.random_range(0..options.len())];
        tally.record(&current, action, important_mask);
        current = if record_history {
            apply(&current, action).expect("enumerated actions apply")
        } else {
            apply_transient(&current, action).expect("enumerated actions apply")
        };
        suffix.push(action);
    }
    (current, tally, suffix)
}

/// `h(s) = alpha · (1 − d/P)`: the estimated difficulty of completing `s`
/// into the desired shape, from `P` seeded random continuations of length
/// uniform in `[0, max_actions − |s|]`. Always within `[0, alpha]`.
fn heuristic(
    state: &StoryState,
    tally: ShapeTally,
    spec: &DesiredSpec,
    config: &SearchConfig,
    important_mask: u16,
    rng: &mut ChaCha8Rng,
) -> f64 {
    if config.alpha == 0.0 {
        return 0.0;
    }
    let headroom = spec.max_actions.saturating_sub(tally.len as usize);
    let mut options = Vec::new();
    let mut desired = 0usize;
    for _ in 0..config.continuation_samples {
        let steps = rng.random_range(0..=headroom);
        let (_, end_tally, _) = random_walk(
            state,
            tally,
            steps,
            config,
            important_mask,
            rng,
            &mut options,
            false,
        );
        if end_tally.desired(spec) {
            desired += 1;
        }
    }
    config.alpha * (1.0 - desired as f64 / config.continuation_samples as f64)
}

// ---------------------------------------------------------------------------
// Search proper
// ---------------------------------------------------------------------------

struct Node {
    state: StoryState,
    tally: ShapeTally,
    g: f64,
    h: f64,
    desired: bool,
    items: Vec<QAItem>,
    scored: Option<ScoredStory>,
}

impl Node {
    fn f(&self) -> f64 {
        self.g + self.h
    }
}

/// Frontier entry: minimum `f` first, FIFO on ties.
struct Entry {
    f: f64,
    seq: u64,
    idx: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed so the max-heap pops the smallest (f, seq).
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// One question's graded outcome inside a found story.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Verdict {
    pub question: String,
    pub gold: String,
    pub response: String,
    pub correct: bool,
}

/// A story the search delivered.
#[derive(Debug, Clone)]
pub struct FoundStory {
    pub actions: Vec<ActionInstance>,
    pub state: StoryState,
    /// Oracle accuracy under the search's question filter.
    pub g: f64,
    pub story_text: String,
    /// Every generated question (not just the filtered ones).
    pub items: Vec<QAItem>,
    /// Graded oracle responses for the filtered questions.
    pub verdicts: Vec<Verdict>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStatus {
    /// Every requested story was found.
    Complete,
    /// The node-evaluation allowance ran out (or the frontier emptied)
    /// first. Not an error; whatever was found is returned.
    BudgetExhausted,
}

#[derive(Debug)]
pub struct SearchOutcome {
    /// Found stories, ascending by `g` (hardest first).
    pub stories: Vec<FoundStory>,
    /// Total node evaluations spent.
    pub budget_spent: usize,
    pub status: SearchStatus,
}

/// Runs the adversarial search for stories matching `spec` on which
/// `oracle` scores poorly.
///
/// Fully deterministic given the seed and a deterministic oracle: node ids,
/// child sampling, and heuristic sampling all derive from `config.seed`, and
/// ties pop first-in-first-out.
///
/// # Errors
///
/// [`SearchError::InvalidSpec`] for bad parameters; remote-oracle transport
/// failures propagate as [`SearchError::Oracle`]. Running out of budget is
/// a status, not an error.
pub fn search(
    ctx: &Arc<StoryContext>,
    oracle: &dyn Oracle,
    spec: &DesiredSpec,
    config: &SearchConfig,
) -> Result<SearchOutcome, SearchError> {
    spec.validate(Some(ctx))?;
    config.validate()?;
    let important_mask = spec.important_mask();
    let cache = OracleCache::new();

    let mut nodes: Vec<Node> = Vec::new();
    let mut frontier = std::collections::BinaryHeap::new();
    let mut stories: Vec<FoundStory> = Vec::new();
    let mut seq = 0u64;
    let mut budget_spent = 0usize;
    let mut allowance = config.node_eval_budget;

    let evaluate = |state: StoryState,
                    tally: ShapeTally,
                    node_id: u64|
     -> Result<Node, SearchError> {
        let items = generate_questions(&state);
        let (g, scored) =
            match score_story(oracle, &state, &items, config.question_filter, &cache) {
                Ok(s) => (s.accuracy, Some(s)),
                // A story with nothing to score cannot be a hard story;
                // treat it as maximally easy so the search moves on.
                Err(OracleError::NoQuestions) => (1.0, None),
                Err(e) => return Err(e.into()),
            };
        let mut h_rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, node_id.wrapping_mul(2)));
        let h = heuristic(&state, tally, spec, config, important_mask, &mut h_rng);
        let desired = tally.desired(spec);
        Ok(Node {
            state,
            tally,
            g,
            h,
            desired,
            items,
            scored,
        })
    };

    // Root: the empty story.
    let root_state = StoryState::init(ctx.clone()).map_err(|e| SearchError::InvalidSpec {
        issues: vec![e.to_string()],
    })?;
    let root = evaluate(root_state, ShapeTally::default(), 0)?;
    budget_spent += 1;
    allowance = allowance.saturating_sub(1);
    nodes.push(root);
    frontier.push(Entry {
        f: nodes[0].f(),
        seq,
        idx: 0,
    });
    seq += 1;

    while let Some(entry) = frontier.pop() {
        let idx = entry.idx;
        if nodes[idx].desired {
            let node = &nodes[idx];
            let scored = node.scored.as_ref();
            stories.push(FoundStory {
                actions: node.state.actions().collect(),
                state: node.state.clone(),
                g: node.g,
                story_text: scored
                    .map(|s| s.story_text.clone())
                    .unwrap_or_else(|| crate::render::render_story(&node.state)),
                items: node.items.clone(),
                verdicts: scored
                    .map(|s| {
                        s.verdicts
                            .iter()
                            .map(|(qi, graded)| Verdict {
                                question: node.items[*qi].question.clone(),
                                gold: node.items[*qi].gold.clone(),
                                response: graded.raw.clone(),
                                correct: graded.correct,
                            })
                            .collect()
                    })
                    .unwrap_or_default(),
            });
            if stories.len() == config.stories_requested {
                break;
            }
            // A fresh allowance for the next story.
            allowance = config.node_eval_budget;
        }

        // Expansion: sample distinct k-action extensions, keep the ones
        // closest to the desired shape, evaluate them.
        if allowance == 0
            || nodes[idx].tally.len as usize + config.grouping > spec.max_actions
        {
            continue;
        }
        let parent_budget = if config.adaptive_neighbors {
            (config.neighbor_budget as f64 * (1.0 + (1.0 - nodes[idx].g))).ceil() as usize
        } else {
            config.neighbor_budget
        };
        let attempts = (parent_budget * 4).max(32);
        let mut expansion_rng =
            ChaCha8Rng::seed_from_u64(mix_seed(config.seed, (idx as u64).wrapping_mul(2) + 1));
        let mut options = Vec::new();
        let mut seen: BTreeSet<Vec<ActionInstance>> = BTreeSet::new();
        let mut picks: Vec<(Vec<ActionInstance>, StoryState, ShapeTally)> = Vec::new();
        for _ in 0..attempts {
            let (child_state, child_tally, suffix) = random_walk(
                &nodes[idx].state,
                nodes[idx].tally,
                config.grouping,
                config,
                important_mask,
                &mut expansion_rng,
                &mut options,
                true,
            );
            if suffix.len() < config.grouping || !seen.insert(suffix.clone()) {
                continue;
            }
            // Tallies only grow, so an overshot child is a dead branch.
            if child_tally.overshoot(spec) {
                continue;
            }
            picks.push((suffix, child_state, child_tally));
        }
        picks.sort_by(|a, b| a.2.deficit(spec).cmp(&b.2.deficit(spec)).then(a.0.cmp(&b.0)));
        picks.truncate(parent_budget.min(allowance));

        let first_child_id = nodes.len() as u64;
        let children: Result<Vec<Node>, SearchError> = picks
            .into_par_iter()
            .enumerate()
            .map(|(i, (_, child_state, child_tally))| {
                evaluate(child_state, child_tally, first_child_id + i as u64)
            })
            .collect();
        for child in children? {
            budget_spent += 1;
            allowance -= 1;
            frontier.push(Entry {
                f: child.f(),
                seq,
                idx: nodes.len(),
            });
            seq += 1;
            nodes.push(child);
        }
    }

    let status = if stories.len() == config.stories_requested {
        SearchStatus::Complete
    } else {
        SearchStatus::BudgetExhausted
    };
    stories.sort_by(|a, b| a.g.total_cmp(&b.g));
    Ok(SearchOutcome {
        stories,
        budget_spent,
        status,
    })
}

// ---------------------------------------------------------------------------
// The run manifest
// ---------------------------------------------------------------------------

/// One story as recorded in a search manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestStory {
    pub g: f64,
    pub length: usize,
    pub text: String,
    pub actions: Vec<crate::action::ActionJson>,
    pub verdicts: Vec<Verdict>,
}

/// Everything needed to reproduce or re-grade a search run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchManifest {
    pub seed: u64,
    pub oracle: String,
    pub config: SearchConfig,
    pub desired: DesiredSpec,
    pub context: StoryContext,
    pub budget_spent: usize,
    pub status: SearchStatus,
    pub stories: Vec<ManifestStory>,
}

impl SearchManifest {
    pub fn new(
        ctx: &StoryContext,
        oracle_spec: &str,
        spec: &DesiredSpec,
        config: &SearchConfig,
        outcome: &SearchOutcome,
    ) -> SearchManifest {
        SearchManifest {
            seed: config.seed,
            oracle: oracle_spec.to_string(),
            config: config.clone(),
            desired: spec.clone(),
            context: ctx.clone(),
            budget_spent: outcome.budget_spent,
            status: outcome.status,
            stories: outcome
                .stories
                .iter()
                .map(|s| ManifestStory {
                    g: s.g,
                    length: s.actions.len(),
                    text: s.story_text.clone(),
                    actions: s
                        .actions
                        .iter()
                        .map(|a| crate::action::ActionJson::build(ctx, *a))
                        .collect(),
                    verdicts: s.verdicts.clone(),
                })
                .collect(),
        }
    }

    /// Stable pretty JSON: identical runs serialize to identical bytes.
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        text
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::ActionBody;
    use crate::builtin::{sample_builtin, ContextParams};
    use crate::context::ContainerId;
    use crate::oracle::{LiteralOracle, PerfectOracle};
    use crate::question::QuestionOrder;

    fn ctx(people: usize) -> Arc<StoryContext> {
        Arc::new(
            sample_builtin(
                0,
                &ContextParams {
                    people,
                    containers: 3,
                    topics: 2,
                },
            )
            .unwrap(),
        )
    }

    fn transfer_state(ctx: &Arc<StoryContext>) -> StoryState {
        let mut s = StoryState::init(ctx.clone()).unwrap();
        for action in [
            ActionInstance::new(PersonId(0), ActionBody::Enter { room: RoomId(0) }),
            ActionInstance::new(PersonId(1), ActionBody::Enter { room: RoomId(0) }),
            ActionInstance::new(PersonId(0), ActionBody::MoveObjContainer {
                container: ContainerId(0),
            }),
            ActionInstance::new(PersonId(0), ActionBody::MoveObjContainer {
                container: ContainerId(1),
            }),
        ] {
            s = apply(&s, action).unwrap();
        }
        s
    }

    #[test]
    fn desired_shape_counts_the_trace() {
        let ctx = ctx(3);
        let empty = StoryState::init(ctx.clone()).unwrap();
        let spec = DesiredSpec {
            people: 2,
            important_actions: 2,
            rooms: 1,
            max_actions: 15,
            ..DesiredSpec::default()
        };
        assert!(!is_desired(&empty, &spec), "empty story misses a >= 1");

        let story = transfer_state(&ctx);
        assert!(is_desired(&story, &spec));
        assert!(
            !is_desired(&story, &DesiredSpec { people: 3, ..spec.clone() }),
            "people deficit"
        );
        assert!(
            !is_desired(&story, &DesiredSpec { rooms: 2, ..spec.clone() }),
            "room deficit"
        );
        assert!(
            !is_desired(&story, &DesiredSpec { max_actions: 3, ..spec.clone() }),
            "over length"
        );
        assert!(
            !is_desired(&story, &DesiredSpec { important_actions: 1, ..spec }),
            "important overshoot"
        );
    }

    #[test]
    fn heuristic_stays_within_bounds_and_hits_the_edges() {
        let ctx = ctx(3);
        let story = transfer_state(&ctx);
        let spec = DesiredSpec {
            people: 2,
            important_actions: 2,
            rooms: 1,
            max_actions: 4, // story is exactly at the cap
            ..DesiredSpec::default()
        };
        let config = SearchConfig {
            continuation_samples: 20,
            ..SearchConfig::default()
        };
        let mask = spec.important_mask();
        let tally = {
            let mut t = ShapeTally::default();
            let mut cursor = StoryState::init(ctx.clone()).unwrap();
            for action in story.actions() {
                t.record(&cursor, action, mask);
                cursor = apply_transient(&cursor, action).unwrap();
            }
            t
        };
        // No headroom: every continuation is empty, the node is desired.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = heuristic(&story, tally, &spec, &config, mask, &mut rng);
        assert_eq!(h, 0.0);
        // Alpha zero short-circuits.
        let zero = SearchConfig { alpha: 0.0, ..config.clone() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(heuristic(&story, tally, &spec, &zero, mask, &mut rng), 0.0);
        // An unreachable shape keeps h at alpha.
        let impossible = DesiredSpec { people: 3, ..spec.clone() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = heuristic(&story, tally, &impossible, &config, mask, &mut rng);
        assert_eq!(h, config.alpha, "no continuation can un-overshoot people");
        // A partially built story lands strictly inside the range.
        let open_spec = DesiredSpec {
            people: 2,
            important_actions: 2,
            rooms: 1,
            max_actions: 10,
            ..DesiredSpec::default()
        };
        let short = {
            let mut s = StoryState::init(ctx.clone()).unwrap();
            s = apply(&s, ActionInstance::new(PersonId(0), ActionBody::Enter { room: RoomId(0) }))
                .unwrap();
            s
        };
        let mut t = ShapeTally::default();
        t.record(
            &StoryState::init(ctx.clone()).unwrap(),
            ActionInstance::new(PersonId(0), ActionBody::Enter { room: RoomId(0) }),
            mask,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = heuristic(&short, t, &open_spec, &config, mask, &mut rng);
        assert!(h >= 0.0 && h <= config.alpha, "h = {h}");
    }

    fn quick_config(seed: u64) -> SearchConfig {
        SearchConfig {
            continuation_samples: 8,
            neighbor_budget: 6,
            node_eval_budget: 40,
            stories_requested: 3,
            seed,
            ..SearchConfig::default()
        }
    }

    fn quick_spec() -> DesiredSpec {
        DesiredSpec {
            people: 2,
            important_actions: 2,
            rooms: 1,
            max_actions: 9,
            ..DesiredSpec::default()
        }
    }

    #[test]
    fn perfect_oracle_stories_all_score_one() {
        let ctx = ctx(3);
        let outcome = search(&ctx, &PerfectOracle, &quick_spec(), &quick_config(5)).unwrap();
        assert!(!outcome.stories.is_empty());
        for s in &outcome.stories {
            assert_eq!(s.g, 1.0);
            assert!(is_desired(&s.state, &quick_spec()));
            assert_eq!(s.actions.len() % 3, 0, "children add exactly k actions");
        }
    }

    #[test]
    fn literal_oracle_is_driven_into_false_belief_stories() {
        let ctx = ctx(3);
        let outcome = search(&ctx, &LiteralOracle, &quick_spec(), &quick_config(7)).unwrap();
        assert!(!outcome.stories.is_empty());
        for s in &outcome.stories {
            assert!(s.g < 1.0, "adversarial search found only easy stories");
            assert!(
                s.items
                    .iter()
                    .any(|q| q.order == QuestionOrder::First && q.interesting),
                "story lacks an interesting first-order question:\n{}",
                s.story_text
            );
        }
        // Output is ascending by g.
        for pair in outcome.stories.windows(2) {
            assert!(pair[0].g <= pair[1].g);
        }
    }

    #[test]
    fn identical_seeds_reproduce_identical_runs() {
        let ctx = ctx(3);
        let spec = quick_spec();
        let config = quick_config(11);
        let a = search(&ctx, &LiteralOracle, &spec, &config).unwrap();
        let b = search(&ctx, &LiteralOracle, &spec, &config).unwrap();
        let ma = SearchManifest::new(&ctx, "literal", &spec, &config, &a).to_json();
        let mb = SearchManifest::new(&ctx, "literal", &spec, &config, &b).to_json();
        assert_eq!(ma, mb, "same seed, same bytes");
        let c = search(
            &ctx,
            &LiteralOracle,
            &spec,
            &SearchConfig { seed: 12, ..config.clone() },
        )
        .unwrap();
        let mc = SearchManifest::new(&ctx, "literal", &spec, &config, &c).to_json();
        assert_ne!(ma, mc, "different seed, different exploration");
    }

    #[test]
    fn budget_is_respected_and_exhaustion_is_a_status() {
        let ctx = ctx(3);
        // Demand an unreachable story shape (no important kinds allowed in
        // the vocabulary), so the search can only exhaust its allowance.
        let spec = DesiredSpec {
            people: 2,
            important_actions: 1,
            rooms: 1,
            max_actions: 6,
            ..DesiredSpec::default()
        };
        let config = SearchConfig {
            action_kinds: vec![ActionKind::Enter, ActionKind::Leave],
            continuation_samples: 4,
            node_eval_budget: 25,
            stories_requested: 1,
            seed: 3,
            ..SearchConfig::default()
        };
        let outcome = search(&ctx, &PerfectOracle, &spec, &config).unwrap();
        assert_eq!(outcome.status, SearchStatus::BudgetExhausted);
        assert!(outcome.stories.is_empty());
        assert!(outcome.budget_spent <= 25, "spent {}", outcome.budget_spent);
    }

    #[test]
    fn invalid_parameters_are_rejected_with_reasons() {
        let ctx = ctx(2);
        let err = DesiredSpec {
            people: 1,
            important_actions: 0,
            rooms: 3,
            max_actions: 0,
            ..DesiredSpec::default()
        }
        .validate(Some(&ctx))
        .unwrap_err();
        let text = err.to_string();
        for needle in ["people", "important_actions", "rooms"] {
            assert!(text.contains(needle), "{text}");
        }
        let err = DesiredSpec {
            people: 5,
            ..DesiredSpec::default()
        }
        .validate(Some(&ctx))
        .unwrap_err();
        assert!(err.to_string().contains("the context has 2"));
        let err = SearchConfig {
            alpha: 1.5,
            grouping: 0,
            ..SearchConfig::default()
        }
        .validate()
        .unwrap_err();
        assert!(err.to_string().contains("alpha"));
        assert!(err.to_string().contains("grouping"));
    }

    #[test]
    fn manifest_round_trips_through_json() {
        let ctx = ctx(3);
        let spec = quick_spec();
        let config = quick_config(2);
        let outcome = search(&ctx, &LiteralOracle, &spec, &config).unwrap();
        let manifest = SearchManifest::new(&ctx, "literal", &spec, &config, &outcome);
        let json = manifest.to_json();
        let back: SearchManifest = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_json(), json);
        assert_eq!(back.stories.len(), outcome.stories.len());
        assert_eq!(back.budget_spent, outcome.budget_spent);
    }
}
