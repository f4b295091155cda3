//! Story-benchmark engine: a small action language for household stories,
//! exact tracking of the world and of nested beliefs, question generation
//! with guaranteed gold answers, pluggable answer oracles, and an A* search
//! that assembles stories on which a chosen oracle performs poorly.

pub mod action;
pub mod analysis;
pub mod builtin;
pub mod context;
pub mod infill;
pub mod oracle;
pub mod question;
pub mod remote;
pub mod render;
pub mod search;
pub mod state;

pub use action::{
    apply, enumerate_valid_actions, enumerate_valid_actions_into, is_valid, ActionBody,
    ActionError, ActionInstance, ActionJson, ActionKind, CommFact, Modifier, PreconditionFailure,
};
pub use analysis::{
    baseline_compare, breakdown, comparison_table, random_study, read_jsonl, records_from_story,
    sample_study_story, study_table, verify_record, write_jsonl, AnalysisError, ArmReport,
    BaselineComparison, BaselineConfig, BreakdownReport, DatasetRecord, RandomStudyReport,
    RecordMeta, StudySetting,
};
pub use builtin::{builtin_contexts, sample_builtin, ContextParams};
pub use context::{
    ContainerId, ContextError, Person, PersonId, PhraseId, RoomId, StoryContext, TopicId,
};
pub use oracle::{
    grade, grade_item, normalize, oracle_accuracy, parse_oracle_spec, score_story, GradedAnswer,
    LiteralOracle, Oracle, OracleCache, OracleError, PerfectOracle, QuestionFilter, RecencyOracle,
    ScoredStory,
};
pub use question::{
    generate_questions, requires_tom, QAItem, QuestionCategory, QuestionOrder, TemplateId,
};
pub use infill::{
    infill, sample_context_remote, ContextSampleError, InfillConfig, InfillError, InfillExchange,
    InfillOutcome, LengthDesideratum, TextType,
};
pub use remote::{RemoteClient, RemoteOracle};
pub use render::{
    parse_action_line, parse_story, render_action, render_canonical, render_story, scene_line,
    ParseError, RenderStyle, RenderedLine, RenderedStory,
};
pub use search::{
    is_desired, search, DesiredSpec, FoundStory, ManifestStory, SearchConfig, SearchError,
    SearchManifest, SearchOutcome, SearchStatus, Verdict, DEFAULT_IMPORTANT_SET,
};
pub use state::{FactKey, HistoryEntry, StateError, StoryState, Value};
