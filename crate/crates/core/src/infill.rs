//! Freeform narration backed by a language model: sampling fresh story
//! settings, and rewriting template stories as natural prose one action at a
//! time, with a judge that checks every tracked state change survived the
//! rewrite.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::apply;
use crate::builtin::ContextParams;
use crate::context::{Person, StoryContext};
use crate::oracle::OracleError;
use crate::remote::RemoteClient;
use crate::render::{
    render_action, render_story, scene_line, RenderStyle, RenderedLine, RenderedStory,
};
use crate::state::{fact_keys, FactKey, StoryState, Value};

/// Prompt templates shipped with the crate. Placeholders are `{name}`
/// tokens; every template is sent verbatim apart from those substitutions.
pub mod prompts {
    /// Asks for a complete story setting: cast, rooms, object, containers,
    /// and chat topics, in a fixed sectioned format.
    pub const CONTEXT_SAMPLE: &str = include_str!("../assets/prompts/context_sample.txt");
    /// Asks for a pool of person names.
    pub const NAMES_LIST: &str = include_str!("../assets/prompts/names_list.txt");
    /// Asks for a pool of general settings to place stories in.
    pub const LOCATIONS_LIST: &str = include_str!("../assets/prompts/locations_list.txt");
    /// System prompt used for every narration call.
    pub const INFILL_SYSTEM: &str = include_str!("../assets/prompts/infill_system.txt");
    /// Writes the scene-setting paragraph that precedes any action.
    pub const INFILL_OPENING: &str = include_str!("../assets/prompts/infill_opening.txt");
    /// Suggests one goal per character, fixed for the whole story.
    pub const INFILL_GOALS: &str = include_str!("../assets/prompts/infill_goals.txt");
    /// Continues the story so that it conveys one more action.
    pub const INFILL_STEP: &str = include_str!("../assets/prompts/infill_step.txt");
}

/// Replaces each `{key}` token with its value.
fn fill(template: &str, pairs: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (key, value) in pairs {
        out = out.replace(&format!("{{{key}}}"), value);
    }
    out
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// How long each rewritten step should be.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LengthDesideratum {
    OneSentence,
    UpToTwoSentences,
}

impl LengthDesideratum {
    fn phrase(self) -> &'static str {
        match self {
            LengthDesideratum::OneSentence => "with a single sentence",
            LengthDesideratum::UpToTwoSentences => "with up to two sentences",
        }
    }
}

/// Whether rewritten steps narrate plainly or quote the characters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TextType {
    Declarative,
    Conversational,
}

impl TextType {
    fn instruction(self) -> &'static str {
        match self {
            TextType::Declarative => {
                "Make the new text be declarative, without including conversations."
            }
            TextType::Conversational => {
                "Make the new text conversational, using direct quotes to convey the words spoken by a character."
            }
        }
    }
}

/// Settings for one infill run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct InfillConfig {
    /// Length target applied to every step; `None` draws one per step.
    pub length_desideratum: Option<LengthDesideratum>,
    /// Tone applied to every step; `None` draws one per step.
    pub text_type: Option<TextType>,
    /// Ask for one goal per character up front and keep them fixed for the
    /// whole story.
    pub include_goals: bool,
    /// Check each candidate against the tracked state changes and reject any
    /// that lost or altered one.
    pub judge_enabled: bool,
    /// Generation calls allowed per action before giving up. Must be at
    /// least 1.
    pub max_attempts_per_step: u32,
    /// Continuations requested from each generation call. Must be at least
    /// 1.
    pub candidates_per_call: u32,
    /// Seed for the per-step length and tone draws.
    pub seed: u64,
}

impl Default for InfillConfig {
    fn default() -> Self {
        InfillConfig {
            length_desideratum: None,
            text_type: None,
            include_goals: false,
            judge_enabled: true,
            max_attempts_per_step: 3,
            candidates_per_call: 2,
            seed: 0,
        }
    }
}

// ---------------------------------------------------------------------------
// Results and errors
// ---------------------------------------------------------------------------

/// One remote call made during an infill run, kept for the transcript log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InfillExchange {
    /// What the call was for: `opening`, `goals`, `step N candidates`, or
    /// `step N judge`.
    pub purpose: String,
    pub prompt: String,
    pub response: String,
}

/// A completed infill: the prose, how many generation calls each action
/// took, and every remote exchange in order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InfillOutcome {
    pub story: RenderedStory,
    /// One entry per action; `1` means the first call produced an accepted
    /// candidate.
    pub attempts_per_step: Vec<u32>,
    pub transcript: Vec<InfillExchange>,
}

#[derive(Debug, Error)]
pub enum InfillError {
    #[error("invalid infill configuration: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Remote(#[from] OracleError),
    #[error("no acceptable continuation for action {step} after {attempts} generation calls")]
    AttemptsExhausted {
        step: usize,
        attempts: u32,
        /// The prose accepted before the failing step.
        partial: RenderedStory,
        transcript: Vec<InfillExchange>,
    },
}

// ---------------------------------------------------------------------------
// Infilling
// ---------------------------------------------------------------------------

/// One line per character: `- Name, persona.`
fn people_description(ctx: &StoryContext) -> String {
    ctx.people
        .iter()
        .map(|p| {
            if p.persona.is_empty() {
                format!("- {}.", p.name)
            } else {
                format!("- {}, {}.", p.name, p.persona.trim_end_matches('.'))
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// A judge-checkable statement that `key` now holds `value`, or `None` for
/// values no statement template covers (nothing reverts to `Unknown`, and
/// topics never become unknown again).
fn fact_statement(ctx: &StoryContext, key: FactKey, value: Value) -> Option<String> {
    let object = &ctx.object;
    Some(match key {
        FactKey::PersonRoom(p) => {
            let name = ctx.person_name(p);
            match value {
                Value::Room(r) => format!("{name} is now in the {}", ctx.room_name(r)),
                Value::Nowhere => format!("{name} is no longer in any room of the story"),
                _ => return None,
            }
        }
        FactKey::ObjectRoom => match value {
            Value::Room(r) => format!("the {object} is now in the {}", ctx.room_name(r)),
            _ => return None,
        },
        FactKey::ObjectContainer => match value {
            Value::Container(c) => {
                format!("the {object} is now inside the {}", ctx.container_name(c))
            }
            Value::Nowhere => {
                format!("the {object} is now out in the open, not inside any container")
            }
            _ => return None,
        },
        FactKey::VisibleState | FactKey::InvisibleState => match value {
            Value::Phrase(ph) => format!("the {object} {}", ctx.phrase_text(ph)),
            _ => return None,
        },
        FactKey::TopicKnown(t) => match value {
            Value::Bool(true) => format!("the {} has come up", ctx.topic_name(t)),
            _ => return None,
        },
    })
}

/// Statements covering every world fact and first-order belief the last
/// action changed. The actor's own beliefs are skipped — authorship already
/// implies them — and a changed belief that matches the new truth is phrased
/// as awareness rather than belief.
fn changed_fact_statements(pre: &StoryState, post: &StoryState) -> Vec<String> {
    let ctx = pre.context();
    let actor = post.history().last().map(|h| h.action.actor);
    let mut out = Vec::new();
    for key in fact_keys(ctx) {
        let value = post.world(key);
        if pre.world(key) != value {
            if let Some(statement) = fact_statement(ctx, key, value) {
                out.push(statement);
            }
        }
    }
    for believer in ctx.person_ids() {
        if Some(believer) == actor {
            continue;
        }
        for key in fact_keys(ctx) {
            let value = post.belief(believer, key);
            if pre.belief(believer, key) == value {
                continue;
            }
            let Some(statement) = fact_statement(ctx, key, value) else {
                continue;
            };
            let name = ctx.person_name(believer);
            if value == post.world(key) {
                out.push(format!("{name} is aware that {statement}"));
            } else {
                out.push(format!("{name} now believes that {statement}"));
            }
        }
    }
    out
}

fn judge_prompt(story_so_far: &str, candidate: &str, statements: &[String]) -> String {
    let mut numbered = String::new();
    for (i, statement) in statements.iter().enumerate() {
        numbered.push_str(&format!("{}. {}.\n", i + 1, statement));
    }
    format!(
        "Read the story and its continuation, then check the continuation against each statement.\n\n\
         STORY SO FAR:\n{story_so_far}\n\n\
         CONTINUATION:\n{candidate}\n\n\
         For each numbered statement, answer \"yes\" if the continuation, read in the context of the story so far, clearly conveys or implies it, and \"no\" otherwise.\n\n\
         STATEMENTS:\n{numbered}\n\
         Answer with one line per statement, in the form \"1. yes\" or \"1. no\", and no other text."
    )
}

/// Extracts per-statement verdicts from a judge reply; `None` when any
/// statement's verdict is missing or unreadable.
fn parse_judge_reply(text: &str, count: usize) -> Option<Vec<bool>> {
    let mut verdicts = vec![None; count];
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (num, rest) = line.split_once(['.', ')', ':'])?;
        let index: usize = num.trim().parse().ok()?;
        if index == 0 || index > count {
            return None;
        }
        let verdict = rest.trim().to_ascii_lowercase();
        verdicts[index - 1] = if verdict.starts_with("yes") {
            Some(true)
        } else if verdict.starts_with("no") {
            Some(false)
        } else {
            return None;
        };
    }
    verdicts.into_iter().collect()
}

/// Splits a generation reply into candidate continuations. Replies are
/// expected to repeat the `STORY CONTINUATION:` marker once per candidate; a
/// reply with no marker at all is taken as a single candidate.
fn split_candidates(response: &str) -> Vec<String> {
    let parts: Vec<String> = response
        .split("STORY CONTINUATION:")
        .skip(1)
        .map(|part| part.trim().trim_end_matches("<fill>").trim().to_string())
        .filter(|part| !part.is_empty())
        .collect();
    if parts.is_empty() {
        let whole = response.trim();
        if whole.is_empty() {
            Vec::new()
        } else {
            vec![whole.to_string()]
        }
    } else {
        parts
    }
}

fn accumulated_text(opening: &str, lines: &[RenderedLine]) -> String {
    let mut parts = vec![opening];
    parts.extend(lines.iter().map(|l| l.text.as_str()));
    parts.join("\n")
}

/// Rewrites a template story as freeform prose, one action at a time.
///
/// The opening is written first from the whole script (and the object's
/// scene-setting line is kept after it, so the prose answers the same
/// questions the template story does). When goals are enabled they are
/// suggested once and held fixed. Each action is then conveyed by a fresh
/// continuation: the model is asked for several candidates, and when the
/// judge is enabled a candidate is accepted only if it preserves every world
/// fact and first-order belief the action changed. Length and tone are taken
/// from the config, or drawn per step from `config.seed` when unset.
///
/// # Errors
///
/// [`InfillError::Config`] for a zero attempt or candidate budget;
/// [`InfillError::Remote`] when the endpoint fails after its retries;
/// [`InfillError::AttemptsExhausted`] when no candidate for some action
/// passes the judge, carrying the prose accepted so far.
pub fn infill(
    state: &StoryState,
    client: &RemoteClient,
    config: &InfillConfig,
) -> Result<InfillOutcome, InfillError> {
    if config.max_attempts_per_step == 0 {
        return Err(InfillError::Config("max_attempts_per_step must be at least 1"));
    }
    if config.candidates_per_call == 0 {
        return Err(InfillError::Config("candidates_per_call must be at least 1"));
    }
    let ctx = state.context();
    let script = render_story(state);
    let characters = people_description(ctx);
    let system = prompts::INFILL_SYSTEM.trim();
    let mut transcript = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let opening_prompt = fill(
        prompts::INFILL_OPENING,
        &[
            ("story_script", script.as_str()),
            ("characters_description", characters.as_str()),
        ],
    );
    let opening_reply = client.chat(Some(system), &opening_prompt, 256)?;
    transcript.push(InfillExchange {
        purpose: "opening".to_string(),
        prompt: opening_prompt,
        response: opening_reply.clone(),
    });
    let opening = format!("{}\n{}", opening_reply.trim(), scene_line(ctx));

    let goals = if config.include_goals {
        let goals_prompt = fill(
            prompts::INFILL_GOALS,
            &[
                ("story_script", script.as_str()),
                ("characters_description", characters.as_str()),
            ],
        );
        let reply = client.chat(Some(system), &goals_prompt, 512)?;
        transcript.push(InfillExchange {
            purpose: "goals".to_string(),
            prompt: goals_prompt,
            response: reply.clone(),
        });
        reply.trim().to_string()
    } else {
        String::new()
    };

    let mut lines: Vec<RenderedLine> = Vec::new();
    let mut attempts_per_step = Vec::new();
    let mut cursor = StoryState::init(ctx.clone()).expect("context was already validated");

    for (i, action) in state.actions().enumerate() {
        let next = apply(&cursor, action).expect("recorded history replays cleanly");
        let new_information = render_action(&cursor, action);
        let statements = changed_fact_statements(&cursor, &next);
        let length = config
            .length_desideratum
            .unwrap_or_else(|| match rng.random_bool(0.5) {
                true => LengthDesideratum::OneSentence,
                false => LengthDesideratum::UpToTwoSentences,
            });
        let text_type = config.text_type.unwrap_or_else(|| match rng.random_bool(0.5) {
            true => TextType::Declarative,
            false => TextType::Conversational,
        });
        let story_so_far = accumulated_text(&opening, &lines);
        let step_prompt = fill(
            prompts::INFILL_STEP,
            &[
                ("story_length", length.phrase()),
                ("infilling_text_type", text_type.instruction()),
                ("num_tries_completions", &config.candidates_per_call.to_string()),
                ("people_with_personas", &characters),
                ("optional_characters_goals", &goals),
                ("new_information", &new_information),
                ("story_context", &story_so_far),
            ],
        );

        let mut accepted: Option<String> = None;
        let mut attempts = 0;
        while attempts < config.max_attempts_per_step && accepted.is_none() {
            attempts += 1;
            let response = client.chat(Some(system), &step_prompt, 1024)?;
            transcript.push(InfillExchange {
                purpose: format!("step {i} candidates"),
                prompt: step_prompt.clone(),
                response: response.clone(),
            });
            for candidate in split_candidates(&response) {
                if !config.judge_enabled || statements.is_empty() {
                    accepted = Some(candidate);
                    break;
                }
                let prompt = judge_prompt(&story_so_far, &candidate, &statements);
                let reply = client.chat(None, &prompt, 256)?;
                transcript.push(InfillExchange {
                    purpose: format!("step {i} judge"),
                    prompt,
                    response: reply.clone(),
                });
                let all_yes = parse_judge_reply(&reply, statements.len())
                    .is_some_and(|verdicts| verdicts.iter().all(|&v| v));
                if all_yes {
                    accepted = Some(candidate);
                    break;
                }
            }
        }
        let Some(text) = accepted else {
            return Err(InfillError::AttemptsExhausted {
                step: i,
                attempts,
                partial: RenderedStory {
                    opening: Some(opening),
                    lines,
                    style: RenderStyle::Infilled,
                },
                transcript,
            });
        };
        attempts_per_step.push(attempts);
        lines.push(RenderedLine {
            actions: i..i + 1,
            text,
        });
        cursor = next;
    }

    Ok(InfillOutcome {
        story: RenderedStory {
            opening: Some(opening),
            lines,
            style: RenderStyle::Infilled,
        },
        attempts_per_step,
        transcript,
    })
}

// ---------------------------------------------------------------------------
// Remote context sampling
// ---------------------------------------------------------------------------

/// Name suggestions offered to the model when sampling a setting.
const NAME_POOL: &[&str] = &[
    "Avery", "Beatriz", "Caleb", "Dana", "Elena", "Felix", "Grace", "Hassan", "Imani", "Jonas",
    "Keiko", "Liam", "Maya", "Noah", "Olivia", "Priya", "Quentin", "Rosa", "Samuel", "Tara",
    "Umar", "Vera", "Wesley", "Ximena", "Yusuf", "Zoe", "Andre", "Bianca", "Cormac", "Delia",
    "Ethan", "Farah",
];

/// Setting suggestions offered to the model when sampling a setting.
const LOCATION_POOL: &[&str] = &[
    "a small-town bakery",
    "a university research lab",
    "a community theater",
    "a family-run vineyard",
    "a busy veterinary clinic",
    "an antique bookshop",
    "a mountain weather station",
    "a ceramics studio",
    "a harbor-side fish market",
    "a volunteer fire station",
    "a costume workshop",
    "a botanical garden office",
    "a radio station late at night",
    "a climbing gym",
    "a museum archive",
    "a food truck kitchen",
    "a rural post office",
    "an observatory",
    "a tailor's atelier",
    "a houseboat",
    "a chess club",
    "a recording studio",
    "a greenhouse",
    "a lighthouse keeper's quarters",
];

#[derive(Debug, Error)]
pub enum ContextSampleError {
    #[error(transparent)]
    Remote(#[from] OracleError),
    #[error("could not obtain a valid story setting after {attempts} attempts: {last_error}")]
    Parse { attempts: u32, last_error: String },
}

/// The sections a sampling reply must carry, in prompt order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Names,
    Narration,
    Room,
    AltRoom,
    Object,
    Containers,
    Topics,
}

impl Section {
    const ALL: [Section; 7] = [
        Section::Names,
        Section::Narration,
        Section::Room,
        Section::AltRoom,
        Section::Object,
        Section::Containers,
        Section::Topics,
    ];

    /// The part of the header line that identifies the section. The two list
    /// headers embed the requested count, so only their tails are matched.
    fn marker(self) -> &'static str {
        match self {
            Section::Names => "LIST CHARACTERS' NAMES",
            Section::Narration => "GIVE SHORT STORY CONTEXT",
            Section::Room => "ROOM IN WHICH THIS STORY BEGINS",
            Section::AltRoom => "NAME ONE REASONABLE ALTERNATIVE ROOM THEY COULD MOVE TO",
            Section::Object => "NAME ONE OBJECT TO BE MOVED BY A PERSON DURING THE STORY",
            Section::Containers => "OPAQUE CONTAINERS THAT COULD CONTAIN THIS OBJECT",
            Section::Topics => "TOPICS THEY COULD BE CHATTING ABOUT",
        }
    }
}

/// Recognizes a section header line, returning any content that follows the
/// colon on the same line.
fn detect_header(line: &str) -> Option<(Section, &str)> {
    let trimmed = line.trim();
    for section in Section::ALL {
        if let Some(pos) = trimmed.find(section.marker()) {
            let after = &trimmed[pos + section.marker().len()..];
            let content = after.strip_prefix(':').unwrap_or(after).trim();
            return Some((section, content));
        }
    }
    None
}

/// Strips `1.`/`2)`-style numbering or a `-`/`*` bullet from a list item.
fn strip_item_prefix(s: &str) -> &str {
    let t = s.trim_start();
    if let Some(rest) = t.strip_prefix('-').or_else(|| t.strip_prefix('*')) {
        return rest.trim_start();
    }
    let digits = t.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits == 0 {
        return t;
    }
    let rest = &t[digits..];
    rest.strip_prefix('.')
        .or_else(|| rest.strip_prefix(')'))
        .map(|r| r.trim_start())
        .unwrap_or(t)
}

/// Normalizes a single name-like answer: numbering, surrounding whitespace,
/// a trailing period, and a leading article are dropped.
fn clean_name(raw: &str) -> String {
    let s = strip_item_prefix(raw).trim().trim_end_matches('.').trim();
    for article in ["The ", "the ", "An ", "an ", "A ", "a "] {
        if let Some(rest) = s.strip_prefix(article) {
            return rest.to_string();
        }
    }
    s.to_string()
}

/// Parses `Name, persona.` list items.
fn parse_people(lines: &[String], want: usize) -> Result<Vec<Person>, String> {
    let mut people = Vec::new();
    for raw in lines {
        let item = strip_item_prefix(raw).trim();
        if item.is_empty() {
            continue;
        }
        let (name, persona) = match item.split_once(',') {
            Some((n, p)) => (n.trim(), p.trim().trim_end_matches('.').trim()),
            None => (item.trim_end_matches('.').trim(), ""),
        };
        if name.is_empty() {
            continue;
        }
        people.push(Person {
            name: name.to_string(),
            persona: persona.to_string(),
        });
    }
    if people.len() < want {
        return Err(format!("expected {} characters, found {}", want, people.len()));
    }
    people.truncate(want);
    Ok(people)
}

fn parse_name_list(lines: &[String], want: usize, what: &str) -> Result<Vec<String>, String> {
    let names: Vec<String> = lines
        .iter()
        .map(|l| clean_name(l))
        .filter(|n| !n.is_empty())
        .collect();
    if names.len() < want {
        return Err(format!("expected {} {}, found {}", want, what, names.len()));
    }
    Ok(names.into_iter().take(want).collect())
}

/// Parses a sectioned sampling reply into a validated story context.
fn parse_context_response(text: &str, params: &ContextParams) -> Result<StoryContext, String> {
    let mut sections: [Vec<String>; 7] = Default::default();
    let mut current: Option<Section> = None;
    for line in text.lines() {
        if let Some((section, inline)) = detect_header(line) {
            if !inline.is_empty() {
                sections[section as usize].push(inline.to_string());
            }
            current = Some(section);
        } else if let Some(section) = current {
            let line = line.trim();
            if !line.is_empty() {
                sections[section as usize].push(line.to_string());
            }
        }
    }
    let get = |section: Section| -> Result<&Vec<String>, String> {
        let lines = &sections[section as usize];
        if lines.is_empty() {
            Err(format!("response is missing the \"{}\" section", section.marker()))
        } else {
            Ok(lines)
        }
    };

    let people = parse_people(get(Section::Names)?, params.people)?;
    let narration = get(Section::Narration)?.join(" ");
    let room = clean_name(&get(Section::Room)?[0]);
    let alt_room = clean_name(&get(Section::AltRoom)?[0]);
    let object = clean_name(&get(Section::Object)?[0]);
    let containers = parse_name_list(get(Section::Containers)?, params.containers, "containers")?;
    let topics = parse_name_list(get(Section::Topics)?, params.topics, "topics")?;

    let ctx = StoryContext {
        people,
        rooms: vec![room, alt_room],
        object,
        containers,
        topics,
        visible_updates: Vec::new(),
        invisible_updates: Vec::new(),
        opening_narration: Some(narration),
    };
    ctx.validate().map_err(|e| e.to_string())?;
    Ok(ctx)
}

/// Samples a fresh story setting from a language model.
///
/// The prompt suggests `params.people` names and one general location, both
/// drawn by `seed` from built-in pools, and asks for a sectioned reply. A
/// reply that fails to parse or validate is retried with freshly drawn
/// suggestions, up to `max_attempts` total.
///
/// # Errors
///
/// [`ContextSampleError::Remote`] when the endpoint fails after its own
/// retries; [`ContextSampleError::Parse`] when every attempt produced an
/// unusable reply, carrying the last parse failure.
pub fn sample_context_remote(
    client: &RemoteClient,
    params: &ContextParams,
    seed: u64,
    max_attempts: u32,
) -> Result<StoryContext, ContextSampleError> {
    let attempts = max_attempts.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last_error = String::new();
    for _ in 0..attempts {
        let mut names: Vec<&str> = NAME_POOL.to_vec();
        names.shuffle(&mut rng);
        names.truncate(params.people);
        let location = LOCATION_POOL
            .choose(&mut rng)
            .copied()
            .expect("the location pool is not empty");
        let prompt = fill(
            prompts::CONTEXT_SAMPLE,
            &[
                ("num_people", &params.people.to_string()),
                ("num_containers", &params.containers.to_string()),
                ("num_topics", &params.topics.to_string()),
                ("sampled_location", location),
                ("sampled_names", &names.join(", ")),
            ],
        );
        let response = client.chat(None, &prompt, 1024)?;
        match parse_context_response(&response, params) {
            Ok(ctx) => return Ok(ctx),
            Err(e) => last_error = e,
        }
    }
    Err(ContextSampleError::Parse { attempts, last_error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{ActionBody, ActionInstance};
    use crate::builtin::sample_builtin;
    use crate::context::{ContainerId, PersonId, RoomId};
    use crate::remote::testing::{chat_body, spawn_server};
    use std::sync::Arc;

    /// Both people enter the main room, then the first hides the object.
    /// The steps change 1, 2, and 2 tracked facts respectively (the actor's
    /// own beliefs are never asserted).
    fn three_step_story() -> StoryState {
        let ctx = sample_builtin(
            0,
            &ContextParams {
                people: 2,
                containers: 2,
                topics: 2,
            },
        )
        .unwrap();
        let mut state = StoryState::init(Arc::new(ctx)).unwrap();
        let steps = [
            ActionInstance::new(PersonId(0), ActionBody::Enter { room: RoomId(0) }),
            ActionInstance::new(PersonId(1), ActionBody::Enter { room: RoomId(0) }),
            ActionInstance::new(
                PersonId(0),
                ActionBody::MoveObjContainer {
                    container: ContainerId(0),
                },
            ),
        ];
        for step in steps {
            state = apply(&state, step).unwrap();
        }
        state
    }

    fn fast_client(url: &str) -> RemoteClient {
        RemoteClient::new("judge-model", url)
            .with_attempts(1)
            .with_auth_env("INFILL_TEST_TOKEN")
    }

    #[test]
    fn infill_accepts_first_candidates_when_judge_is_off() {
        let state = three_step_story();
        let (url, server) = spawn_server(vec![
            (200, chat_body("Dust hung in the evening light. The house was quiet.")),
            (
                200,
                chat_body("STORY CONTINUATION: First try for step one.\n\nSTORY CONTINUATION: Second try for step one."),
            ),
            (200, chat_body("STORY CONTINUATION: Only try for step two.")),
            (200, chat_body("STORY CONTINUATION: Only try for step three.")),
        ]);
        let config = InfillConfig {
            judge_enabled: false,
            length_desideratum: Some(LengthDesideratum::OneSentence),
            text_type: Some(TextType::Declarative),
            ..InfillConfig::default()
        };
        let outcome = infill(&state, &fast_client(&url), &config).unwrap();
        let requests = server.join().unwrap();

        assert_eq!(outcome.attempts_per_step, vec![1, 1, 1]);
        assert_eq!(outcome.story.lines.len(), 3);
        assert_eq!(outcome.story.lines[0].text, "First try for step one.");
        assert_eq!(outcome.story.lines[2].text, "Only try for step three.");
        assert!(outcome.story.covers(3));
        assert_eq!(outcome.story.style, RenderStyle::Infilled);
        // The scene-setting line survives after the generated opening so the
        // prose still answers where the object started.
        let opening = outcome.story.opening.as_deref().unwrap();
        assert!(opening.starts_with("Dust hung"));
        assert!(opening.ends_with(&scene_line(state.context())));
        assert_eq!(outcome.transcript.len(), 4);

        // The step prompts carried the pinned desiderata and the system
        // prompt rode along on every generation call.
        assert!(requests[1].contains("with a single sentence"));
        assert!(requests[1].contains("without including conversations"));
        assert!(requests[1].contains("expert writer"));
        // Later steps see the accepted text as their story context.
        assert!(requests[2].contains("First try for step one."));
        assert!(requests[3].contains("Only try for step two."));
    }

    #[test]
    fn judge_rejections_fall_through_to_the_next_candidate() {
        let state = three_step_story();
        let (url, server) = spawn_server(vec![
            (200, chat_body("A quiet morning.")),
            (
                200,
                chat_body("STORY CONTINUATION: Bad retelling.\n\nSTORY CONTINUATION: Good retelling."),
            ),
            (200, chat_body("1. no")),
            (200, chat_body("1. yes")),
            (200, chat_body("STORY CONTINUATION: Step two text.")),
            (200, chat_body("1. yes\n2. yes")),
            (200, chat_body("STORY CONTINUATION: Step three text.")),
            (200, chat_body("1. yes\n2. yes")),
        ]);
        let config = InfillConfig {
            judge_enabled: true,
            length_desideratum: Some(LengthDesideratum::UpToTwoSentences),
            text_type: Some(TextType::Conversational),
            ..InfillConfig::default()
        };
        let outcome = infill(&state, &fast_client(&url), &config).unwrap();
        let requests = server.join().unwrap();

        assert_eq!(outcome.attempts_per_step, vec![1, 1, 1]);
        assert_eq!(outcome.story.lines[0].text, "Good retelling.");
        assert_eq!(outcome.story.lines[1].text, "Step two text.");
        // Each judged candidate appears in its own judge request.
        assert!(requests[2].contains("Bad retelling."));
        assert!(requests[3].contains("Good retelling."));
        // Judge prompts assert the tracked changes: the second entrance is
        // witnessed, and the move puts the object inside a container.
        assert!(requests[5].contains("is aware that"));
        assert!(requests[7].contains("is now inside the"));
    }

    #[test]
    fn exhausted_attempts_return_the_partial_story() {
        let state = three_step_story();
        // The first step changes one tracked fact; every candidate in both
        // attempts is rejected.
        let (url, _server) = spawn_server(vec![
            (200, chat_body("An opening.")),
            (200, chat_body("STORY CONTINUATION: Try A.")),
            (200, chat_body("1. no")),
            (200, chat_body("STORY CONTINUATION: Try B.")),
            (200, chat_body("1. no")),
        ]);
        let config = InfillConfig {
            judge_enabled: true,
            max_attempts_per_step: 2,
            length_desideratum: Some(LengthDesideratum::OneSentence),
            text_type: Some(TextType::Declarative),
            ..InfillConfig::default()
        };
        let err = infill(&state, &fast_client(&url), &config).unwrap_err();
        match err {
            InfillError::AttemptsExhausted {
                step,
                attempts,
                partial,
                transcript,
            } => {
                assert_eq!(step, 0);
                assert_eq!(attempts, 2);
                assert!(partial.lines.is_empty());
                assert!(partial.opening.is_some());
                assert_eq!(transcript.len(), 5);
            }
            other => panic!("expected AttemptsExhausted, got {other:?}"),
        }
    }

    #[test]
    fn desiderata_draws_are_deterministic_per_seed() {
        let state = three_step_story();
        let responses = || {
            vec![
                (200, chat_body("An opening.")),
                (200, chat_body("STORY CONTINUATION: One.")),
                (200, chat_body("STORY CONTINUATION: Two.")),
                (200, chat_body("STORY CONTINUATION: Three.")),
            ]
        };
        let config = InfillConfig {
            judge_enabled: false,
            seed: 11,
            ..InfillConfig::default()
        };
        let (url_a, _sa) = spawn_server(responses());
        let a = infill(&state, &fast_client(&url_a), &config).unwrap();
        let (url_b, _sb) = spawn_server(responses());
        let b = infill(&state, &fast_client(&url_b), &config).unwrap();
        let prompts_a: Vec<&str> = a.transcript.iter().map(|e| e.prompt.as_str()).collect();
        let prompts_b: Vec<&str> = b.transcript.iter().map(|e| e.prompt.as_str()).collect();
        assert_eq!(prompts_a, prompts_b);
    }

    #[test]
    fn zero_budgets_are_rejected() {
        let state = three_step_story();
        let client = RemoteClient::new("m", "http://127.0.0.1:1/v1");
        let bad = InfillConfig {
            max_attempts_per_step: 0,
            ..InfillConfig::default()
        };
        assert!(matches!(
            infill(&state, &client, &bad),
            Err(InfillError::Config(_))
        ));
        let bad = InfillConfig {
            candidates_per_call: 0,
            ..InfillConfig::default()
        };
        assert!(matches!(
            infill(&state, &client, &bad),
            Err(InfillError::Config(_))
        ));
    }

    const GOOD_SAMPLE_REPLY: &str = "\
LIST CHARACTERS' NAMES:
1. Elena, a careful archivist.
2. Jonas, a restless apprentice.
3. Priya, a visiting conservator.

GIVE SHORT STORY CONTEXT:
Elena, Jonas, and Priya stood around the sorting table in the museum archive,
comparing notes on the newly arrived crates.

ROOM IN WHICH THIS STORY BEGINS: the sorting room

NAME ONE REASONABLE ALTERNATIVE ROOM THEY COULD MOVE TO: the cold-storage vault

NAME ONE OBJECT TO BE MOVED BY A PERSON DURING THE STORY: a brass compass

LIST 2 REASONABLE OPAQUE CONTAINERS THAT COULD CONTAIN THIS OBJECT:
1. an archival box
2. a velvet-lined case

LIST 2 DISTINCT AND REASONABLE TOPICS THEY COULD BE CHATTING ABOUT:
1. the upcoming exhibition
2. the humidity readings";

    #[test]
    fn remote_setting_sampling_parses_a_sectioned_reply() {
        let params = ContextParams {
            people: 3,
            containers: 2,
            topics: 2,
        };
        let (url, server) = spawn_server(vec![(200, chat_body(GOOD_SAMPLE_REPLY))]);
        let ctx = sample_context_remote(&fast_client(&url), &params, 5, 3).unwrap();
        let requests = server.join().unwrap();

        let names: Vec<&str> = ctx.people.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["Elena", "Jonas", "Priya"]);
        assert_eq!(ctx.people[0].persona, "a careful archivist");
        assert_eq!(ctx.rooms, ["sorting room", "cold-storage vault"]);
        assert_eq!(ctx.object, "brass compass");
        assert_eq!(ctx.containers, ["archival box", "velvet-lined case"]);
        assert_eq!(ctx.topics, ["upcoming exhibition", "humidity readings"]);
        let narration = ctx.opening_narration.as_deref().unwrap();
        assert!(narration.starts_with("Elena, Jonas, and Priya"));
        assert!(narration.ends_with("crates."));
        assert!(ctx.validate().is_ok());

        // The request carried the requested counts and the seeded
        // suggestions.
        assert!(requests[0].contains("3 people"));
        assert!(requests[0].contains("LIST 2 REASONABLE OPAQUE CONTAINERS"));
    }

    #[test]
    fn missing_sections_are_reported_by_name_after_retries() {
        let reply_without_room: String = GOOD_SAMPLE_REPLY
            .lines()
            .filter(|l| !l.contains("ROOM IN WHICH THIS STORY BEGINS"))
            .collect::<Vec<_>>()
            .join("\n");
        let params = ContextParams {
            people: 3,
            containers: 2,
            topics: 2,
        };
        let (url, _server) = spawn_server(vec![
            (200, chat_body(&reply_without_room)),
            (200, chat_body(&reply_without_room)),
        ]);
        let err = sample_context_remote(&fast_client(&url), &params, 5, 2).unwrap_err();
        match err {
            ContextSampleError::Parse { attempts, last_error } => {
                assert_eq!(attempts, 2);
                assert!(
                    last_error.contains("ROOM IN WHICH THIS STORY BEGINS"),
                    "error should name the missing section: {last_error}"
                );
            }
            other => panic!("expected Parse, got {other:?}"),
        }
    }

    #[test]
    fn judge_reply_parsing_is_strict() {
        assert_eq!(parse_judge_reply("1. yes\n2. yes", 2), Some(vec![true, true]));
        assert_eq!(parse_judge_reply("1) Yes.\n2: no", 2), Some(vec![true, false]));
        // Missing a verdict, out-of-range numbering, or free text all fail.
        assert_eq!(parse_judge_reply("1. yes", 2), None);
        assert_eq!(parse_judge_reply("3. yes", 2), None);
        assert_eq!(parse_judge_reply("the first is fine", 2), None);
    }

    #[test]
    fn candidate_splitting_tolerates_markerless_replies() {
        let parts = split_candidates("STORY CONTINUATION: A.\n\nSTORY CONTINUATION: B.");
        assert_eq!(parts, ["A.", "B."]);
        assert_eq!(split_candidates("Just prose."), ["Just prose."]);
        assert!(split_candidates("   ").is_empty());
    }
}
