//! Question generation with guaranteed gold answers.
//!
//! Every question is instantiated from a fixed template family and its gold
//! answer is read directly out of the tracked state, so correctness never
//! depends on any model. Four families exist:
//!
//! * location questions about the object, in room and container flavors, at
//!   four epistemic orders: the true current value, memory of an earlier
//!   value (story beginning, or right before a specific move), a person's
//!   belief, and a person's belief about another person's belief;
//! * topic-awareness questions ("does P know about T?") at first and second
//!   order;
//! * object-state questions ("does P believe the object <phrase>?") at first
//!   and second order.
//!
//! Questions are only emitted when the gold answer is well-defined: location
//! golds must be a concrete room or container, memory questions must point at
//! a unique describable action, state questions only cover phrases some
//! action actually applied, and topic questions only cover topics actually
//! discussed.

use serde::{Deserialize, Serialize};

use crate::action::ActionBody;
use crate::context::{PersonId, StoryContext};
use crate::state::{FactKey, StoryState, Value};

// ---------------------------------------------------------------------------
// Item model
// ---------------------------------------------------------------------------

/// The closed answer set a question draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QuestionCategory {
    /// Answered with a room name.
    #[serde(rename = "room")]
    Room,
    /// Answered with a container name.
    #[serde(rename = "container")]
    Container,
    /// Answered with `yes` or `no`.
    #[serde(rename = "yes-no")]
    YesNo,
    /// Answered with `knows about it` or `does not know about it`.
    #[serde(rename = "knows-about")]
    KnowsAbout,
}

/// The epistemic depth of a question.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionOrder {
    /// Asks about the world as it is now.
    GroundTruth,
    /// Asks about the world as it was at an earlier point.
    Memory,
    /// Asks what one person believes.
    First,
    /// Asks what one person believes another person believes.
    Second,
}

/// Identifies the template a question was instantiated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    RoomMemoryBeginning,
    RoomGroundTruthNow,
    RoomMemoryBeforeAction,
    RoomBeliefFirst,
    RoomBeliefSecond,
    ContainerMemoryBeginning,
    ContainerGroundTruthNow,
    ContainerMemoryBeforeAction,
    ContainerBeliefFirst,
    ContainerBeliefSecond,
    TopicKnowledgeFirst,
    TopicKnowledgeSecond,
    StateBeliefFirst,
    StateBeliefSecond,
}

impl TemplateId {
    /// Every template, in generation order.
    pub const ALL: [TemplateId; 14] = [
        TemplateId::RoomMemoryBeginning,
        TemplateId::RoomGroundTruthNow,
        TemplateId::RoomMemoryBeforeAction,
        TemplateId::RoomBeliefFirst,
        TemplateId::RoomBeliefSecond,
        TemplateId::ContainerMemoryBeginning,
        TemplateId::ContainerGroundTruthNow,
        TemplateId::ContainerMemoryBeforeAction,
        TemplateId::ContainerBeliefFirst,
        TemplateId::ContainerBeliefSecond,
        TemplateId::TopicKnowledgeFirst,
        TemplateId::TopicKnowledgeSecond,
        TemplateId::StateBeliefFirst,
        TemplateId::StateBeliefSecond,
    ];
}

/// A generated question together with its guaranteed gold answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAItem {
    /// Natural-language question text.
    pub question: String,
    /// Gold answer, drawn from the category's closed answer set.
    pub gold: String,
    pub category: QuestionCategory,
    pub order: QuestionOrder,
    /// Whether varying the believer changes the gold answer — i.e. whether
    /// the question discriminates between perspectives. Always false for
    /// ground-truth and memory questions.
    pub interesting: bool,
    pub template_id: TemplateId,
    /// For memory questions anchored to an action: the 1-based position of
    /// that action in the story.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub action_index: Option<usize>,
    /// True when the questioned belief diverges from the current world state
    /// (the classic false-belief situation). Derived, so not serialized.
    #[serde(skip, default)]
    pub false_belief: bool,
}

impl QAItem {
    /// Whether this is a belief question (first or second order).
    pub fn is_tom(&self) -> bool {
        matches!(self.order, QuestionOrder::First | QuestionOrder::Second)
    }
}

/// True when at least one belief question discriminates between
/// perspectives, i.e. the story cannot be answered by world tracking alone.
pub fn requires_tom(items: &[QAItem]) -> bool {
    items.iter().any(|q| q.is_tom() && q.interesting)
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

fn concrete_location(ctx: &StoryContext, value: Value) -> Option<String> {
    match value {
        Value::Room(r) => Some(ctx.room_name(r).to_string()),
        Value::Container(c) => Some(ctx.container_name(c).to_string()),
        _ => None,
    }
}

fn yes_no(b: bool) -> String {
    if b { "yes" } else { "no" }.to_string()
}

fn knows_about(b: bool) -> String {
    if b {
        "knows about it"
    } else {
        "does not know about it"
    }
    .to_string()
}

/// Location templates come in a room flavor and a container flavor; this
/// bundles what differs between them.
struct LocationFlavor {
    key: FactKey,
    category: QuestionCategory,
    noun: &'static str,
    beginning: TemplateId,
    now: TemplateId,
    before: TemplateId,
    first: TemplateId,
    second: TemplateId,
}

const LOCATION_FLAVORS: [LocationFlavor; 2] = [
    LocationFlavor {
        key: FactKey::ObjectRoom,
        category: QuestionCategory::Room,
        noun: "room",
        beginning: TemplateId::RoomMemoryBeginning,
        now: TemplateId::RoomGroundTruthNow,
        before: TemplateId::RoomMemoryBeforeAction,
        first: TemplateId::RoomBeliefFirst,
        second: TemplateId::RoomBeliefSecond,
    },
    LocationFlavor {
        key: FactKey::ObjectContainer,
        category: QuestionCategory::Container,
        noun: "container",
        beginning: TemplateId::ContainerMemoryBeginning,
        now: TemplateId::ContainerGroundTruthNow,
        before: TemplateId::ContainerMemoryBeforeAction,
        first: TemplateId::ContainerBeliefFirst,
        second: TemplateId::ContainerBeliefSecond,
    },
];

/// At least two distinct values among `golds` — the person slots matter.
///
/// A question is interesting when its *answer* changes as the person slots
/// are varied (for second-order questions, both slots, where the degenerate
/// self pair reads the person's own first-order belief). Callers must feed
/// answer-domain values: concrete locations only (people without a located
/// belief get no question and cannot make one interesting), and for binary
/// questions the derived answer rather than the raw tracked value.
fn varies(golds: impl IntoIterator<Item = Value>) -> bool {
    let mut first: Option<Value> = None;
    for v in golds {
        match first {
            None => first = Some(v),
            Some(f) if f != v => return true,
            Some(_) => {}
        }
    }
    false
}

fn is_located(v: &Value) -> bool {
    matches!(v, Value::Room(_) | Value::Container(_))
}

/// Generates the full question set for a story, in a deterministic order.
pub fn generate_questions(state: &StoryState) -> Vec<QAItem> {
    let ctx = state.context().clone();
    let object = &ctx.object;
    let people: Vec<PersonId> = ctx.person_ids().collect();
    let mut items = Vec::new();

    for flavor in &LOCATION_FLAVORS {
        let world_now = state.world(flavor.key);

        // Memory of the story's opening state.
        if let Some(gold) = concrete_location(&ctx, state.world_at(0, flavor.key).unwrap()) {
            items.push(QAItem {
                question: format!(
                    "In which {} was the {object} at the beginning?",
                    flavor.noun
                ),
                gold,
                category: flavor.category,
                order: QuestionOrder::Memory,
                interesting: false,
                template_id: flavor.beginning,
                action_index: None,
                false_belief: false,
            });
        }

        // The world as it stands after the last action.
        if let Some(gold) = concrete_location(&ctx, world_now) {
            items.push(QAItem {
                question: format!("In which {} is the {object} now?", flavor.noun),
                gold,
                category: flavor.category,
                order: QuestionOrder::GroundTruth,
                interesting: false,
                template_id: flavor.now,
                action_index: None,
                false_belief: false,
            });
        }

        // Memory anchored to a specific move. Only emitted when the clause
        // describing the move is unique in the story, so the question cannot
        // point at two different moments.
        let moves: Vec<(usize, PersonId, String)> = state
            .actions()
            .enumerate()
            .filter_map(|(i, action)| {
                let dest = match (flavor.category, action.body) {
                    (QuestionCategory::Room, ActionBody::MoveObjRoom { room }) => {
                        ctx.room_name(room).to_string()
                    }
                    (QuestionCategory::Container, ActionBody::MoveObjContainer { container }) => {
                        ctx.container_name(container).to_string()
                    }
                    _ => return None,
                };
                Some((i + 1, action.actor, dest))
            })
            .collect();
        for &(index, actor, ref dest) in &moves {
            let clause_count = moves
                .iter()
                .filter(|(_, a, d)| *a == actor && d == dest)
                .count();
            if clause_count != 1 {
                continue;
            }
            let before = state.world_at(index - 1, flavor.key).unwrap();
            if let Some(gold) = concrete_location(&ctx, before) {
                items.push(QAItem {
                    question: format!(
                        "In which {} was the {object} before {} moved the {object} to the {dest}?",
                        flavor.noun,
                        ctx.person_name(actor),
                    ),
                    gold,
                    category: flavor.category,
                    order: QuestionOrder::Memory,
                    interesting: false,
                    template_id: flavor.before,
                    action_index: Some(index),
                    false_belief: false,
                });
            }
        }

        // First-order beliefs.
        for &p in &people {
            let believed = state.belief(p, flavor.key);
            let Some(gold) = concrete_location(&ctx, believed) else {
                continue;
            };
            items.push(QAItem {
                question: format!(
                    "In which {} will {} search for the {object}?",
                    flavor.noun,
                    ctx.person_name(p)
                ),
                gold,
                category: flavor.category,
                order: QuestionOrder::First,
                interesting: varies(
                    people
                        .iter()
                        .map(|&q| state.belief(q, flavor.key))
                        .filter(is_located),
                ),
                template_id: flavor.first,
                action_index: None,
                false_belief: believed != world_now,
            });
        }

        // Second-order beliefs: what does `outer` think `inner` thinks?
        // One interestingness flag per flavor: vary both person slots over
        // the whole cast and ask whether any two concrete golds differ.
        let ppl = &people;
        let second_interesting = varies(
            ppl.iter()
                .flat_map(|&x| {
                    ppl.iter().map(move |&y| (x, y))
                })
                .map(|(x, y)| {
                    if x == y {
                        state.belief(y, flavor.key)
                    } else {
                        state.nested_belief(x, y, flavor.key)
                    }
                })
                .filter(is_located),
        );
        for &outer in &people {
            for &inner in &people {
                if inner == outer {
                    continue;
                }
                let believed = state.nested_belief(outer, inner, flavor.key);
                let Some(gold) = concrete_location(&ctx, believed) else {
                    continue;
                };
                items.push(QAItem {
                    question: format!(
                        "In which {} does {} think that {} will search for the {object}?",
                        flavor.noun,
                        ctx.person_name(outer),
                        ctx.person_name(inner)
                    ),
                    gold,
                    category: flavor.category,
                    order: QuestionOrder::Second,
                    interesting: second_interesting,
                    template_id: flavor.second,
                    action_index: None,
                    false_belief: believed != world_now,
                });
            }
        }
    }

    // Topic awareness. Only topics that were actually brought up are asked
    // about; for everything else every answer is a uniform "no".
    for t in ctx.topic_ids() {
        let key = FactKey::TopicKnown(t);
        if state.world(key) != Value::Bool(true) {
            continue;
        }
        let topic = ctx.topic_name(t);
        for &p in &people {
            let believed = state.belief(p, key);
            items.push(QAItem {
                question: format!("Does {} know about {topic}?", ctx.person_name(p)),
                gold: yes_no(believed == Value::Bool(true)),
                category: QuestionCategory::YesNo,
                order: QuestionOrder::First,
                interesting: varies(
                    people
                        .iter()
                        .map(|&q| Value::Bool(state.belief(q, key) == Value::Bool(true))),
                ),
                template_id: TemplateId::TopicKnowledgeFirst,
                action_index: None,
                false_belief: believed != state.world(key),
            });
        }
        let ppl = &people;
        let second_interesting = varies(
            ppl.iter()
                .flat_map(|&x| ppl.iter().map(move |&y| (x, y)))
                .map(|(x, y)| {
                    let v = if x == y {
                        state.belief(y, key)
                    } else {
                        state.nested_belief(x, y, key)
                    };
                    Value::Bool(v == Value::Bool(true))
                }),
        );
        for &outer in &people {
            for &inner in &people {
                if inner == outer {
                    continue;
                }
                let believed = state.nested_belief(outer, inner, key);
                items.push(QAItem {
                    question: format!(
                        "What does {} think about {}'s belief on {topic}? \
                         (knows about it / does not know about it)",
                        ctx.person_name(outer),
                        ctx.person_name(inner)
                    ),
                    gold: knows_about(believed == Value::Bool(true)),
                    category: QuestionCategory::KnowsAbout,
                    order: QuestionOrder::Second,
                    interesting: second_interesting,
                    template_id: TemplateId::TopicKnowledgeSecond,
                    action_index: None,
                    false_belief: believed != state.world(key),
                });
            }
        }
    }

    // Object state. Only phrases some action actually applied are asked
    // about, in story order of first application.
    let mut asked_phrases = Vec::new();
    for action in state.actions() {
        if let ActionBody::UpdateObjState { phrase } = action.body {
            if !asked_phrases.contains(&phrase) {
                asked_phrases.push(phrase);
            }
        }
    }
    for phrase in asked_phrases {
        let key = if ctx.phrase_is_visible(phrase) {
            FactKey::VisibleState
        } else {
            FactKey::InvisibleState
        };
        let text = ctx.phrase_text(phrase);
        let world_now = state.world(key);
        for &p in &people {
            let believed = state.belief(p, key);
            items.push(QAItem {
                question: format!(
                    "Does {} believe that the {object} {text}? Answer yes or no.",
                    ctx.person_name(p)
                ),
                gold: yes_no(believed == Value::Phrase(phrase)),
                category: QuestionCategory::YesNo,
                order: QuestionOrder::First,
                interesting: varies(
                    people
                        .iter()
                        .map(|&q| Value::Bool(state.belief(q, key) == Value::Phrase(phrase))),
                ),
                template_id: TemplateId::StateBeliefFirst,
                action_index: None,
                false_belief: believed != world_now,
            });
        }
        let ppl = &people;
        let second_interesting = varies(
            ppl.iter()
                .flat_map(|&x| ppl.iter().map(move |&y| (x, y)))
                .map(|(x, y)| {
                    let v = if x == y {
                        state.belief(y, key)
                    } else {
                        state.nested_belief(x, y, key)
                    };
                    Value::Bool(v == Value::Phrase(phrase))
                }),
        );
        for &outer in &people {
            for &inner in &people {
                if inner == outer {
                    continue;
                }
                let believed = state.nested_belief(outer, inner, key);
                items.push(QAItem {
                    question: format!(
                        "Does {} believe that {} believes that the {object} {text}? \
                         Answer yes or no.",
                        ctx.person_name(outer),
                        ctx.person_name(inner)
                    ),
                    gold: yes_no(believed == Value::Phrase(phrase)),
                    category: QuestionCategory::YesNo,
                    order: QuestionOrder::Second,
                    interesting: second_interesting,
                    template_id: TemplateId::StateBeliefSecond,
                    action_index: None,
                    false_belief: believed != world_now,
                });
            }
        }
    }

    items
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
