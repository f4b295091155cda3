//! Probe: random-study metric variants plus mechanism diagnostics over the
//! people × movements grid.

use std::sync::Arc;

use mindforge_core::question::QuestionOrder;
use mindforge_core::{
    apply, enumerate_valid_actions_into, generate_questions, requires_tom, sample_builtin,
    ActionBody, ActionInstance, ActionKind, ContextParams, FactKey, StoryContext, StoryState,
    Value,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn sample(
    ctx: &Arc<StoryContext>,
    movements: usize,
    max_actions: usize,
    fixed_len: bool,
    rng: &mut ChaCha8Rng,
) -> StoryState {
    let kinds = ActionKind::MOVEMENT_PRIMITIVES;
    let mut options: Vec<ActionInstance> = Vec::new();
    loop {
        let target = if fixed_len {
            max_actions
        } else {
            rng.random_range(1..=max_actions)
        };
        let mut state = StoryState::init(ctx.clone()).unwrap();
        let mut moves = 0usize;
        let mut ok = true;
        for step in 0..target {
            enumerate_valid_actions_into(&state, &kinds, false, &mut options);
            if options.is_empty() {
                ok = false;
                break;
            }
            let action = options[rng.random_range(0..options.len())];
            if action.kind() == ActionKind::MoveObjContainer {
                moves += 1;
                if moves > movements {
                    ok = false;
                    break;
                }
            }
            state = apply(&state, action).unwrap();
            if movements - moves > target - step - 1 {
                ok = false;
                break;
            }
        }
        if ok && moves == movements {
            return state;
        }
    }
}

struct Diag {
    req_tom: usize,
    belief_q: usize,
    interesting: usize,
    false_belief: usize,
    len: usize,
    actors: usize,
    movers: usize,
    witnessed_moves: usize, // moves with >= 1 non-mover in the room
    moves: usize,
}

fn main() {
    let containers: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(2);
    let fixed_len = std::env::args().nth(2).is_some_and(|s| s == "fixed");
    let seed_base: u64 = std::env::args()
        .nth(3)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0x5151_0000);
    println!("containers={containers} fixed_len={fixed_len} seed_base={seed_base:#x}");
    println!(
        "{:>2} {:>2} | {:>6} | {:>8} {:>8} | {:>6} {:>6} {:>6} {:>7}",
        "P", "M", "reqToM", "int/tom", "fb/tom", "len", "actors", "movers", "witn/mv"
    );
    for people in [2usize, 3, 4] {
        for movements in [2usize, 3, 4] {
            let n = 2000usize;
            let rows: Vec<Diag> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let seed = seed_base
                        .wrapping_add((people as u64) << 50)
                        .wrapping_add((movements as u64) << 40)
                        .wrapping_add(i as u64);
                    let params = ContextParams {
                        people,
                        containers,
                        topics: 2,
                    };
                    let ctx = Arc::new(sample_builtin(seed, &params).unwrap());
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let story = sample(&ctx, movements, 10, fixed_len, &mut rng);
                    let items = generate_questions(&story);

                    // Replay to count witnesses at each move.
                    let mut replay = StoryState::init(ctx.clone()).unwrap();
                    let mut witnessed = 0usize;
                    let mut movers = std::collections::BTreeSet::new();
                    let mut actors = std::collections::BTreeSet::new();
                    for action in story.actions() {
                        actors.insert(action.actor);
                        if let ActionBody::MoveObjContainer { .. } = action.body {
                            movers.insert(action.actor);
                            let room = replay.world(FactKey::ObjectRoom);
                            let bystanders = ctx
                                .person_ids()
                                .filter(|&p| {
                                    p != action.actor
                                        && replay.world(FactKey::PersonRoom(p)) == room
                                })
                                .count();
                            if bystanders > 0 {
                                witnessed += 1;
                            }
                        }
                        replay = apply(&replay, action).unwrap();
                    }
                    Diag {
                        req_tom: usize::from(requires_tom(&items)),
                        belief_q: items
                            .iter()
                            .filter(|q| {
                                matches!(q.order, QuestionOrder::First | QuestionOrder::Second)
                            })
                            .count(),
                        interesting: items.iter().filter(|q| q.interesting).count(),
                        false_belief: items.iter().filter(|q| q.false_belief).count(),
                        len: story.actions().count(),
                        actors: actors.len(),
                        movers: movers.len(),
                        witnessed_moves: witnessed,
                        moves: movements,
                    }
                })
                .collect();
            let f = |g: fn(&Diag) -> usize| rows.iter().map(g).sum::<usize>() as f64;
            println!(
                "{:>2} {:>2} | {:>6.3} | {:>8.3} {:>8.3} | {:>6.2} {:>6.2} {:>6.2} {:>7.2}",
                people,
                movements,
                f(|d| d.req_tom) / n as f64,
                f(|d| d.interesting) / f(|d| d.belief_q),
                f(|d| d.false_belief) / f(|d| d.belief_q),
                f(|d| d.len) / n as f64,
                f(|d| d.actors) / n as f64,
                f(|d| d.movers) / n as f64,
                f(|d| d.witnessed_moves) / f(|d| d.moves),
            );
        }
    }
    println!("targets reqToM: 131 208 235 / 195 234 288 / 210 259 315");
}
