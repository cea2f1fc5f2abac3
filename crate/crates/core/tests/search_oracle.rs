//! GO-MCTS on the exact oracle against an independent best-response
//! computation.

mod common;

use std::sync::Arc;

use gomcts::game::{GameConfig, GameState, NUM_PLAYERS};
use gomcts::model::{build_exact_oracle, OutcomeValueFn, StatePolicy, UniformStatePolicy};
use gomcts::search::{go_mcts, HeartsAdapter, SearchParams};
use gomcts::tokenizer::{build_history, Vocabulary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

struct DecisionPoint {
    deal: GameState,
    plays: Vec<gomcts::game::Action>,
    viewer: usize,
}

fn decision_points(config: &GameConfig, count: usize, seed: u64) -> Vec<DecisionPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let deal = GameState::new_deal(config.clone(), rng.random()).unwrap();
        let viewer = rng.random_range(0..NUM_PLAYERS);
        let mut s = deal.clone();
        let mut plays = Vec::new();
        let mut candidates = Vec::new();
        while !s.is_terminal() {
            let legal = s.legal_actions().unwrap();
            if s.to_move() == viewer && legal.len() > 1 {
                candidates.push(plays.clone());
            }
            let a = legal[rng.random_range(0..legal.len())];
            plays.push(a);
            s.apply_in_place(a).unwrap();
        }
        if !candidates.is_empty() {
            let plays = candidates[rng.random_range(0..candidates.len())].clone();
            out.push(DecisionPoint {
                deal,
                plays,
                viewer,
            });
        }
    }
    out
}

#[test]
fn converges_to_best_response() {
    let count: usize = std::env::var("GOMCTS_DECISIONS")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(100);
    let runs: usize = std::env::var("GOMCTS_RUNS")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(10_000);
    let config = GameConfig::mini(3);
    let v = OutcomeValueFn::for_config(&config);
    let vocab = Vocabulary::new(&config);
    let points = decision_points(&config, count, 2024);
    let start = std::time::Instant::now();
    let results: Vec<(bool, f64)> = points
        .par_iter()
        .enumerate()
        .map(|(i, dp)| {
            let policies: [Arc<dyn StatePolicy>; NUM_PLAYERS] =
                std::array::from_fn(|_| Arc::new(UniformStatePolicy) as Arc<dyn StatePolicy>);
            let oracle = build_exact_oracle(&config, policies).unwrap();
            let h = build_history(&dp.deal, &dp.plays, dp.viewer).unwrap();
            let params = SearchParams {
                n_runs: runs,
                n_rollout_steps: usize::MAX,
                exploration_c: 0.4,
                expand_threshold: 0.0,
                illegal_penalty_mu: 0.01,
                seed: i as u64,
            };
            let result = go_mcts(&h, &oracle, &HeartsAdapter::new(&config), &params, &v).unwrap();
            let worlds = common::consistent_worlds(&config, &dp.deal, &dp.plays, dp.viewer);
            let q = common::action_values(&worlds, dp.viewer, &v);
            let best = q.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
            let chosen = vocab.as_card(result.action).unwrap();
            let chosen_q = q.iter().find(|x| x.0 == chosen).unwrap().1;
            let root = result.root_node().unwrap();
            let mean = root.child(result.action).unwrap().mean();
            (chosen_q >= best - 1e-9, (mean - best).abs())
        })
        .collect();
    let correct = results.iter().filter(|r| r.0).count();
    let worst = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let mean_err = results.iter().map(|r| r.1).sum::<f64>() / results.len() as f64;
    eprintln!(
        "optimal {correct}/{count}, max value error {worst:.4}, mean {mean_err:.4}, {:.1}s",
        start.elapsed().as_secs_f64()
    );
    assert!(correct * 100 >= 95 * count);
    assert!(worst < 0.05);
}
