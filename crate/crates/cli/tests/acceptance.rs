//! Acceptance checks. Prints one PASS/FAIL line per criterion and a tally.
//! Set `GOMCTS_ACCEPT=1,5,10` to run a subset.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use gomcts::bench::{run_tournament, wilcoxon_signed_rank, TournamentResult};
use gomcts::game::{Action, GameConfig, GameState, NUM_PLAYERS};
use gomcts::model::{
    build_exact_oracle, state_value, GenerativeModel, LabeledHistory, ModelError,
    NextObsDistribution, OutcomeDistribution, OutcomeSpace, OutcomeValueFn, StatePolicy,
    UniformStatePolicy,
};
use gomcts::neural::{evaluate, loss_and_grad, train, ModelConfig, Params, TrainConfig};
use gomcts::policy::{EvaluatorKind, ModelAgent, PimcAgent, PolicyKind, UniformAgent};
use gomcts::search::{
    go_mcts, select_uct, uct_score, ChildStats, HeartsAdapter, SearchNode, SearchParams,
};
use gomcts::selfplay::{run_selfplay, IterationConfig, Learner, NeuralShape, TrainedModel};
use gomcts::tokenizer::{
    build_history, follow_suit_corruption, verify_history, HistoryRecorder, ObservationHistory,
    Verdict, Vocabulary,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_playout(config: &GameConfig, seed: u64) -> (GameState, Vec<ObservationHistory>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = GameState::new_deal(config.clone(), seed).unwrap();
    let mut rec = HistoryRecorder::new(&s);
    while !s.is_terminal() {
        let legal = s.legal_actions().unwrap();
        let a = legal[rng.random_range(0..legal.len())];
        let next = s.apply_action(a).unwrap();
        rec.record(&s, a, &next);
        s = next;
    }
    (s, rec.into_histories())
}

fn labeled(config: &GameConfig, seed: u64, viewer: usize) -> LabeledHistory {
    let (end, histories) = random_playout(config, seed);
    LabeledHistory {
        tokens: histories[viewer].tokens().to_vec(),
        outcome: OutcomeSpace::new(config)
            .id(&end.outcome().unwrap())
            .unwrap(),
    }
}

/// Decision points of the viewer with more than one legal card, sampled
/// from uniform-random play-outs.
fn decision_points(
    config: &GameConfig,
    count: usize,
    seed: u64,
) -> Vec<(GameState, Vec<Action>, usize)> {
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
            out.push((deal, plays, viewer));
        }
    }
    out
}

fn oracle_convergence() -> Outcome {
    let config = GameConfig::mini(3);
    let v = OutcomeValueFn::for_config(&config);
    let vocab = Vocabulary::new(&config);
    let points = decision_points(&config, 100, 2024);
    let results: Vec<(bool, f64)> = points
        .par_iter()
        .enumerate()
        .map(|(i, (deal, plays, viewer))| {
            let policies: [Arc<dyn StatePolicy>; NUM_PLAYERS] =
                std::array::from_fn(|_| Arc::new(UniformStatePolicy) as Arc<dyn StatePolicy>);
            let oracle = build_exact_oracle(&config, policies).unwrap();
            let h = build_history(deal, plays, *viewer).unwrap();
            let params = SearchParams {
                n_runs: 10_000,
                n_rollout_steps: usize::MAX,
                exploration_c: 0.4,
                expand_threshold: 0.0,
                illegal_penalty_mu: 0.01,
                seed: i as u64,
            };
            let result = go_mcts(&h, &oracle, &HeartsAdapter::new(&config), &params, &v).unwrap();
            let worlds = common::consistent_worlds(&config, deal, plays, *viewer);
            let q = common::action_values(&worlds, *viewer, &v);
            let best = q.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
            let chosen = vocab.as_card(result.action).unwrap();
            let chosen_q = q.iter().find(|x| x.0 == chosen).unwrap().1;
            let mean = result
                .root_node()
                .unwrap()
                .child(result.action)
                .unwrap()
                .mean();
            (chosen_q >= best - 1e-9, (mean - best).abs())
        })
        .collect();
    let correct = results.iter().filter(|r| r.0).count();
    let worst = results.iter().map(|r| r.1).fold(0.0, f64::max);
    outcome(
        correct >= 95 && worst < 0.05,
        format!("optimal action at {correct}/100 decisions, largest root value error {worst:.4}"),
    )
}

fn uct_arithmetic() -> Outcome {
    // Children as (value sum, visits).
    let node = SearchNode {
        children: vec![
            (
                0,
                ChildStats {
                    value_sum: 2.0,
                    visits: 2,
                },
            ),
            (
                1,
                ChildStats {
                    value_sum: 0.5,
                    visits: 1,
                },
            ),
        ],
    };
    let c = 0.4;
    let hand_a = 1.0 + 0.4 * (3f64.ln() / 2.0).sqrt();
    let hand_b = 0.5 + 0.4 * (3f64.ln() / 1.0).sqrt();
    let got_a = uct_score(&node.children[0].1, 3, c);
    let got_b = uct_score(&node.children[1].1, 3, c);
    let picked = select_uct(&node, c);
    outcome(
        got_a == hand_a && got_b == hand_b && picked == 0,
        format!(
            "scores a {got_a:.6} b {got_b:.6}, picked {}",
            if picked == 0 { "a" } else { "b" }
        ),
    )
}

/// Fixed outcome probabilities for every history.
struct FixedOutcomes {
    space: OutcomeSpace,
    probs: Vec<f64>,
}

impl GenerativeModel for FixedOutcomes {
    fn vocab_size(&self) -> usize {
        1
    }

    fn context_length(&self) -> usize {
        100
    }

    fn outcomes(&self) -> &OutcomeSpace {
        &self.space
    }

    fn next_obs_dist(&self, _: &ObservationHistory) -> Result<NextObsDistribution, ModelError> {
        Ok(NextObsDistribution::point_mass(1, 0))
    }

    fn outcome_dist(&self, _: &ObservationHistory) -> Result<OutcomeDistribution, ModelError> {
        OutcomeDistribution::from_weights(self.probs.clone())
    }
}

fn value_exactness() -> Outcome {
    let h = ObservationHistory::new(0, Vec::new());
    let point_mass = |config: &GameConfig, points: [i32; 4], v: &OutcomeValueFn| {
        let space = OutcomeSpace::new(config);
        let mut probs = vec![0.0; space.len()];
        probs[space.id_of_points(points).unwrap()] = 1.0;
        state_value(&FixedOutcomes { space, probs }, &h, v).unwrap()
    };
    let hearts = GameConfig::hearts();
    let dv = OutcomeValueFn::for_config(&hearts);
    let third = point_mass(&hearts, [0, 13, 13, 0], &dv);
    let moon = point_mass(&hearts, [-26, 0, 0, 0], &dv);

    let mini = GameConfig::mini(3);
    let space = OutcomeSpace::new(&mini);
    let binary = OutcomeValueFn::Binary { minimize: true };
    let mut probs = vec![0.0; space.len()];
    probs[space.id_of_points([0, 1, 2, 3]).unwrap()] = 0.5;
    probs[space.id_of_points([3, 1, 1, 1]).unwrap()] = 0.5;
    let half = state_value(
        &FixedOutcomes {
            space: space.clone(),
            probs,
        },
        &h,
        &binary,
    )
    .unwrap();

    // Random distributions against a sum written out here.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let weights: Vec<f64> = (0..space.len()).map(|_| rng.random::<f64>()).collect();
        let total: f64 = weights.iter().sum();
        let viewer = rng.random_range(0..NUM_PLAYERS);
        let expected: f64 = (0..space.len())
            .map(|o| {
                let p = space.points(o);
                let own = p[viewer] as f64;
                let others = (p.iter().sum::<i32>() as f64 - own) / 3.0;
                weights[o] / total * (others - own) / 6.0
            })
            .sum();
        let model = FixedOutcomes {
            space: space.clone(),
            probs: weights,
        };
        let got = state_value(
            &model,
            &ObservationHistory::new(viewer, Vec::new()),
            &OutcomeValueFn::for_config(&mini),
        )
        .unwrap();
        worst = worst.max((got - expected).abs());
    }
    let pass = (third - 1.0 / 3.0).abs() < 1e-12
        && (moon - 1.0).abs() < 1e-12
        && (half - 0.5).abs() < 1e-12
        && worst < 1e-12;
    outcome(
        pass,
        format!("(0,13,13,0) -> {third:.15}, moon -> {moon:.15}, binary half -> {half}, random worst {worst:.1e}"),
    )
}

fn legality_pipeline() -> Outcome {
    let config = GameConfig::hearts();
    let counts: Vec<(usize, usize, usize, usize)> = (0..25_000u64)
        .into_par_iter()
        .map(|seed| {
            let (_, histories) = random_playout(&config, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc0ffee);
            let (mut legal, mut total, mut bad_illegal, mut bad_total) = (0, 0, 0, 0);
            for h in &histories {
                total += 1;
                if verify_history(h, &config) == Ok(Verdict::Legal) {
                    legal += 1;
                }
                if let Some(bad) = follow_suit_corruption(h, &config, &mut rng) {
                    bad_total += 1;
                    if matches!(verify_history(&bad, &config), Ok(Verdict::Illegal(_))) {
                        bad_illegal += 1;
                    }
                }
            }
            (legal, total, bad_illegal, bad_total)
        })
        .collect();
    let sum = counts.iter().fold((0, 0, 0, 0), |a, c| {
        (a.0 + c.0, a.1 + c.1, a.2 + c.2, a.3 + c.3)
    });
    outcome(
        sum.0 == sum.1 && sum.1 == 100_000 && sum.2 == sum.3 && sum.3 > 0,
        format!(
            "{}/{} histories Legal, {}/{} corruptions Illegal",
            sum.0, sum.1, sum.2, sum.3
        ),
    )
}

fn gradient_check() -> Outcome {
    let game = GameConfig::mini(3);
    let config = ModelConfig {
        embed_dim: 16,
        num_heads: 2,
        num_layers: 2,
        inner_dim: 32,
        initializer_range: 0.3,
        ..ModelConfig::desk(&game)
    };
    let params = Params::<f64>::init(&config, 11);
    let batch = [labeled(&game, 1, 0), labeled(&game, 2, 3)];
    let (_, grads) = loss_and_grad(&params, &batch);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let eps = 1e-5;
    let (mut worst, mut checked, mut inert_mismatch): (f64, usize, usize) = (0.0, 0, 0);
    while checked < 200 {
        let i = rng.random_range(0..params.data.len());
        let mut p = params.clone();
        p.data[i] += eps;
        let up = loss_and_grad(&p, &batch).0;
        p.data[i] -= 2.0 * eps;
        let down = loss_and_grad(&p, &batch).0;
        let numeric = (up - down) / (2.0 * eps);
        let analytic = grads[i];
        let scale = analytic.abs().max(numeric.abs());
        if scale < 1e-9 {
            if (analytic - numeric).abs() >= 1e-9 {
                inert_mismatch += 1;
            }
            continue;
        }
        worst = worst.max((analytic - numeric).abs() / scale);
        checked += 1;
    }
    outcome(
        worst < 1e-4 && inert_mismatch == 0,
        format!("largest relative error {worst:.2e} over {checked} parameters"),
    )
}

fn memorization() -> Outcome {
    let game = GameConfig::hearts();
    let config = ModelConfig::desk(&game);
    let example = labeled(&game, 77, 1);
    let data = vec![example.clone(); 1000];
    let tc = TrainConfig {
        batch_size: 1,
        seed: 4,
        ..TrainConfig::default()
    };
    let (params, log) = train::<f32>(&data, &config, &tc, None).unwrap();
    let ce = evaluate(&params, &[example]).next_token_ce();
    outcome(
        ce < 0.05 && log.epochs.len() == 3,
        format!(
            "next-token cross-entropy {ce:.4} nats after {} epochs",
            log.epochs.len()
        ),
    )
}

/// The self-play series shared by the search and improvement checks.
fn selfplay_series() -> Vec<Arc<TrainedModel>> {
    let game = GameConfig::mini(3);
    let config = IterationConfig {
        learner: Learner::Neural {
            shape: NeuralShape {
                embed_dim: 64,
                num_heads: 4,
                num_layers: 2,
                inner_dim: 256,
                ..NeuralShape::default()
            },
            train: TrainConfig {
                learning_rate: 1e-3,
                epochs: 2,
                batch_size: 32,
                ..TrainConfig::default()
            },
        },
        ..IterationConfig::default()
    };
    run_selfplay(&game, &config, None, &mut |_| {}).unwrap()
}

fn greedy(model: &Arc<TrainedModel>, game: &GameConfig) -> ModelAgent {
    let m: Arc<dyn GenerativeModel> = model.clone();
    ModelAgent::new(
        m,
        PolicyKind::ArgmaxValStar { lambda: 0.05 },
        OutcomeValueFn::for_config(game),
        game,
    )
}

fn tournament_line(r: &TournamentResult) -> String {
    let w = r.wilcoxon();
    let (a, b) = r.side_means(gomcts::bench::Split::All);
    format!(
        "A {a:.4} vs B {b:.4} mean points, deal delta {:+.4}, Wilcoxon p {:.3e} (n = {}), {} matches",
        r.mean_delta(),
        w.p_value,
        w.n,
        r.matches.len()
    )
}

fn search_beats_greedy(series: &[Arc<TrainedModel>]) -> Outcome {
    let game = GameConfig::mini(3);
    let last = series.last().unwrap();
    let m: Arc<dyn GenerativeModel> = last.clone();
    let params = SearchParams {
        n_runs: 100,
        n_rollout_steps: 2,
        exploration_c: 0.4,
        expand_threshold: 0.05,
        illegal_penalty_mu: 0.01,
        seed: 0,
    };
    let search = ModelAgent::new(
        m,
        PolicyKind::GoMcts(params),
        OutcomeValueFn::for_config(&game),
        &game,
    );
    let r = run_tournament(&game, &search, &greedy(last, &game), 2000, 7, false);
    outcome(
        r.mean_delta() < 0.0 && r.wilcoxon().p_value < 0.05,
        tournament_line(&r),
    )
}

fn selfplay_improvement(series: &[Arc<TrainedModel>]) -> Outcome {
    let game = GameConfig::mini(3);
    let r = run_tournament(
        &game,
        &greedy(&series[3], &game),
        &greedy(&series[0], &game),
        1000,
        8,
        false,
    );
    outcome(
        r.mean_delta() < 0.0 && r.wilcoxon().p_value < 0.001,
        tournament_line(&r),
    )
}

fn pimc_sanity() -> Outcome {
    let game = GameConfig::mini(3);
    let pimc = PimcAgent::new(
        50,
        &EvaluatorKind::Expectimax,
        OutcomeValueFn::for_config(&game),
    );
    let r = run_tournament(&game, &pimc, &UniformAgent, 1000, 9, false);
    outcome(
        r.mean_delta() < 0.0 && r.wilcoxon().p_value < 0.001,
        tournament_line(&r),
    )
}

/// Two-sided signed-rank p by listing all 2^n sign patterns.
fn enumerated_p(diffs: &[f64]) -> f64 {
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|&d| d != 0.0).collect();
    let n = nonzero.len();
    if n == 0 {
        return 1.0;
    }
    let ranks: Vec<f64> = nonzero
        .iter()
        .map(|&d| {
            let below = nonzero.iter().filter(|e| e.abs() < d.abs()).count() as f64;
            let equal = nonzero.iter().filter(|e| e.abs() == d.abs()).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect();
    let observed: f64 = nonzero
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let (mut low, mut high) = (0u64, 0u64);
    for signs in 0u64..(1 << n) {
        let w: f64 = (0..n)
            .filter(|&i| signs >> i & 1 == 1)
            .map(|i| ranks[i])
            .sum();
        low += (w <= observed + 1e-9) as u64;
        high += (w >= observed - 1e-9) as u64;
    }
    (2.0 * low.min(high) as f64 / (1u64 << n) as f64).min(1.0)
}

fn wilcoxon_enumeration() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut matched, mut total) = (0, 0);
    for n in 1..=12usize {
        for _ in 0..100 {
            let diffs: Vec<f64> = (0..n).map(|_| rng.random_range(-5i32..=5) as f64).collect();
            total += 1;
            if (wilcoxon_signed_rank(&diffs).p_value - enumerated_p(&diffs)).abs() < 1e-12 {
                matched += 1;
            }
        }
    }
    outcome(
        matched == total,
        format!("{matched}/{total} inputs (n = 1..=12) match enumeration"),
    )
}

fn files_under(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let name = path.strip_prefix(dir).unwrap().display().to_string();
                out.push((name, fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

const PIPELINE_CONFIG: &str = r#"
game = "mini3"
seed = 21

[gen_data]
games = 400

[train]
kind = "trie"
smoothing = 1.0

[selfplay]
bootstrap_games = 300
games_per_iteration = 100
num_iterations = 2

[search]
model = "model/model.bin"
n_runs = 100

[tournament]
num_matches = 30

[tournament.player_a]
kind = "go_mcts"
n_runs = 30
model = "model/model.bin"

[tournament.player_b]
kind = "argmax_val_star"
lambda = 0.05
model = "model/model.bin"
"#;

fn run_pipeline(dir: &Path) -> Vec<String> {
    fs::write(dir.join("run.toml"), PIPELINE_CONFIG).unwrap();
    let steps: [&[&str]; 7] = [
        &["gen-data", "--config", "run.toml", "--out", "data"],
        &["verify", "data/dataset.txt", "--out", "verify"],
        &[
            "train",
            "--config",
            "run.toml",
            "--out",
            "model",
            "data/dataset.txt",
        ],
        &["selfplay", "--config", "run.toml", "--out", "series"],
        &["search", "--config", "run.toml", "--out", "search"],
        &["tournament", "--config", "run.toml", "--out", "tournament"],
        &["report", "tournament/result.bin", "--out", "report"],
    ];
    steps
        .iter()
        .map(|args| {
            let out = Command::new(env!("CARGO_BIN_EXE_gomcts"))
                .current_dir(dir)
                .args(*args)
                .output()
                .unwrap();
            format!(
                "{} {:?} {}",
                args[0],
                out.status.code(),
                String::from_utf8_lossy(&out.stdout)
            )
        })
        .collect()
}

fn cli_determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let out_a = run_pipeline(a.path());
    let out_b = run_pipeline(b.path());
    let files_a = files_under(a.path());
    let files_b = files_under(b.path());
    let all_ok = out_a.iter().all(|s| s.contains(" Some(0) "));
    let differing: Vec<&str> = files_a
        .iter()
        .zip(&files_b)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    let pass = all_ok && out_a == out_b && files_a.len() == files_b.len() && differing.is_empty();
    outcome(
        pass,
        format!(
            "7 stages, {} output files, {} differing, stdout {}",
            files_a.len(),
            differing.len(),
            if out_a == out_b {
                "identical"
            } else {
                "differs"
            }
        ),
    )
}

fn main() {
    let only: Option<Vec<u32>> = std::env::var("GOMCTS_ACCEPT")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |id: u32| only.as_ref().is_none_or(|o| o.contains(&id));
    let names = [
        "oracle convergence",
        "UCT arithmetic",
        "state value exactness",
        "legality pipeline",
        "gradient check",
        "memorization",
        "search beats greedy",
        "self-play improvement",
        "PIMC sanity",
        "Wilcoxon correctness",
        "CLI determinism",
    ];
    let mut series: Option<Vec<Arc<TrainedModel>>> = None;
    let mut results = Vec::new();
    for id in 1..=11u32 {
        if !wanted(id) {
            continue;
        }
        let start = Instant::now();
        let o = match id {
            1 => oracle_convergence(),
            2 => uct_arithmetic(),
            3 => value_exactness(),
            4 => legality_pipeline(),
            5 => gradient_check(),
            6 => memorization(),
            7 | 8 => {
                let s = series.get_or_insert_with(selfplay_series);
                if id == 7 {
                    search_beats_greedy(s)
                } else {
                    selfplay_improvement(s)
                }
            }
            9 => pimc_sanity(),
            10 => wilcoxon_enumeration(),
            _ => cli_determinism(),
        };
        println!(
            "criterion {id:>2} {} {}: {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            names[id as usize - 1],
            o.detail,
            start.elapsed().as_secs_f64()
        );
        let _ = std::io::stdout().flush();
        results.push(o.pass);
    }
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria met", results.len());
}
