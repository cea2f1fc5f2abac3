use gomcts::bench::{
    a_count, is_a, run_tournament, wilcoxon_signed_rank, Split, TournamentResult, ASSIGNMENTS,
};
use gomcts::game::{GameConfig, NUM_PLAYERS};
use gomcts::model::OutcomeValueFn;
use gomcts::policy::{EvaluatorKind, PimcAgent, ScriptedAgent, UniformAgent};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two-sided p of the signed-rank statistic by listing all 2^n sign
/// patterns of the observed absolute ranks.
fn brute_force_p(diffs: &[f64]) -> f64 {
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|&d| d != 0.0).collect();
    let n = nonzero.len();
    if n == 0 {
        return 1.0;
    }
    let ranks: Vec<f64> = nonzero
        .iter()
        .map(|&d| {
            let below = nonzero.iter().filter(|&&e| e.abs() < d.abs()).count() as f64;
            let equal = nonzero.iter().filter(|&&e| e.abs() == d.abs()).count() as f64;
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
        if w <= observed + 1e-9 {
            low += 1;
        }
        if w >= observed - 1e-9 {
            high += 1;
        }
    }
    let tail = low.min(high) as f64 / (1u64 << n) as f64;
    (2.0 * tail).min(1.0)
}

#[test]
fn exact_p_values_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut checked = 0;
    for n in 1..=12usize {
        for _ in 0..100 {
            let diffs: Vec<f64> = (0..n)
                .map(|_| {
                    let magnitude = rng.random_range(0..6) as f64;
                    if rng.random_bool(0.5) {
                        magnitude
                    } else {
                        -magnitude
                    }
                })
                .collect();
            let got = wilcoxon_signed_rank(&diffs).p_value;
            let want = brute_force_p(&diffs);
            assert!((got - want).abs() < 1e-12, "{diffs:?}: {got} vs {want}");
            checked += 1;
        }
    }
    assert_eq!(checked, 1200);
}

#[test]
fn fourteen_mixed_assignments() {
    let mut masks = ASSIGNMENTS.to_vec();
    masks.sort_unstable();
    masks.dedup();
    assert_eq!(masks.len(), 14);
    assert!(!masks.contains(&0) && !masks.contains(&15));
    assert!(masks.iter().all(|&m| m < 16));
    let count = |k| masks.iter().filter(|&&m| a_count(m) == k).count();
    assert_eq!((count(3), count(2), count(1)), (4, 6, 4));
    for &m in &masks {
        assert_eq!((0..NUM_PLAYERS).filter(|&s| is_a(m, s)).count(), a_count(m));
    }
}

#[test]
fn deterministic_players_see_the_same_deal_in_every_assignment() {
    let game = GameConfig::mini(4);
    let r = run_tournament(&game, &ScriptedAgent, &ScriptedAgent, 30, 5, false);
    assert!(r.failures.is_empty());
    for m in &r.matches {
        assert!(m.points.iter().all(|p| *p == m.points[0]));
    }
    assert!(r.deal_deltas().iter().all(|&d| d == 0.0));
    assert_eq!(r.wilcoxon().p_value, 1.0);
}

#[test]
fn identical_random_players_are_indistinguishable() {
    let game = GameConfig::mini(3);
    let r = run_tournament(&game, &UniformAgent, &UniformAgent, 400, 6, false);
    let w = r.wilcoxon();
    assert!(w.p_value > 0.01, "{w:?}");
    let (a, b) = r.side_means(Split::All);
    assert!((a - b).abs() < 0.3);
}

#[test]
fn results_round_trip_and_reruns_match() {
    let game = GameConfig::mini(3);
    let r = run_tournament(&game, &ScriptedAgent, &UniformAgent, 40, 8, false);
    let mut bytes = Vec::new();
    r.write(&mut bytes).unwrap();
    let back = TournamentResult::read(&mut &bytes[..]).unwrap();
    assert_eq!(back, r);
    let again = run_tournament(&game, &ScriptedAgent, &UniformAgent, 40, 8, false);
    let mut bytes2 = Vec::new();
    again.write(&mut bytes2).unwrap();
    assert_eq!(bytes, bytes2);
    let report = r.report("scripted", "uniform");
    for column in ["All", "3A/1B", "2A/2B", "1A/3B"] {
        assert!(report.contains(column));
    }
    assert!(TournamentResult::read(&mut &bytes[..bytes.len() - 3]).is_err());
}

#[test]
fn perfect_information_sampling_beats_random_play() {
    let game = GameConfig::mini(3);
    let v = OutcomeValueFn::for_config(&game);
    let pimc = PimcAgent::new(20, &EvaluatorKind::Expectimax, v);
    let r = run_tournament(&game, &pimc, &UniformAgent, 100, 12, false);
    assert!(r.mean_delta() < 0.0);
    assert!(r.wilcoxon().p_value < 0.01, "{:?}", r.wilcoxon());
}

proptest! {
    #[test]
    fn p_values_are_probabilities_and_sign_symmetric(
        diffs in prop::collection::vec(-20i32..20, 0..40),
    ) {
        let d: Vec<f64> = diffs.iter().map(|&x| x as f64).collect();
        let neg: Vec<f64> = d.iter().map(|x| -x).collect();
        let p = wilcoxon_signed_rank(&d).p_value;
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!((p - wilcoxon_signed_rank(&neg).p_value).abs() < 1e-12);
    }
}
