//! Decision rules built on a generative model, and agents that play deals
//! with them.

mod agent;
mod play;
mod scripted;

use rand::Rng;

use crate::model::{legal_probs, GenerativeModel, ModelError, OutcomeValueFn};
use crate::tokenizer::{ObservationHistory, Token};

pub use agent::{
    build_agent, Agent, EvaluatorKind, ModelAgent, PimcAgent, PolicyConfig, PolicyError,
    PolicyKind, UniformAgent,
};
pub use play::{play_deal, PlayedDeal};
pub use scripted::ScriptedAgent;

/// The legal action with the best predicted value after it is played,
/// among actions the model gives at least `lambda` of the legal
/// probability. Falls back to the most probable action when none qualify.
/// Ties go to the first action in `legal`.
pub fn argmax_val_star<M: GenerativeModel + ?Sized>(
    model: &M,
    h: &ObservationHistory,
    legal: &[Token],
    lambda: f64,
    v: &OutcomeValueFn,
) -> Result<Token, ModelError> {
    assert!(!legal.is_empty(), "no legal action");
    if legal.len() == 1 {
        return Ok(legal[0]);
    }
    let p = legal_probs(model.next_obs_dist(h)?.probs(), legal);
    let values = model.outcomes().values(v, h.viewer());
    let mut best: Option<(Token, f64)> = None;
    for (&a, &q) in legal.iter().zip(&p) {
        if q < lambda {
            continue;
        }
        let value = model.outcome_dist(&h.with(a))?.expect(&values);
        if best.is_none_or(|(_, b)| value > b) {
            best = Some((a, value));
        }
    }
    if let Some((a, _)) = best {
        return Ok(a);
    }
    let mut i = 0;
    for j in 1..legal.len() {
        if p[j] > p[i] {
            i = j;
        }
    }
    Ok(legal[i])
}

/// Legal-normalized model probabilities sharpened by `1 / temperature`.
pub fn imitation_probs(p_legal: &[f64], temperature: f64) -> Vec<f64> {
    let max = p_legal.iter().copied().fold(0.0, f64::max);
    let w: Vec<f64> = p_legal
        .iter()
        .map(|&p| {
            if p > 0.0 {
                ((p.ln() - max.ln()) / temperature).exp()
            } else {
                0.0
            }
        })
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Draws an action from the model's legal-normalized probabilities raised
/// to `1 / temperature`.
pub fn sample_imitation<M, R>(
    model: &M,
    h: &ObservationHistory,
    legal: &[Token],
    temperature: f64,
    rng: &mut R,
) -> Result<Token, ModelError>
where
    M: GenerativeModel + ?Sized,
    R: Rng + ?Sized,
{
    assert!(!legal.is_empty(), "no legal action");
    let p = legal_probs(model.next_obs_dist(h)?.probs(), legal);
    let w = imitation_probs(&p, temperature);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &x) in w.iter().enumerate() {
        acc += x;
        if u < acc {
            return Ok(legal[i]);
        }
    }
    Ok(legal[w.iter().rposition(|&x| x > 0.0).unwrap_or(legal.len() - 1)])
}

pub fn uniform_random<T: Copy, R: Rng + ?Sized>(legal: &[T], rng: &mut R) -> T {
    legal[rng.random_range(0..legal.len())]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::GameConfig;
    use crate::model::{NextObsDistribution, OutcomeDistribution, OutcomeSpace};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    /// Fixed next-token weights; the outcome is a point mass picked by the
    /// last token.
    struct Stub {
        next: Vec<f64>,
        outcome_of: Vec<usize>,
        outcomes: OutcomeSpace,
    }

    impl GenerativeModel for Stub {
        fn vocab_size(&self) -> usize {
            self.next.len()
        }
        fn context_length(&self) -> usize {
            100
        }
        fn outcomes(&self) -> &OutcomeSpace {
            &self.outcomes
        }
        fn next_obs_dist(
            &self,
            _h: &ObservationHistory,
        ) -> Result<NextObsDistribution, ModelError> {
            NextObsDistribution::from_weights(self.next.clone())
        }
        fn outcome_dist(&self, h: &ObservationHistory) -> Result<OutcomeDistribution, ModelError> {
            let last = *h.tokens().last().unwrap() as usize;
            Ok(OutcomeDistribution::point_mass(
                self.outcomes.len(),
                self.outcome_of[last],
            ))
        }
    }

    fn stub(next: Vec<f64>, points: &[[i32; 4]]) -> Stub {
        let outcomes = OutcomeSpace::new(&GameConfig::mini(3));
        let outcome_of = points
            .iter()
            .map(|&p| outcomes.id_of_points(p).unwrap())
            .collect();
        Stub {
            next,
            outcome_of,
            outcomes,
        }
    }

    fn v() -> OutcomeValueFn {
        OutcomeValueFn::for_config(&GameConfig::mini(3))
    }

    #[test]
    fn argmax_val_star_skips_improbable_actions() {
        // Token 2 is best for player 0 but has only 1% of the legal mass.
        let m = stub(
            vec![0.0, 0.5, 0.01, 0.49],
            &[[0, 4, 1, 1], [3, 1, 1, 1], [0, 4, 1, 1], [1, 4, 1, 0]],
        );
        let h = ObservationHistory::new(0, vec![0]);
        assert_eq!(argmax_val_star(&m, &h, &[1, 2, 3], 0.0, &v()).unwrap(), 2);
        assert_eq!(argmax_val_star(&m, &h, &[1, 2, 3], 0.05, &v()).unwrap(), 3);
        // Nothing clears the threshold: take the most probable action.
        assert_eq!(argmax_val_star(&m, &h, &[1, 2, 3], 0.9, &v()).unwrap(), 1);
    }

    #[test]
    fn argmax_val_star_breaks_ties_by_order() {
        let m = stub(
            vec![0.0, 0.5, 0.5],
            &[[0, 4, 1, 1], [1, 4, 1, 0], [1, 4, 1, 0]],
        );
        let h = ObservationHistory::new(0, vec![0]);
        assert_eq!(argmax_val_star(&m, &h, &[2, 1], 0.0, &v()).unwrap(), 2);
        assert_eq!(argmax_val_star(&m, &h, &[1, 2], 0.0, &v()).unwrap(), 1);
    }

    #[test]
    fn imitation_sampling_matches_tempered_probabilities() {
        let m = stub(vec![0.3, 0.1, 0.2, 0.4], &[[1, 4, 1, 0]; 4]);
        let h = ObservationHistory::new(0, vec![]);
        let legal = [1, 2, 3];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for temperature in [1.0, 0.5] {
            let expected = imitation_probs(&[1.0 / 7.0, 2.0 / 7.0, 4.0 / 7.0], temperature);
            let n = 40_000;
            let mut counts = [0usize; 3];
            for _ in 0..n {
                let t = sample_imitation(&m, &h, &legal, temperature, &mut rng).unwrap();
                counts[legal.iter().position(|&a| a == t).unwrap()] += 1;
            }
            let chi2: f64 = counts
                .iter()
                .zip(&expected)
                .map(|(&c, &p)| (c as f64 - n as f64 * p).powi(2) / (n as f64 * p))
                .sum();
            let p_value = 1.0 - ChiSquared::new(2.0).unwrap().cdf(chi2);
            assert!(p_value > 1e-3, "temperature {temperature}: chi2 {chi2}");
        }
        // Half temperature squares the ratios.
        let sharp = imitation_probs(&[1.0, 2.0, 4.0], 0.5);
        assert!((sharp[2] / sharp[0] - 16.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn imitation_probs_is_a_distribution(
            p in prop::collection::vec(0.0f64..1.0, 1..20),
            temperature in 0.05f64..5.0,
        ) {
            prop_assume!(p.iter().any(|&x| x > 1e-12));
            let q = imitation_probs(&p, temperature);
            prop_assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for (a, b) in p.iter().zip(&q) {
                prop_assert!(*b >= 0.0);
                prop_assert_eq!(*a == 0.0, *b == 0.0);
            }
        }

        #[test]
        fn uniform_random_stays_in_range(n in 1usize..30, seed: u64) {
            let xs: Vec<usize> = (0..n).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            prop_assert!(uniform_random(&xs, &mut rng) < n);
        }
    }
}
