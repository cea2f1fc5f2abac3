use rand::Rng;

use crate::tokenizer::Token;

use super::ModelError;

fn normalize(mut weights: Vec<f64>) -> Result<Vec<f64>, ModelError> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() || weights.iter().any(|&w| w < 0.0) {
        return Err(ModelError::DistributionUndefined);
    }
    for w in &mut weights {
        *w /= total;
    }
    Ok(weights)
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Probabilities over the whole token vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub struct NextObsDistribution {
    probs: Vec<f64>,
}

impl NextObsDistribution {
    pub fn from_weights(weights: Vec<f64>) -> Result<NextObsDistribution, ModelError> {
        Ok(NextObsDistribution {
            probs: normalize(weights)?,
        })
    }

    pub fn from_logits(logits: &[f64]) -> NextObsDistribution {
        NextObsDistribution {
            probs: softmax(logits),
        }
    }

    pub fn point_mass(vocab_size: usize, token: Token) -> NextObsDistribution {
        let mut probs = vec![0.0; vocab_size];
        probs[token as usize] = 1.0;
        NextObsDistribution { probs }
    }

    pub fn prob(&self, token: Token) -> f64 {
        self.probs.get(token as usize).copied().unwrap_or(0.0)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Tokens with positive probability.
    pub fn support(&self) -> impl Iterator<Item = (Token, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(t, &p)| (t as Token, p))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Token {
        sample_index(&self.probs, rng) as Token
    }
}

/// Probabilities over the outcome ids of an [`super::OutcomeSpace`].
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeDistribution {
    probs: Vec<f64>,
}

impl OutcomeDistribution {
    pub fn from_weights(weights: Vec<f64>) -> Result<OutcomeDistribution, ModelError> {
        Ok(OutcomeDistribution {
            probs: normalize(weights)?,
        })
    }

    pub fn from_logits(logits: &[f64]) -> OutcomeDistribution {
        OutcomeDistribution {
            probs: softmax(logits),
        }
    }

    pub fn point_mass(num_outcomes: usize, id: usize) -> OutcomeDistribution {
        let mut probs = vec![0.0; num_outcomes];
        probs[id] = 1.0;
        OutcomeDistribution { probs }
    }

    pub fn prob(&self, id: usize) -> f64 {
        self.probs.get(id).copied().unwrap_or(0.0)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(&self.probs, rng)
    }

    /// Expected value given the value of every outcome.
    pub fn expect(&self, values: &[f64]) -> f64 {
        self.probs.iter().zip(values).map(|(p, v)| p * v).sum()
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn weights_normalize() {
        let d = NextObsDistribution::from_weights(vec![1.0, 3.0, 0.0]).unwrap();
        assert_eq!(d.probs(), &[0.25, 0.75, 0.0]);
        assert_eq!(d.support().count(), 2);
        assert!(NextObsDistribution::from_weights(vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn softmax_sums_to_one() {
        let d = OutcomeDistribution::from_logits(&[1000.0, -5.0, 3.0, 0.0]);
        assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampling_never_picks_zero_mass() {
        let d = NextObsDistribution::from_weights(vec![0.0, 0.5, 0.0, 0.5, 0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let t = d.sample(&mut rng);
            assert!(t == 1 || t == 3);
        }
    }
}
