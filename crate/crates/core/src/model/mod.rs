//! The generative-model interface used by search and policies, with an
//! exact enumeration oracle and a count-based trie model.

mod dist;
mod oracle;
mod outcome;
mod trie;

use thiserror::Error;

use crate::tokenizer::{ObservationHistory, Token};

pub use dist::{NextObsDistribution, OutcomeDistribution};
pub use oracle::{build_exact_oracle, ExactOracle, StatePolicy, UniformStatePolicy};
pub use outcome::{OutcomeSpace, OutcomeValueFn};
pub use trie::{fit_trie, LabeledHistory, TrieModel};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("history of {len} tokens does not fit a context of {max}")]
    ContextOverflow { len: usize, max: usize },
    #[error("no deal is consistent with the history")]
    DistributionUndefined,
    #[error("enumeration would visit about {estimate:.3e} states")]
    ScaleRefusal { estimate: f64 },
    #[error("unsupported: {0}")]
    Unsupported(&'static str),
    #[error("history is already complete")]
    Terminal,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("token {token} outside the vocabulary of {vocab_size}")]
    BadToken { token: Token, vocab_size: usize },
    #[error("outcome label {label} outside {num_outcomes} outcomes")]
    BadLabel { label: usize, num_outcomes: usize },
    #[error("model file: {0}")]
    Format(String),
    #[error("manifest hash differs from the current {0} manifest")]
    ManifestMismatch(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A model of one player's observation stream: the distribution of the next
/// token and of the final outcome, given the history so far.
pub trait GenerativeModel: Send + Sync {
    fn vocab_size(&self) -> usize;

    /// Longest sequence the model accepts, counting the predicted token.
    fn context_length(&self) -> usize;

    fn outcomes(&self) -> &OutcomeSpace;

    fn next_obs_dist(&self, h: &ObservationHistory) -> Result<NextObsDistribution, ModelError>;

    fn outcome_dist(&self, h: &ObservationHistory) -> Result<OutcomeDistribution, ModelError>;
}

impl<M: GenerativeModel + ?Sized> GenerativeModel for &M {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }
    fn context_length(&self) -> usize {
        (**self).context_length()
    }
    fn outcomes(&self) -> &OutcomeSpace {
        (**self).outcomes()
    }
    fn next_obs_dist(&self, h: &ObservationHistory) -> Result<NextObsDistribution, ModelError> {
        (**self).next_obs_dist(h)
    }
    fn outcome_dist(&self, h: &ObservationHistory) -> Result<OutcomeDistribution, ModelError> {
        (**self).outcome_dist(h)
    }
}

impl<M: GenerativeModel + ?Sized> GenerativeModel for std::sync::Arc<M> {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }
    fn context_length(&self) -> usize {
        (**self).context_length()
    }
    fn outcomes(&self) -> &OutcomeSpace {
        (**self).outcomes()
    }
    fn next_obs_dist(&self, h: &ObservationHistory) -> Result<NextObsDistribution, ModelError> {
        (**self).next_obs_dist(h)
    }
    fn outcome_dist(&self, h: &ObservationHistory) -> Result<OutcomeDistribution, ModelError> {
        (**self).outcome_dist(h)
    }
}

/// Expected outcome value of `h` for its viewer: the sum over outcomes of
/// p(o | h) v(o).
pub fn state_value<M: GenerativeModel + ?Sized>(
    model: &M,
    h: &ObservationHistory,
    v: &OutcomeValueFn,
) -> Result<f64, ModelError> {
    let dist = model.outcome_dist(h)?;
    let values = model.outcomes().values(v, h.viewer());
    Ok(dist.expect(&values))
}

/// Model probabilities of the `legal` tokens, renormalized; uniform when
/// the model puts no mass on any of them.
pub fn legal_probs(probs: &[f64], legal: &[Token]) -> Vec<f64> {
    let raw: Vec<f64> = legal
        .iter()
        .map(|&t| probs.get(t as usize).copied().unwrap_or(0.0))
        .collect();
    let total: f64 = raw.iter().sum();
    if total > 0.0 && total.is_finite() {
        raw.into_iter().map(|p| p / total).collect()
    } else {
        vec![1.0 / legal.len() as f64; legal.len()]
    }
}

pub(crate) fn check_context(
    h: &ObservationHistory,
    context_length: usize,
) -> Result<(), ModelError> {
    if h.len() >= context_length {
        return Err(ModelError::ContextOverflow {
            len: h.len() + 1,
            max: context_length,
        });
    }
    Ok(())
}
