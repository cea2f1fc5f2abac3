//! Monte Carlo tree search over one player's observation histories, and the
//! determinized PIMC baseline.

mod adapter;
mod gomcts;
mod pimc;
mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::GameError;
use crate::model::ModelError;

pub use adapter::{GameAdapter, HeartsAdapter, Turn};
pub use gomcts::{
    backup, expand, go_mcts, rollout, select_uct, uct_score, RunEnd, RunKind, SearchResult,
    TraceRecord,
};
pub use pimc::{
    pimc, sample_world, ExpectimaxEvaluator, PerfectInfoEvaluator, PlayerView, UctEvaluator,
};
pub use tree::{ChildStats, SearchNode, SearchTree};

/// Settings of one GO-MCTS call.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchParams {
    pub n_runs: usize,
    /// Search-player turns a rollout may reach before it is cut off.
    pub n_rollout_steps: usize,
    pub exploration_c: f64,
    /// Minimum legal-normalized probability for an action to be expanded.
    pub expand_threshold: f64,
    /// Subtracted from every traversed edge of a run that ends illegally.
    pub illegal_penalty_mu: f64,
    pub seed: u64,
}

impl Default for SearchParams {
    /// 100 runs, rollouts of at most 2 own turns, C = 0.4, threshold 0.05
    /// and penalty 0.01.
    fn default() -> SearchParams {
        SearchParams {
            n_runs: 100,
            n_rollout_steps: 2,
            exploration_c: 0.4,
            expand_threshold: 0.05,
            illegal_penalty_mu: 0.01,
            seed: 0,
        }
    }
}

impl SearchParams {
    pub fn validate(&self) -> Result<(), SearchError> {
        let ok = self.n_runs >= 1
            && self.exploration_c >= 0.0
            && (0.0..1.0).contains(&self.expand_threshold)
            && self.illegal_penalty_mu >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(SearchError::BadParams(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid search parameters {0}")]
    BadParams(String),
    #[error("the search player is not to move at the root")]
    NotPlayerTurn,
    #[error("no legal action")]
    NoLegalAction,
    #[error("no consistent world found after {0} attempts")]
    NoConsistentWorld(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Game(#[from] GameError),
}
