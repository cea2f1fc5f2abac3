use std::sync::Arc;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{Action, GameConfig, GameError, GameState};
use crate::model::{GenerativeModel, ModelError, OutcomeValueFn};
use crate::search::{
    go_mcts, pimc, ExpectimaxEvaluator, HeartsAdapter, PerfectInfoEvaluator, PlayerView,
    SearchError, SearchParams, UctEvaluator,
};
use crate::tokenizer::{ObservationHistory, Vocabulary};

use super::{argmax_val_star, sample_imitation, uniform_random, ScriptedAgent};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("policy {0} needs a model")]
    NeedsModel(String),
    #[error("invalid policy: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Game(#[from] GameError),
}

/// Perfect-information evaluator used inside PIMC.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EvaluatorKind {
    Expectimax,
    Uct { iterations: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyKind {
    ArgmaxValStar {
        lambda: f64,
    },
    SampleImitation {
        temperature: f64,
    },
    UniformRandom,
    GoMcts(SearchParams),
    Pimc {
        worlds: usize,
        evaluator: EvaluatorKind,
    },
    Scripted,
}

impl PolicyKind {
    pub fn needs_model(&self) -> bool {
        matches!(
            self,
            PolicyKind::ArgmaxValStar { .. }
                | PolicyKind::SampleImitation { .. }
                | PolicyKind::GoMcts(_)
        )
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        match self {
            PolicyKind::ArgmaxValStar { lambda } if !(0.0..1.0).contains(lambda) => Err(
                PolicyError::Invalid(format!("lambda {lambda} outside [0, 1)")),
            ),
            PolicyKind::SampleImitation { temperature } if !(*temperature > 0.0) => Err(
                PolicyError::Invalid(format!("temperature {temperature} must be positive")),
            ),
            PolicyKind::GoMcts(p) => p
                .validate()
                .map_err(|e| PolicyError::Invalid(e.to_string())),
            PolicyKind::Pimc { worlds: 0, .. } => {
                Err(PolicyError::Invalid("pimc needs worlds".into()))
            }
            _ => Ok(()),
        }
    }
}

/// A decision rule and the outcome values it optimizes. Without an
/// explicit value function the game's differential value is used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    #[serde(flatten)]
    pub kind: PolicyKind,
    #[serde(default)]
    pub value_fn: Option<OutcomeValueFn>,
}

impl PolicyConfig {
    pub fn new(kind: PolicyKind) -> PolicyConfig {
        PolicyConfig {
            kind,
            value_fn: None,
        }
    }

    pub fn value_fn(&self, game: &GameConfig) -> OutcomeValueFn {
        self.value_fn
            .clone()
            .unwrap_or_else(|| OutcomeValueFn::for_config(game))
    }
}

/// A seat at the table. Agents see the true state only to read their own
/// view: the legal moves, their hand and public information.
pub trait Agent: Send + Sync {
    fn act(
        &self,
        state: &GameState,
        history: &ObservationHistory,
        rng: &mut dyn RngCore,
    ) -> Result<Action, PolicyError>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct UniformAgent;

impl Agent for UniformAgent {
    fn act(
        &self,
        state: &GameState,
        _history: &ObservationHistory,
        rng: &mut dyn RngCore,
    ) -> Result<Action, PolicyError> {
        Ok(uniform_random(&state.legal_actions()?, rng))
    }
}

/// ArgmaxVal*, imitation sampling or GO-MCTS on a model.
pub struct ModelAgent {
    model: Arc<dyn GenerativeModel>,
    kind: PolicyKind,
    v: OutcomeValueFn,
    vocab: Vocabulary,
    adapter: HeartsAdapter,
}

impl ModelAgent {
    pub fn new(
        model: Arc<dyn GenerativeModel>,
        kind: PolicyKind,
        v: OutcomeValueFn,
        game: &GameConfig,
    ) -> ModelAgent {
        ModelAgent {
            model,
            kind,
            v,
            vocab: Vocabulary::new(game),
            adapter: HeartsAdapter::new(game),
        }
    }
}

impl Agent for ModelAgent {
    fn act(
        &self,
        state: &GameState,
        history: &ObservationHistory,
        rng: &mut dyn RngCore,
    ) -> Result<Action, PolicyError> {
        let legal = state.legal_actions()?;
        if legal.len() == 1 {
            return Ok(legal[0]);
        }
        let tokens: Vec<_> = legal.iter().map(|&c| self.vocab.card(c)).collect();
        let model = self.model.as_ref();
        let token = match &self.kind {
            PolicyKind::ArgmaxValStar { lambda } => {
                argmax_val_star(model, history, &tokens, *lambda, &self.v)?
            }
            PolicyKind::SampleImitation { temperature } => {
                sample_imitation(model, history, &tokens, *temperature, rng)?
            }
            PolicyKind::GoMcts(params) => {
                let params = SearchParams {
                    seed: rng.random(),
                    ..params.clone()
                };
                go_mcts(history, model, &self.adapter, &params, &self.v)?.action
            }
            other => {
                return Err(PolicyError::Invalid(format!(
                    "{other:?} is not a model policy"
                )))
            }
        };
        let card = self.vocab.as_card(token).expect("action tokens are cards");
        debug_assert!(legal.contains(&card));
        Ok(card)
    }
}

/// Determinized search on sampled worlds.
pub struct PimcAgent {
    worlds: usize,
    evaluator: Box<dyn PerfectInfoEvaluator>,
    v: OutcomeValueFn,
}

impl PimcAgent {
    pub fn new(worlds: usize, evaluator: &EvaluatorKind, v: OutcomeValueFn) -> PimcAgent {
        let evaluator: Box<dyn PerfectInfoEvaluator> = match evaluator {
            EvaluatorKind::Expectimax => Box::new(ExpectimaxEvaluator),
            EvaluatorKind::Uct { iterations } => Box::new(UctEvaluator {
                iterations: *iterations,
                ..UctEvaluator::default()
            }),
        };
        PimcAgent {
            worlds,
            evaluator,
            v,
        }
    }
}

impl Agent for PimcAgent {
    fn act(
        &self,
        state: &GameState,
        _history: &ObservationHistory,
        rng: &mut dyn RngCore,
    ) -> Result<Action, PolicyError> {
        let view = PlayerView::new(state, state.to_move());
        Ok(pimc(
            &view,
            self.worlds,
            self.evaluator.as_ref(),
            &self.v,
            rng,
        )?)
    }
}

pub fn build_agent(
    config: &PolicyConfig,
    game: &GameConfig,
    model: Option<Arc<dyn GenerativeModel>>,
) -> Result<Box<dyn Agent>, PolicyError> {
    config.kind.validate()?;
    let v = config.value_fn(game);
    Ok(match &config.kind {
        PolicyKind::UniformRandom => Box::new(UniformAgent),
        PolicyKind::Scripted => Box::new(ScriptedAgent),
        PolicyKind::Pimc { worlds, evaluator } => Box::new(PimcAgent::new(*worlds, evaluator, v)),
        kind => {
            let model = model.ok_or_else(|| PolicyError::NeedsModel(format!("{kind:?}")))?;
            Box::new(ModelAgent::new(model, kind.clone(), v, game))
        }
    })
}
