use serde::{Deserialize, Serialize};

use crate::game::GameConfig;
use crate::model::OutcomeSpace;
use crate::tokenizer::Vocabulary;

use super::NeuralError;

/// Shape of the dual-head decoder-only transformer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    /// Input positions, including the start marker.
    pub context_length: usize,
    pub embed_dim: usize,
    pub num_heads: usize,
    pub num_layers: usize,
    pub inner_dim: usize,
    pub num_outcome_labels: usize,
    pub embed_dropout: f64,
    pub resid_dropout: f64,
    pub attn_dropout: f64,
    pub initializer_range: f64,
}

impl ModelConfig {
    /// Default size for training on a desk: 4 layers, 4 heads, width 128.
    pub fn desk(game: &GameConfig) -> ModelConfig {
        let vocab = Vocabulary::new(game);
        ModelConfig {
            vocab_size: vocab.size(),
            context_length: vocab.context_length(),
            embed_dim: 128,
            num_heads: 4,
            num_layers: 4,
            inner_dim: 512,
            num_outcome_labels: OutcomeSpace::new(game).len(),
            embed_dropout: 0.05,
            resid_dropout: 0.05,
            attn_dropout: 0.0,
            initializer_range: 0.02,
        }
    }

    /// The large configuration: 8 layers, 8 heads, width 256.
    pub fn full(game: &GameConfig) -> ModelConfig {
        ModelConfig {
            embed_dim: 256,
            num_heads: 8,
            num_layers: 8,
            inner_dim: 1024,
            embed_dropout: 0.1,
            resid_dropout: 0.1,
            attn_dropout: 0.1,
            ..ModelConfig::desk(game)
        }
    }

    /// A small model for tests and quick experiments.
    pub fn tiny(game: &GameConfig) -> ModelConfig {
        ModelConfig {
            embed_dim: 16,
            num_heads: 2,
            num_layers: 2,
            inner_dim: 64,
            ..ModelConfig::desk(game)
        }
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.num_heads
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        let bad = |m: &str| Err(NeuralError::Config(m.to_string()));
        if self.vocab_size == 0 || self.num_outcome_labels == 0 || self.context_length == 0 {
            return bad("empty vocabulary, outcome set or context");
        }
        if self.embed_dim == 0 || self.num_heads == 0 || !self.embed_dim.is_multiple_of(self.num_heads) {
            return bad("embed_dim must be a positive multiple of num_heads");
        }
        if self.inner_dim == 0 {
            return bad("inner_dim must be positive");
        }
        for p in [self.embed_dropout, self.resid_dropout, self.attn_dropout] {
            if !(0.0..1.0).contains(&p) {
                return bad("dropout rates must lie in [0, 1)");
            }
        }
        if !(self.initializer_range > 0.0) {
            return bad("initializer_range must be positive");
        }
        Ok(())
    }

    /// Whether this model can read every history of `game`.
    pub fn fits_game(&self, game: &GameConfig) -> Result<(), NeuralError> {
        let vocab = Vocabulary::new(game);
        if self.vocab_size != vocab.size() {
            return Err(NeuralError::Config(format!(
                "vocab_size {} but the game has {} tokens",
                self.vocab_size,
                vocab.size()
            )));
        }
        if self.context_length < vocab.max_history_len() + 1 {
            return Err(NeuralError::Config(format!(
                "context_length {} is shorter than start marker plus {} history tokens",
                self.context_length,
                vocab.max_history_len()
            )));
        }
        let outcomes = OutcomeSpace::new(game).len();
        if self.num_outcome_labels != outcomes {
            return Err(NeuralError::Config(format!(
                "num_outcome_labels {} but the game has {outcomes} outcomes",
                self.num_outcome_labels
            )));
        }
        Ok(())
    }
}

/// Optimizer and schedule. Defaults follow the usual AdamW settings with a
/// linear decay to zero over all steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Global gradient norm clip; zero disables clipping.
    pub max_grad_norm: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            learning_rate: 1e-4,
            epochs: 3,
            batch_size: 8,
            weight_decay: 0.0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_grad_norm: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        let bad = |m: &str| Err(NeuralError::Config(m.to_string()));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and non-negative");
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("betas must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) || self.weight_decay < 0.0 || self.max_grad_norm < 0.0 {
            return bad("epsilon must be positive, weight decay and clip non-negative");
        }
        Ok(())
    }
}
