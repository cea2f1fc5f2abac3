use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::game::GameConfig;
use crate::model::{
    fit_trie, GenerativeModel, LabeledHistory, ModelError, NextObsDistribution,
    OutcomeDistribution, OutcomeSpace, TrieModel,
};
use crate::neural::{train, ModelConfig, NeuralError, NeuralModel, TrainConfig};
use crate::tokenizer::{ObservationHistory, Vocabulary};

/// Transformer shape without the game-dependent sizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NeuralShape {
    pub embed_dim: usize,
    pub num_heads: usize,
    pub num_layers: usize,
    pub inner_dim: usize,
    pub embed_dropout: f64,
    pub resid_dropout: f64,
    pub attn_dropout: f64,
    pub initializer_range: f64,
}

impl Default for NeuralShape {
    fn default() -> NeuralShape {
        let c = ModelConfig::desk(&GameConfig::mini(3));
        NeuralShape {
            embed_dim: c.embed_dim,
            num_heads: c.num_heads,
            num_layers: c.num_layers,
            inner_dim: c.inner_dim,
            embed_dropout: c.embed_dropout,
            resid_dropout: c.resid_dropout,
            attn_dropout: c.attn_dropout,
            initializer_range: c.initializer_range,
        }
    }
}

impl NeuralShape {
    pub fn model_config(&self, game: &GameConfig) -> ModelConfig {
        ModelConfig {
            embed_dim: self.embed_dim,
            num_heads: self.num_heads,
            num_layers: self.num_layers,
            inner_dim: self.inner_dim,
            embed_dropout: self.embed_dropout,
            resid_dropout: self.resid_dropout,
            attn_dropout: self.attn_dropout,
            initializer_range: self.initializer_range,
            ..ModelConfig::desk(game)
        }
    }
}

/// How each iteration's model is fitted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Learner {
    /// Suffix-context counts. A warm start keeps the previous counts and
    /// adds the new data.
    Trie {
        smoothing: f64,
        /// Longest context; the full history length when absent.
        #[serde(default)]
        max_context: Option<usize>,
        /// Contexts seen fewer times than this are dropped after each fit.
        #[serde(default = "default_min_count")]
        min_count: u32,
    },
    /// The transformer, warm-started from the previous parameters.
    Neural {
        #[serde(default)]
        shape: NeuralShape,
        #[serde(default)]
        train: TrainConfig,
    },
}

impl Default for Learner {
    fn default() -> Learner {
        Learner::Trie {
            smoothing: 1.0,
            max_context: None,
            min_count: default_min_count(),
        }
    }
}

fn default_min_count() -> u32 {
    2
}

/// A fitted model of either kind.
pub enum TrainedModel {
    Trie(TrieModel),
    Neural(NeuralModel),
}

impl Learner {
    pub fn fit(
        &self,
        game: &GameConfig,
        data: &[LabeledHistory],
        warm: Option<&TrainedModel>,
        seed: u64,
    ) -> Result<(TrainedModel, Option<crate::neural::TrainLog>), NeuralError> {
        match self {
            Learner::Trie {
                smoothing,
                max_context,
                min_count,
            } => {
                let max_context =
                    max_context.unwrap_or_else(|| Vocabulary::new(game).context_length());
                let mut model = match warm {
                    Some(TrainedModel::Trie(t)) => {
                        let mut t = t.clone();
                        t.set_smoothing(*smoothing);
                        t.extend(data)?;
                        t
                    }
                    Some(TrainedModel::Neural(_)) => {
                        return Err(NeuralError::Config(
                            "cannot warm-start a trie from a network".into(),
                        ))
                    }
                    None => fit_trie(game, data, *smoothing, max_context)?,
                };
                model.prune(*min_count);
                Ok((TrainedModel::Trie(model), None))
            }
            Learner::Neural { shape, train: tc } => {
                let config = shape.model_config(game);
                let init = match warm {
                    Some(TrainedModel::Neural(m)) => Some(m.params()),
                    Some(TrainedModel::Trie(_)) => {
                        return Err(NeuralError::Config(
                            "cannot warm-start a network from a trie".into(),
                        ))
                    }
                    None => None,
                };
                let tc = TrainConfig { seed, ..tc.clone() };
                let (params, log) = train(data, &config, &tc, init)?;
                Ok((
                    TrainedModel::Neural(NeuralModel::new(game, params)?),
                    Some(log),
                ))
            }
        }
    }
}

impl TrainedModel {
    pub fn game(&self) -> &GameConfig {
        match self {
            TrainedModel::Trie(m) => m.config(),
            TrainedModel::Neural(m) => m.game(),
        }
    }

    pub fn save<W: Write>(&self, w: &mut W) -> Result<(), ModelError> {
        match self {
            TrainedModel::Trie(m) => m.save(w),
            TrainedModel::Neural(m) => m.save(w),
        }
    }

    pub fn save_file(&self, path: &Path) -> Result<(), ModelError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.save(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Loads either model file, telling them apart by their magic bytes.
    pub fn load_file(path: &Path) -> Result<TrainedModel, ModelError> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        r.rewind()?;
        match &magic {
            b"GOMCTRIE" => Ok(TrainedModel::Trie(TrieModel::load(&mut r)?)),
            b"GOMCTNET" => Ok(TrainedModel::Neural(NeuralModel::load(&mut r)?)),
            _ => Err(ModelError::Format(format!(
                "{} is not a model file",
                path.display()
            ))),
        }
    }

    fn inner(&self) -> &dyn GenerativeModel {
        match self {
            TrainedModel::Trie(m) => m,
            TrainedModel::Neural(m) => m,
        }
    }
}

impl GenerativeModel for TrainedModel {
    fn vocab_size(&self) -> usize {
        self.inner().vocab_size()
    }

    fn context_length(&self) -> usize {
        self.inner().context_length()
    }

    fn outcomes(&self) -> &OutcomeSpace {
        self.inner().outcomes()
    }

    fn next_obs_dist(&self, h: &ObservationHistory) -> Result<NextObsDistribution, ModelError> {
        self.inner().next_obs_dist(h)
    }

    fn outcome_dist(&self, h: &ObservationHistory) -> Result<OutcomeDistribution, ModelError> {
        self.inner().outcome_dist(h)
    }
}
