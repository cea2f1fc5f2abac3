//! Dual-head decoder-only transformer: a next-observation head and an
//! outcome classification head over a shared GPT-2 style trunk.

mod config;
mod model;
mod net;
mod params;
mod scalar;
mod train;

use thiserror::Error;

use crate::model::ModelError;

pub use config::{ModelConfig, TrainConfig};
pub use model::NeuralModel;
pub use params::{Layout, Params, TensorSpec};
pub use scalar::Scalar;
pub use train::{
    evaluate, loss_and_grad, sequence, train, EpochStats, LossSums, TrainLog, LM_WEIGHT,
};

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("empty training set")]
    EmptyDataset,
    #[error("invalid training example: {0}")]
    BadExample(String),
    #[error("training diverged at epoch {epoch}, step {step}")]
    Diverged { epoch: usize, step: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}
