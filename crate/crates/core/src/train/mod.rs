//! Losses, the warmup/decay schedule, AdamW over two parameter groups and
//! the seeded training loop.

mod loss;
mod optim;
mod schedule;
mod synthetic;
mod trainer;

pub use loss::{bce_multilabel, cross_entropy};
pub use optim::{clip_grad_norm, global_norm, AdamW, OptimizerState};
pub use schedule::{lr_at, warmup_steps};
pub use synthetic::{planted_rule, tiny_config};
pub use trainer::{
    batch_loss, train_run, train_seeds, EpochRecord, RunResult, Target, TrainConfig, TrainExample, SHUFFLE_STREAM,
    VALIDATION_STREAM,
};

use alloc::string::String;

use crate::model::ModelError;
use crate::tensor::TensorError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("invalid train config: {0}")]
    Config(String),
    #[error("{0}")]
    Contract(String),
    #[error("loss diverged at step {step} (lr {lr:e}, grad norm {grad_norm:e})")]
    Diverged { step: u64, lr: f64, grad_norm: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl From<TensorError> for TrainError {
    fn from(e: TensorError) -> Self {
        TrainError::Model(ModelError::Tensor(e))
    }
}
