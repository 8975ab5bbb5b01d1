//! Meta-learning: episode loss, the training loop, and the hyper-parameter
//! sweep.

mod model;
mod sweep;
mod trainer;

pub use model::{AnyModel, EpisodeEval, ModelConfig, ModelMemory};
pub use sweep::{expand_grid, sweep, sweep_to_csv, SweepCell, SweepGrid, SweepResult, SweepRow};
pub use trainer::{
    log_to_csv, train, train_eval_sources, EvalRates, LogRow, TrainConfig, TrainOutcome, Trainer,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Diff(#[from] crate::diffcore::DiffError),
    #[error(transparent)]
    Baseline(#[from] crate::baselines::BaselineError),
    #[error(transparent)]
    Data(#[from] crate::tasks::DataError),
    #[error("bad training config: {0}")]
    Config(String),
    #[error("episode loss is not finite")]
    NonFiniteLoss,
    #[error("training diverged at step {step}; last good checkpoint is available from the trainer")]
    Diverged { step: usize },
}
