//! The measurement harness: threshold calibration, empirical FPR/FNR with
//! confidence intervals, backup-filter composition, space accounting,
//! comparison curves, parameter counting, and timing benchmarks.

mod calibrate;
mod composite;
mod measure;
mod space;
mod timing;

pub use calibrate::{calibrate_threshold, CalibratedModel, MIN_VALIDATION_NEGATIVES};
pub use composite::{build_composite, CompositeFilter};
pub use measure::{measure_fpr_fnr, wilson_interval, ClassicalBloom, ClassicalCuckoo, Rates};
pub use space::{
    curve_to_csv, extrapolation_curve, extrapolation_to_csv, param_count, space_curve,
    total_space, CurveRow, ExtrapolationRow, SpaceReport,
};
pub use timing::{timing_bench, timing_to_csv, BenchArtifact, TimingRow};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Train(#[from] crate::metatrain::TrainError),
    #[error(transparent)]
    Diff(#[from] crate::diffcore::DiffError),
    #[error(transparent)]
    Filter(#[from] crate::filters::FilterError),
    #[error(transparent)]
    Data(#[from] crate::tasks::DataError),
    #[error("calibration needs at least {need} negative queries, got {have}")]
    NotEnoughValidation { have: usize, need: usize },
    #[error("target rate {0} is unattainable: non-finite logits in validation")]
    UnattainableEpsilon(f64),
    #[error("state precision must be 16, 32, or 64 bits, got {0}")]
    BadPrecision(u32),
    #[error("query budget must be at least 1000, got {0}")]
    BudgetTooSmall(usize),
}
