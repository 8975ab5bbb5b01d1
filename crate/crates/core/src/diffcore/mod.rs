//! Reverse-mode differentiable computation over dense real arrays.
//!
//! The tape records primitive applications during the forward pass and
//! replays them in reverse for gradients. Everything runs in f64; the same
//! kernels back both the recorded path and the tape-free inference path.

mod adam;
mod array;
mod gradcheck;
pub mod kernels;
mod lstm;
mod params;
mod tape;

pub use adam::{AdamConfig, AdamState};
pub use array::Array;
pub use gradcheck::{finite_diff_check, GRAD_CHECK_EPS};
pub use lstm::{init_lstm_params, lstm_cell, lstm_cell_fast, lstm_param_count, LstmDims};
pub use params::ParamStore;
pub use tape::{Gradients, NodeId, Op, Tape, LAYER_NORM_EPS, LEAKY_SLOPE};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiffError {
    #[error("{op}: shape mismatch: {detail}")]
    ShapeMismatch { op: String, detail: String },
    #[error("bad shape: {0}")]
    BadShape(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("expected scalar, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("unknown parameter {0:?}")]
    UnknownParam(String),
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
}
