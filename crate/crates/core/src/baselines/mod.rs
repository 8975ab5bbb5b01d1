//! One-shot memory baselines: an LSTM that compresses the storage set into
//! its final recurrent state, and a slot-per-item Memory Network scored by
//! maximum cosine similarity.

mod lstm;
mod memnet;

pub use lstm::{LstmConfig, LstmFamiliarityModel, LstmState};
pub use memnet::{cosine, MemNetConfig, MemNetFamiliarityModel, MemNetMemory};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error(transparent)]
    Diff(#[from] crate::diffcore::DiffError),
    #[error("sequence of {len} items exceeds the BPTT unroll limit {max}; pass the override to proceed")]
    UnrollTooLong { len: usize, max: usize },
    #[error("storage sequence is empty")]
    EmptySequence,
    #[error("memory network query against empty memory")]
    EmptyMemory,
}
