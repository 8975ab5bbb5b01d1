//! Neural Bloom Filter workbench.
//!
//! A meta-learned one-shot approximate-set-membership memory, classical
//! Bloom/Cuckoo filter baselines, LSTM and Memory-Network one-shot baselines,
//! and a benchmarking harness for space, false-positive-rate, extrapolation,
//! and timing comparisons.

pub mod baselines;
pub mod cli;
pub mod diffcore;
pub mod evalbench;
pub mod filters;
pub mod item;
pub mod metatrain;
pub mod nbf;
pub mod nets;
pub mod rng;
pub mod tasks;
