//! Classical approximate-set-membership baselines: Bloom and Cuckoo filters
//! with analytical sizing and false-positive formulas.

mod bloom;
mod cuckoo;
mod hash;

pub use bloom::BloomFilter;
pub use cuckoo::CuckooFilter;
pub use hash::KeyedHasher;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("epsilon must be in (0,1), got {0}")]
    InvalidEpsilon(f64),
    #[error("expected element count must be >= 1")]
    InvalidCount,
    #[error("fingerprint width {0} exceeds 32 bits")]
    FingerprintTooWide(u32),
    #[error("bad filter serialization: {0}")]
    BadSerialization(String),
}

/// Sizing inputs: expected element count and target false-positive rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub n: usize,
    pub epsilon: f64,
}

impl FilterConfig {
    pub fn new(n: usize, epsilon: f64) -> Result<Self, FilterError> {
        if n < 1 {
            return Err(FilterError::InvalidCount);
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(FilterError::InvalidEpsilon(epsilon));
        }
        Ok(FilterConfig { n, epsilon })
    }
}

/// Bloom sizing: m = ceil(n log2(1/eps) log2 e) bits, k = ceil(log2(1/eps)).
pub fn bloom_size_for(n: usize, epsilon: f64) -> Result<(u64, u32), FilterError> {
    let config = FilterConfig::new(n, epsilon)?;
    let bits_per_element = (1.0 / config.epsilon).log2() * std::f64::consts::LOG2_E;
    let m = (config.n as f64 * bits_per_element).ceil() as u64;
    let k = (1.0 / config.epsilon).log2().ceil() as u32;
    Ok((m.max(1), k.clamp(1, 64)))
}

/// Information-theoretic lower bound n log2(1/eps), in bits.
pub fn optimal_space_bound(n: usize, epsilon: f64) -> Result<f64, FilterError> {
    let config = FilterConfig::new(n, epsilon)?;
    Ok(config.n as f64 * (1.0 / config.epsilon).log2())
}

/// Analytical Bloom false-positive rate (1 - e^{-kn/m})^k.
pub fn analytical_fpr(m: u64, n: usize, k: u32) -> f64 {
    let exponent = -(k as f64) * (n as f64) / (m as f64);
    (1.0 - exponent.exp()).powi(k as i32)
}
