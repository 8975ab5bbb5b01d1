//! Empirical FPR/FNR measurement with Wilson confidence intervals.

use crate::filters::{BloomFilter, CuckooFilter};
use crate::item::Item;
use crate::tasks::Episode;

use super::{CalibratedModel, EvalError};

/// z for a 99% two-sided normal interval.
const Z_99: f64 = 2.5758293035489004;

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z_99 * Z_99;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z_99 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Empirical rates plus 99% Wilson intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub fpr: f64,
    pub fnr: f64,
    pub fpr_ci: (f64, f64),
    pub fnr_ci: (f64, f64),
    pub false_positives: usize,
    pub false_negatives: usize,
    pub negatives: usize,
    pub positives: usize,
}

/// Anything that can store a set once and answer membership queries.
pub trait MembershipArtifact {
    type Stored;
    fn store(&self, items: &[Item]) -> Result<Self::Stored, EvalError>;
    fn decide(&self, stored: &Self::Stored, query: &Item) -> Result<bool, EvalError>;
}

impl MembershipArtifact for CalibratedModel {
    type Stored = crate::metatrain::ModelMemory;

    fn store(&self, items: &[Item]) -> Result<Self::Stored, EvalError> {
        CalibratedModel::store(self, items)
    }

    fn decide(&self, stored: &Self::Stored, query: &Item) -> Result<bool, EvalError> {
        CalibratedModel::decide(self, stored, query)
    }
}

/// Classical Bloom baseline sized for (n, epsilon) per stored set.
#[derive(Debug, Clone, Copy)]
pub struct ClassicalBloom {
    pub epsilon: f64,
    pub seed: u64,
}

impl MembershipArtifact for ClassicalBloom {
    type Stored = BloomFilter;

    fn store(&self, items: &[Item]) -> Result<BloomFilter, EvalError> {
        let mut filter = BloomFilter::for_config(items.len().max(1), self.epsilon, self.seed)?;
        for item in items {
            filter.insert(&item.key_bytes());
        }
        Ok(filter)
    }

    fn decide(&self, stored: &BloomFilter, query: &Item) -> Result<bool, EvalError> {
        Ok(stored.query(&query.key_bytes()))
    }
}

/// Classical Cuckoo baseline sized for (n, epsilon) per stored set.
#[derive(Debug, Clone, Copy)]
pub struct ClassicalCuckoo {
    pub epsilon: f64,
    pub seed: u64,
}

impl MembershipArtifact for ClassicalCuckoo {
    type Stored = CuckooFilter;

    fn store(&self, items: &[Item]) -> Result<CuckooFilter, EvalError> {
        let mut filter = CuckooFilter::for_config(items.len().max(1), self.epsilon, self.seed)?;
        for item in items {
            // capacity failures surface as false negatives in measurement,
            // which the zero-FN invariant test would catch
            filter.insert(&item.key_bytes());
        }
        Ok(filter)
    }

    fn decide(&self, stored: &CuckooFilter, query: &Item) -> Result<bool, EvalError> {
        Ok(stored.query(&query.key_bytes()))
    }
}

/// Walk episodes (storing each set once) until the query budget is spent;
/// count false decisions against the exact labels.
pub fn measure_fpr_fnr<A: MembershipArtifact>(
    artifact: &A,
    episodes: &[Episode],
    query_budget: usize,
) -> Result<Rates, EvalError> {
    if query_budget < 1000 {
        return Err(EvalError::BudgetTooSmall(query_budget));
    }
    let mut seen = 0usize;
    let mut false_positives = 0usize;
    let mut false_negatives = 0usize;
    let mut negatives = 0usize;
    let mut positives = 0usize;
    'outer: for episode in episodes {
        let stored = artifact.store(&episode.storage)?;
        for (query, &label) in episode.queries.iter().zip(&episode.labels) {
            if seen >= query_budget {
                break 'outer;
            }
            seen += 1;
            let decision = artifact.decide(&stored, query)?;
            if label {
                positives += 1;
                if !decision {
                    false_negatives += 1;
                }
            } else {
                negatives += 1;
                if decision {
                    false_positives += 1;
                }
            }
        }
    }
    Ok(Rates {
        fpr: false_positives as f64 / negatives.max(1) as f64,
        fnr: false_negatives as f64 / positives.max(1) as f64,
        fpr_ci: wilson_interval(false_positives, negatives),
        fnr_ci: wilson_interval(false_negatives, positives),
        false_positives,
        false_negatives,
        negatives,
        positives,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_interval_brackets_the_point_estimate() {
        let (lo, hi) = wilson_interval(50, 1000);
        assert!(lo < 0.05 && 0.05 < hi);
        assert!(hi - lo < 0.05);
        let (lo, hi) = wilson_interval(0, 1000);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.02);
    }
}
