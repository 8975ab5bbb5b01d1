//! Composite filter: a calibrated model backed by a classical Bloom filter
//! holding its false negatives, so the pair never emits a false negative
//! for the stored set.

use crate::filters::BloomFilter;
use crate::item::Item;
use crate::metatrain::ModelMemory;

use super::{CalibratedModel, EvalError};

#[derive(Debug)]
pub struct CompositeFilter<'a> {
    calibrated: &'a CalibratedModel,
    memory: ModelMemory,
    backup: BloomFilter,
    n_false_negatives: usize,
    stored_count: usize,
}

/// Write the set through the model, collect its misses into a backup Bloom
/// filter sized at rate `delta`, and verify the zero-false-negative
/// guarantee exhaustively.
pub fn build_composite<'a>(
    calibrated: &'a CalibratedModel,
    items: &[Item],
    delta: f64,
    backup_seed: u64,
) -> Result<CompositeFilter<'a>, EvalError> {
    let memory = calibrated.store(items)?;
    let mut misses: Vec<&Item> = Vec::new();
    for item in items {
        if !calibrated.decide(&memory, item)? {
            misses.push(item);
        }
    }
    let mut backup = BloomFilter::for_config(misses.len().max(1), delta, backup_seed)?;
    for item in &misses {
        backup.insert(&item.key_bytes());
    }
    let composite = CompositeFilter {
        calibrated,
        memory,
        backup,
        n_false_negatives: misses.len(),
        stored_count: items.len(),
    };
    for item in items {
        debug_assert!(composite.query(item)?, "stored item rejected after build");
        if !composite.query(item)? {
            unreachable!("backup filter admits every inserted miss");
        }
    }
    Ok(composite)
}

impl CompositeFilter<'_> {
    /// Model-positive OR backup-positive.
    pub fn query(&self, item: &Item) -> Result<bool, EvalError> {
        if self.calibrated.decide(&self.memory, item)? {
            return Ok(true);
        }
        Ok(self.backup.query(&item.key_bytes()))
    }

    pub fn memory(&self) -> &ModelMemory {
        &self.memory
    }

    pub fn backup(&self) -> &BloomFilter {
        &self.backup
    }

    pub fn n_false_negatives(&self) -> usize {
        self.n_false_negatives
    }

    pub fn stored_count(&self) -> usize {
        self.stored_count
    }

    pub fn state_bits(&self) -> u64 {
        self.memory.value_count() as u64 * self.calibrated.precision_bits as u64
    }

    pub fn backup_bits(&self) -> u64 {
        self.backup.bit_count()
    }

    pub fn total_bits(&self) -> u64 {
        self.state_bits() + self.backup_bits()
    }
}
