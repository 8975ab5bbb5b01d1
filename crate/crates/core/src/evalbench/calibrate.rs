//! Operating-point selection: the threshold tau at which the model's
//! empirical validation FPR stays within the target rate.

use crate::diffcore::ParamStore;
use crate::item::Item;
use crate::metatrain::{AnyModel, ModelMemory};
use crate::tasks::Episode;

use super::EvalError;

/// Minimum negative validation queries for a trustworthy operating point.
pub const MIN_VALIDATION_NEGATIVES: usize = 10_000;

/// A trained model pinned to an operating point and a declared state
/// precision for bit accounting.
#[derive(Debug, Clone)]
pub struct CalibratedModel {
    pub model: AnyModel,
    pub params: ParamStore,
    pub tau: f64,
    pub precision_bits: u32,
    pub allow_long_unroll: bool,
}

impl CalibratedModel {
    pub fn new(
        model: AnyModel,
        params: ParamStore,
        tau: f64,
        precision_bits: u32,
    ) -> Result<Self, EvalError> {
        if !matches!(precision_bits, 16 | 32 | 64) {
            return Err(EvalError::BadPrecision(precision_bits));
        }
        if !tau.is_finite() {
            return Err(EvalError::UnattainableEpsilon(f64::NAN));
        }
        Ok(CalibratedModel {
            model,
            params,
            tau,
            precision_bits,
            allow_long_unroll: false,
        })
    }

    pub fn store(&self, items: &[Item]) -> Result<ModelMemory, EvalError> {
        Ok(self
            .model
            .store_set(&self.params, items, self.allow_long_unroll)?)
    }

    pub fn logit(&self, memory: &ModelMemory, item: &Item) -> Result<f64, EvalError> {
        Ok(self.model.query_logit(&self.params, memory, item)?)
    }

    /// Positive when the logit reaches the operating point.
    pub fn decide(&self, memory: &ModelMemory, item: &Item) -> Result<bool, EvalError> {
        Ok(self.logit(memory, item)? >= self.tau)
    }
}

/// The negative-query logits across validation episodes.
fn negative_logits(
    model: &AnyModel,
    params: &ParamStore,
    episodes: &[Episode],
    allow_long_unroll: bool,
) -> Result<Vec<f64>, EvalError> {
    let mut logits = Vec::new();
    for episode in episodes {
        let memory = model.store_set(params, &episode.storage, allow_long_unroll)?;
        for (query, &label) in episode.queries.iter().zip(&episode.labels) {
            if !label {
                logits.push(model.query_logit(params, &memory, query)?);
            }
        }
    }
    Ok(logits)
}

/// Smallest finite tau whose empirical validation FPR is at most epsilon
/// (positives are logits >= tau). Smaller tau admits more positives, so this
/// is the most permissive operating point meeting the rate.
pub fn calibrate_threshold(
    model: &AnyModel,
    params: &ParamStore,
    validation: &[Episode],
    epsilon: f64,
    allow_long_unroll: bool,
) -> Result<f64, EvalError> {
    let mut logits = negative_logits(model, params, validation, allow_long_unroll)?;
    if logits.len() < MIN_VALIDATION_NEGATIVES {
        return Err(EvalError::NotEnoughValidation {
            have: logits.len(),
            need: MIN_VALIDATION_NEGATIVES,
        });
    }
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(EvalError::UnattainableEpsilon(epsilon));
    }
    logits.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let allowed = (epsilon * logits.len() as f64).floor() as usize;
    if allowed >= logits.len() {
        // every negative may pass; sit just below the smallest logit
        return Ok(logits[logits.len() - 1] - 1.0);
    }
    // Just above the (allowed+1)-th largest logit: exactly `allowed` or fewer
    // negatives (under ties) score >= tau.
    Ok(logits[allowed].next_up())
}
