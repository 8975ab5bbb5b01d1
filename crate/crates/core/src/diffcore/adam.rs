//! Adam optimizer with bias correction.

use std::collections::BTreeMap;

use super::{Array, DiffError, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_lr(learning_rate: f64) -> Self {
        AdamConfig {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second-moment estimates per parameter plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    first_moment: BTreeMap<String, Array>,
    second_moment: BTreeMap<String, Array>,
    step: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Self {
        AdamState {
            config,
            first_moment: BTreeMap::new(),
            second_moment: BTreeMap::new(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One Adam update. Parameters without a gradient entry are untouched.
    ///
    /// Non-finite gradients abort with an error naming the parameter so the
    /// training loop can stop with diagnostics.
    pub fn step(
        &mut self,
        params: &mut ParamStore,
        grads: &BTreeMap<String, Array>,
    ) -> Result<(), DiffError> {
        for (name, grad) in grads {
            if !grad.all_finite() {
                return Err(DiffError::NonFinite(format!("gradient for {name:?}")));
            }
            let param = params.get(name)?;
            if param.shape() != grad.shape() {
                return Err(DiffError::BadShape(format!(
                    "gradient for {name:?} has shape {:?}, parameter has {:?}",
                    grad.shape(),
                    param.shape()
                )));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let bias1 = 1.0 - beta1.powi(t);
        let bias2 = 1.0 - beta2.powi(t);

        for (name, grad) in grads {
            let m = self
                .first_moment
                .entry(name.clone())
                .or_insert_with(|| Array::zeros(grad.shape().to_vec()));
            let v = self
                .second_moment
                .entry(name.clone())
                .or_insert_with(|| Array::zeros(grad.shape().to_vec()));
            let param = params.get_mut(name)?;
            for ((pv, gv), (mv, vv)) in param
                .values_mut()
                .iter_mut()
                .zip(grad.values())
                .zip(m.values_mut().iter_mut().zip(v.values_mut()))
            {
                *mv = beta1 * *mv + (1.0 - beta1) * gv;
                *vv = beta2 * *vv + (1.0 - beta2) * gv * gv;
                let m_hat = *mv / bias1;
                let v_hat = *vv / bias2;
                *pv -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}
