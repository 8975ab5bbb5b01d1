//! Moving ZCA sphering of the query word.
//!
//! First and second moments are tracked by exponential moving averages; every
//! `period` steps the ZCA matrix is recomputed from the centered second
//! moment and folded into the projection with a period-scaled discount.
//! At evaluation time the projection is frozen.

use crate::diffcore::{kernels, Array, DiffError};

use super::eig::symmetric_eigen;

/// Eigenvalue regularizer inside the inverse square root.
pub const ZCA_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpheringConfig {
    pub enabled: bool,
    /// Moment EMA decay.
    pub gamma: f64,
    /// Projection EMA decay, scaled by the update period.
    pub eta: f64,
    /// Steps between eigendecompositions.
    pub period: u64,
}

impl Default for SpheringConfig {
    fn default() -> Self {
        SpheringConfig {
            enabled: true,
            gamma: 0.99,
            eta: 0.99,
            period: 100,
        }
    }
}

/// ZCA matrix U diag((s + eps)^{-1/2}) U^T of the centered second moment
/// sigma - mu mu^T. Negative eigenvalues from numerical noise are clamped.
pub fn zca_matrix(second_moment: &Array, mean: &[f64], eps: f64) -> Array {
    let d = mean.len();
    let mut centered = second_moment.values().to_vec();
    for i in 0..d {
        for j in 0..d {
            centered[i * d + j] -= mean[i] * mean[j];
        }
    }
    let centered = Array::new(vec![d, d], centered).expect("moments stay finite");
    let (u, vals) = symmetric_eigen(&centered);
    let inv_roots: Vec<f64> = vals.iter().map(|&v| 1.0 / (v.max(0.0) + eps).sqrt()).collect();
    let mut w = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let mut acc = 0.0;
            for k in 0..d {
                acc += u.at2(i, k) * inv_roots[k] * u.at2(j, k);
            }
            w[i * d + j] = acc;
        }
    }
    Array::new(vec![d, d], w).expect("projection stays finite")
}

/// Moving estimates plus the frozen-at-eval projection matrix.
#[derive(Debug, Clone)]
pub struct ZcaState {
    config: SpheringConfig,
    dim: usize,
    mean: Vec<f64>,
    second_moment: Array,
    projection: Array,
    step: u64,
    training: bool,
}

impl ZcaState {
    /// Start from identity second moment and projection.
    pub fn new(dim: usize, config: SpheringConfig) -> Self {
        let mut eye = Array::zeros(vec![dim, dim]);
        for i in 0..dim {
            eye.values_mut()[i * dim + i] = 1.0;
        }
        ZcaState {
            config,
            dim,
            mean: vec![0.0; dim],
            second_moment: eye.clone(),
            projection: eye,
            step: 0,
            training: true,
        }
    }

    pub fn config(&self) -> SpheringConfig {
        self.config
    }

    pub fn enabled(&self) -> bool {
        self.config.enabled
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn set_training(&mut self, training: bool) {
        self.training = training;
    }

    pub fn is_training(&self) -> bool {
        self.training
    }

    pub fn projection(&self) -> &Array {
        &self.projection
    }

    /// Restore a projection from a checkpoint.
    pub fn set_projection(&mut self, projection: Array) {
        assert_eq!(projection.shape(), &[self.dim, self.dim]);
        self.projection = projection;
    }

    /// For tests and diagnostics: set the moment estimates directly.
    pub fn set_moments(&mut self, mean: Vec<f64>, second_moment: Array) {
        assert_eq!(mean.len(), self.dim);
        assert_eq!(second_moment.shape(), &[self.dim, self.dim]);
        self.mean = mean;
        self.second_moment = second_moment;
    }

    /// ZCA matrix from the current moment estimates.
    pub fn current_zca_matrix(&self) -> Array {
        zca_matrix(&self.second_moment, &self.mean, ZCA_EPS)
    }

    /// Project a raw query through the (possibly frozen) projection.
    pub fn project(&self, raw: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        kernels::matvec(self.projection.values(), raw, self.dim, self.dim, &mut out);
        out
    }

    /// One EMA update from a batch of raw queries. A no-op outside training
    /// mode; the projection only moves every `period` steps.
    pub fn update(&mut self, batch: &[Vec<f64>]) -> Result<(), DiffError> {
        if !self.training || !self.config.enabled || batch.is_empty() {
            return Ok(());
        }
        let d = self.dim;
        let bsz = batch.len() as f64;
        let gamma = self.config.gamma;

        let mut batch_mean = vec![0.0; d];
        for s in batch {
            debug_assert_eq!(s.len(), d);
            for (m, v) in batch_mean.iter_mut().zip(s.iter()) {
                *m += v;
            }
        }
        for m in batch_mean.iter_mut() {
            *m /= bsz;
        }
        for (m, bm) in self.mean.iter_mut().zip(&batch_mean) {
            *m = gamma * *m + (1.0 - gamma) * bm;
        }

        let sigma = self.second_moment.values_mut();
        for i in 0..d {
            for j in 0..d {
                let mut outer = 0.0;
                for s in batch {
                    outer += s[i] * s[j];
                }
                outer /= bsz;
                sigma[i * d + j] = gamma * sigma[i * d + j] + (1.0 - gamma) * outer;
            }
        }
        if self.mean.iter().any(|v| !v.is_finite()) || !self.second_moment.all_finite() {
            return Err(DiffError::NonFinite("zca moment update".to_string()));
        }

        self.step += 1;
        if self.step % self.config.period == 0 {
            let w = self.current_zca_matrix();
            let eta_scaled = self.config.eta / self.config.period as f64;
            for (theta, wv) in self.projection.values_mut().iter_mut().zip(w.values()) {
                *theta = eta_scaled * *theta + (1.0 - eta_scaled) * wv;
            }
            if !self.projection.all_finite() {
                return Err(DiffError::NonFinite("zca projection update".to_string()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn scalar_case_matches_inverse_root() {
        // sigma = 4, mu = 0 gives W = (4 + eps)^{-1/2} ~ 0.5.
        let w = zca_matrix(&Array::matrix(1, 1, vec![4.0]).unwrap(), &[0.0], ZCA_EPS);
        assert!((w.values()[0] - 0.5).abs() < 1e-6, "w = {}", w.values()[0]);
    }

    #[test]
    fn eval_mode_freezes_the_projection() {
        let mut state = ZcaState::new(3, SpheringConfig { period: 1, ..Default::default() });
        state.set_training(false);
        let before = state.projection().clone();
        let batch: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, 1.0, -2.0]).collect();
        state.update(&batch).unwrap();
        assert_eq!(state.projection(), &before);
        assert_eq!(state.step_count(), 0);
    }

    #[test]
    fn identity_covariance_stream_converges_to_identity_projection() {
        let mut state = ZcaState::new(
            4,
            SpheringConfig {
                enabled: true,
                gamma: 0.99,
                eta: 0.99,
                period: 100,
            },
        );
        let mut r = rng::chacha(5, 0);
        // Batched updates, as the training loop delivers them.
        for _ in 0..1000 {
            let batch: Vec<Vec<f64>> = (0..16)
                .map(|_| (0..4).map(|_| rng::normal(&mut r)).collect())
                .collect();
            state.update(&batch).unwrap();
        }
        let mut frob = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j { 1.0 } else { 0.0 };
                let diff = state.projection().at2(i, j) - expected;
                frob += diff * diff;
            }
        }
        assert!(frob.sqrt() < 0.1, "frobenius distance {}", frob.sqrt());
    }

    #[test]
    fn projection_whitens_an_anisotropic_stream() {
        // x = (4g1, 0.5g2) has covariance diag(16, 0.25); after convergence
        // the projected samples should have near-identity covariance.
        let mut state = ZcaState::new(
            2,
            SpheringConfig {
                enabled: true,
                gamma: 0.995,
                eta: 0.99,
                period: 50,
            },
        );
        let mut r = rng::chacha(6, 0);
        let draw = |r: &mut rand_chacha::ChaCha12Rng| vec![4.0 * rng::normal(r), 0.5 * rng::normal(r)];
        for _ in 0..1250 {
            let batch: Vec<Vec<f64>> = (0..16).map(|_| draw(&mut r)).collect();
            state.update(&batch).unwrap();
        }
        let mut cov = [0.0f64; 4];
        let samples = 20_000;
        for _ in 0..samples {
            let y = state.project(&draw(&mut r));
            cov[0] += y[0] * y[0];
            cov[1] += y[0] * y[1];
            cov[2] += y[1] * y[0];
            cov[3] += y[1] * y[1];
        }
        for c in cov.iter_mut() {
            *c /= samples as f64;
        }
        let frob = ((cov[0] - 1.0).powi(2) + cov[1].powi(2) + cov[2].powi(2)
            + (cov[3] - 1.0).powi(2))
        .sqrt();
        assert!(frob < 0.1, "projected covariance {cov:?}, frob {frob}");
    }
}
