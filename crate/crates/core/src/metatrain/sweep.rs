//! Hyper-parameter sweep: train every grid cell, score by total space at
//! the target rate, return the argmin.

use serde::{Deserialize, Serialize};

use crate::evalbench::{
    build_composite, calibrate_threshold, CalibratedModel, EvalError,
};
use crate::nbf::EncoderSpec;

use super::{ModelConfig, TrainConfig};

/// Axes over model size and optimization. Empty axes keep the base config's
/// value; only axes relevant to the model kind expand.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    #[serde(default)]
    pub memory_sizes: Vec<usize>,
    #[serde(default)]
    pub word_sizes: Vec<usize>,
    #[serde(default)]
    pub hidden_sizes: Vec<usize>,
    #[serde(default)]
    pub sphering_decays: Vec<f64>,
    #[serde(default)]
    pub learning_rates: Vec<f64>,
}

fn axis<T: Clone>(values: &[T], base: T) -> Vec<T> {
    if values.is_empty() {
        vec![base]
    } else {
        values.to_vec()
    }
}

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub label: String,
    pub config: TrainConfig,
}

/// Grid cells for the base config's model kind.
pub fn expand_grid(base: &TrainConfig, grid: &SweepGrid) -> Vec<SweepCell> {
    let mut cells = Vec::new();
    match &base.model {
        ModelConfig::Nbf(nbf) => {
            for &m in &axis(&grid.memory_sizes, nbf.m_slots) {
                for &w in &axis(&grid.word_sizes, nbf.d_w) {
                    for &eta in &axis(&grid.sphering_decays, nbf.sphering.eta) {
                        for &lr in &axis(&grid.learning_rates, base.learning_rate) {
                            let mut config = base.clone();
                            let ModelConfig::Nbf(c) = &mut config.model else {
                                unreachable!()
                            };
                            c.m_slots = m;
                            c.d_w = w;
                            c.k_addr = c.k_addr.min(m);
                            c.sphering.eta = eta;
                            config.learning_rate = lr;
                            cells.push(SweepCell {
                                label: format!("nbf_m{m}_w{w}_eta{eta}_lr{lr}"),
                                config,
                            });
                        }
                    }
                }
            }
        }
        ModelConfig::Lstm(lstm) => {
            for &h in &axis(&grid.hidden_sizes, lstm.hidden) {
                for &lr in &axis(&grid.learning_rates, base.learning_rate) {
                    let mut config = base.clone();
                    let ModelConfig::Lstm(c) = &mut config.model else {
                        unreachable!()
                    };
                    c.hidden = h;
                    config.learning_rate = lr;
                    cells.push(SweepCell {
                        label: format!("lstm_h{h}_lr{lr}"),
                        config,
                    });
                }
            }
        }
        ModelConfig::Memnet(memnet) => {
            let base_word = memnet.encoder.output_dim();
            for &w in &axis(&grid.word_sizes, base_word) {
                for &lr in &axis(&grid.learning_rates, base.learning_rate) {
                    let mut config = base.clone();
                    let ModelConfig::Memnet(c) = &mut config.model else {
                        unreachable!()
                    };
                    set_output_dim(&mut c.encoder, w);
                    config.learning_rate = lr;
                    cells.push(SweepCell {
                        label: format!("memnet_w{w}_lr{lr}"),
                        config,
                    });
                }
            }
        }
    }
    cells
}

fn set_output_dim(spec: &mut EncoderSpec, dim: usize) {
    match spec {
        EncoderSpec::DenseMlp { output_dim, .. }
        | EncoderSpec::TrigramMlp { output_dim, .. }
        | EncoderSpec::CharLstm { output_dim, .. } => *output_dim = dim,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub label: String,
    pub total_bits: f64,
    pub fpr: f64,
    pub fnr: f64,
    pub param_count: usize,
}

pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("label,total_bits,fpr,fnr,param_count\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.label, r.total_bits, r.fpr, r.fnr, r.param_count
        ));
    }
    out
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub best: SweepCell,
    pub rows: Vec<SweepRow>,
}

/// Train each cell, calibrate at alpha/2, and score by mean composite total
/// space over held-out episodes. Ties break toward fewer parameters.
pub fn sweep(
    base: &TrainConfig,
    grid: &SweepGrid,
    alpha: f64,
    precision_bits: u32,
    eval_episodes: usize,
) -> Result<SweepResult, EvalError> {
    let cells = expand_grid(base, grid);
    assert!(!cells.is_empty(), "sweep grid expanded to zero cells");
    let mut rows = Vec::with_capacity(cells.len());
    let mut best: Option<(usize, f64, usize)> = None;

    for (index, cell) in cells.iter().enumerate() {
        let mut trainer = super::Trainer::new(cell.config.clone())?;
        trainer.train_to_completion()?;

        // Sample validation episodes until the calibration floor is met.
        let mut validation = Vec::new();
        let mut negatives = 0usize;
        let mut chunk = 0u64;
        while negatives < crate::evalbench::MIN_VALIDATION_NEGATIVES {
            let eps = trainer.sample_eval_episodes(8, 0x5eed + chunk)?;
            for e in &eps {
                negatives += e.labels.iter().filter(|&&l| !l).count();
            }
            validation.extend(eps);
            chunk += 1;
        }
        let param_count = trainer.params().value_count();
        let outcome_model = trainer.model().clone();
        let outcome_params = trainer.params().clone();
        let tau = calibrate_threshold(
            &outcome_model,
            &outcome_params,
            &validation,
            alpha / 2.0,
            cell.config.allow_long_unroll,
        )?;
        let calibrated = CalibratedModel::new(outcome_model, outcome_params, tau, precision_bits)?;

        let episodes = trainer.sample_eval_episodes(eval_episodes, 0x5c07e)?;
        let mut total_bits = 0.0;
        let mut fp = 0usize;
        let mut neg = 0usize;
        let mut fneg = 0usize;
        let mut pos = 0usize;
        for episode in &episodes {
            let composite =
                build_composite(&calibrated, &episode.storage, alpha / 2.0, cell.config.seed)?;
            total_bits += composite.total_bits() as f64;
            for (query, &label) in episode.queries.iter().zip(&episode.labels) {
                let decision = composite.query(query)?;
                if label {
                    pos += 1;
                    if !decision {
                        fneg += 1;
                    }
                } else {
                    neg += 1;
                    if decision {
                        fp += 1;
                    }
                }
            }
        }
        let mean_bits = total_bits / episodes.len() as f64;
        rows.push(SweepRow {
            label: cell.label.clone(),
            total_bits: mean_bits,
            fpr: fp as f64 / neg.max(1) as f64,
            fnr: fneg as f64 / pos.max(1) as f64,
            param_count,
        });
        let better = match best {
            None => true,
            Some((_, best_bits, best_params)) => {
                mean_bits < best_bits
                    || (mean_bits == best_bits && param_count < best_params)
            }
        };
        if better {
            best = Some((index, mean_bits, param_count));
        }
    }

    let (best_index, _, _) = best.expect("at least one cell");
    Ok(SweepResult {
        best: cells[best_index].clone(),
        rows,
    })
}
