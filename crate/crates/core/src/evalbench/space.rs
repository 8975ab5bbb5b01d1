//! Space accounting and comparison curves.

use serde::{Deserialize, Serialize};

use crate::diffcore::ParamStore;
use crate::filters::{analytical_fpr, bloom_size_for, optimal_space_bound, CuckooFilter};
use crate::tasks::{sample_episode, DatasetSource, TaskSpec};

use super::{build_composite, measure_fpr_fnr, CalibratedModel, CompositeFilter, EvalError};

/// Bits accounting for one composite at a target overall rate alpha, with
/// classical-filter comparison rows for the same (n, alpha).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceReport {
    pub model_kind: String,
    pub stored_count: usize,
    pub target_alpha: f64,
    pub precision_bits: u32,
    pub state_values: usize,
    pub state_bits: u64,
    pub backup_bits: u64,
    pub total_bits: u64,
    pub n_false_negatives: usize,
    pub measured_fpr: Option<f64>,
    pub measured_fpr_ci: Option<(f64, f64)>,
    pub bloom_bits: u64,
    pub bloom_hashes: u32,
    pub bloom_analytical_fpr: f64,
    pub cuckoo_bits: u64,
    pub optimal_bound_bits: f64,
}

/// TOTAL_SPACE(f, alpha) = SPACE(f, alpha/2) + backup sized at alpha/2;
/// the composite must have been calibrated and built at eps = delta =
/// alpha/2 for the accounting to mean what it says.
pub fn total_space(
    composite: &CompositeFilter<'_>,
    model_kind: &str,
    precision_bits: u32,
    alpha: f64,
    measured_fpr: Option<f64>,
    measured_fpr_ci: Option<(f64, f64)>,
) -> Result<SpaceReport, EvalError> {
    let n = composite.stored_count();
    let (bloom_bits, bloom_hashes) = bloom_size_for(n.max(1), alpha)?;
    let cuckoo = CuckooFilter::for_config(n.max(1), alpha, 0)?;
    Ok(SpaceReport {
        model_kind: model_kind.to_string(),
        stored_count: n,
        target_alpha: alpha,
        precision_bits,
        state_values: composite.memory().value_count(),
        state_bits: composite.state_bits(),
        backup_bits: composite.backup_bits(),
        total_bits: composite.total_bits(),
        n_false_negatives: composite.n_false_negatives(),
        measured_fpr,
        measured_fpr_ci,
        bloom_bits,
        bloom_hashes,
        bloom_analytical_fpr: analytical_fpr(bloom_bits, n.max(1), bloom_hashes),
        cuckoo_bits: cuckoo.table_bits(),
        optimal_bound_bits: optimal_space_bound(n.max(1), alpha)?,
    })
}

/// One row of a space-versus-set-size comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub model: String,
    pub n: usize,
    pub state_bits: f64,
    pub backup_bits: f64,
    pub total_bits: f64,
    pub fpr: f64,
    pub fnr: f64,
}

pub fn curve_to_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from("model,n,state_bits,backup_bits,total_bits,fpr,fnr\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.model, r.n, r.state_bits, r.backup_bits, r.total_bits, r.fpr, r.fnr
        ));
    }
    out
}

/// Composite space and rates for one model across set sizes, with analytical
/// Bloom and Cuckoo rows for the same sizes. Episode-averaged.
pub fn space_curve(
    models: &[(&str, &CalibratedModel)],
    task: &TaskSpec,
    source: &DatasetSource,
    set_sizes: &[usize],
    alpha: f64,
    episodes_per_size: usize,
    seed: u64,
) -> Result<Vec<CurveRow>, EvalError> {
    let delta = alpha / 2.0;
    let mut rows = Vec::new();
    for &n in set_sizes {
        let mut sized_task = task.clone();
        sized_task.set_size = n;
        sized_task.query_count = task.query_count.max(n);
        for (label, calibrated) in models {
            let mut r = crate::rng::chacha(seed, n as u64);
            let mut state_bits = 0.0;
            let mut backup_bits = 0.0;
            let mut total_bits = 0.0;
            let mut episodes = Vec::with_capacity(episodes_per_size);
            for _ in 0..episodes_per_size {
                episodes.push(sample_episode(&mut r, &sized_task, source)?);
            }
            for episode in &episodes {
                let composite = build_composite(calibrated, &episode.storage, delta, seed)?;
                state_bits += composite.state_bits() as f64;
                backup_bits += composite.backup_bits() as f64;
                total_bits += composite.total_bits() as f64;
            }
            let scale = episodes_per_size as f64;
            // Rates measured through the composite across the same episodes.
            let rates = measure_composite_rates(calibrated, &episodes, delta, seed)?;
            rows.push(CurveRow {
                model: label.to_string(),
                n,
                state_bits: state_bits / scale,
                backup_bits: backup_bits / scale,
                total_bits: total_bits / scale,
                fpr: rates.0,
                fnr: rates.1,
            });
        }
        let (bloom_bits, bloom_hashes) = bloom_size_for(n, alpha)?;
        rows.push(CurveRow {
            model: "bloom".to_string(),
            n,
            state_bits: bloom_bits as f64,
            backup_bits: 0.0,
            total_bits: bloom_bits as f64,
            fpr: analytical_fpr(bloom_bits, n, bloom_hashes),
            fnr: 0.0,
        });
        let cuckoo = CuckooFilter::for_config(n, alpha, 0)?;
        rows.push(CurveRow {
            model: "cuckoo".to_string(),
            n,
            state_bits: cuckoo.table_bits() as f64,
            backup_bits: 0.0,
            total_bits: cuckoo.table_bits() as f64,
            fpr: alpha,
            fnr: 0.0,
        });
    }
    Ok(rows)
}

fn measure_composite_rates(
    calibrated: &CalibratedModel,
    episodes: &[crate::tasks::Episode],
    delta: f64,
    seed: u64,
) -> Result<(f64, f64), EvalError> {
    let mut fp = 0usize;
    let mut fneg = 0usize;
    let mut pos = 0usize;
    let mut neg = 0usize;
    for episode in episodes {
        let composite = build_composite(calibrated, &episode.storage, delta, seed)?;
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
    Ok((fp as f64 / neg.max(1) as f64, fneg as f64 / pos.max(1) as f64))
}

/// Per-size rates for a model trained at one size and evaluated beyond it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolationRow {
    pub n: usize,
    pub model_fnr: f64,
    pub model_fpr: f64,
    pub composite_fnr: f64,
    pub composite_fpr: f64,
    pub total_bits: f64,
}

pub fn extrapolation_to_csv(rows: &[ExtrapolationRow]) -> String {
    let mut out = String::from("n,model_fnr,model_fpr,composite_fnr,composite_fpr,total_bits\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.n, r.model_fnr, r.model_fpr, r.composite_fnr, r.composite_fpr, r.total_bits
        ));
    }
    out
}

/// Evaluate the same calibrated model at growing set sizes. Composite FNR
/// stays zero by construction at every size.
pub fn extrapolation_curve(
    calibrated: &CalibratedModel,
    task: &TaskSpec,
    source: &DatasetSource,
    set_sizes: &[usize],
    alpha: f64,
    episodes_per_size: usize,
    seed: u64,
) -> Result<Vec<ExtrapolationRow>, EvalError> {
    let delta = alpha / 2.0;
    let mut rows = Vec::new();
    for &n in set_sizes {
        let mut sized_task = task.clone();
        sized_task.set_size = n;
        let mut r = crate::rng::chacha(seed ^ 0xe817, n as u64);
        let mut episodes = Vec::with_capacity(episodes_per_size);
        for _ in 0..episodes_per_size {
            episodes.push(sample_episode(&mut r, &sized_task, source)?);
        }
        let model_rates = measure_fpr_fnr(calibrated, &episodes, usize::MAX.min(1_000_000))?;
        let (comp_fpr, comp_fnr) = measure_composite_rates(calibrated, &episodes, delta, seed)?;
        let mut total_bits = 0.0;
        for episode in &episodes {
            let composite = build_composite(calibrated, &episode.storage, delta, seed)?;
            total_bits += composite.total_bits() as f64;
        }
        rows.push(ExtrapolationRow {
            n,
            model_fnr: model_rates.fnr,
            model_fpr: model_rates.fpr,
            composite_fnr: comp_fnr,
            composite_fpr: comp_fpr,
            total_bits: total_bits / episodes_per_size as f64,
        });
    }
    Ok(rows)
}

/// Exact trainable-value count and serialized checkpoint size.
pub fn param_count(params: &ParamStore) -> (usize, u64) {
    let mut buf = Vec::new();
    params.save(&mut buf).expect("in-memory write");
    (params.value_count(), buf.len() as u64)
}
