//! Wall-clock latency and throughput for inserts and queries.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::filters::{BloomFilter, CuckooFilter};
use crate::item::Item;
use crate::metatrain::{AnyModel, ModelMemory};

use super::{CalibratedModel, EvalError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub artifact: String,
    pub op: String,
    pub batch: usize,
    pub latency_ms: f64,
    pub throughput_per_s: f64,
}

pub fn timing_to_csv(rows: &[TimingRow]) -> String {
    let mut out = String::from("artifact,op,batch,latency_ms,throughput_per_s\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.artifact, r.op, r.batch, r.latency_ms, r.throughput_per_s
        ));
    }
    out
}

/// A timeable artifact. Classical filters are constructed per run outside
/// the timed region; neural artifacts run against frozen parameters.
pub enum BenchArtifact<'a> {
    Bloom { epsilon: f64, seed: u64 },
    Cuckoo { epsilon: f64, seed: u64 },
    Neural(&'a CalibratedModel),
}

enum Prepared<'a> {
    Bloom(BloomFilter),
    Cuckoo(CuckooFilter),
    Neural(&'a CalibratedModel, ModelMemory),
}

impl<'a> BenchArtifact<'a> {
    fn fresh(&self, capacity: usize) -> Result<Prepared<'a>, EvalError> {
        Ok(match self {
            BenchArtifact::Bloom { epsilon, seed } => {
                Prepared::Bloom(BloomFilter::for_config(capacity.max(1), *epsilon, *seed)?)
            }
            BenchArtifact::Cuckoo { epsilon, seed } => {
                Prepared::Cuckoo(CuckooFilter::for_config(capacity.max(1), *epsilon, *seed)?)
            }
            BenchArtifact::Neural(calibrated) => {
                Prepared::Neural(calibrated, empty_memory(&calibrated.model))
            }
        })
    }

    fn prepare_with(&self, items: &[Item]) -> Result<Prepared<'a>, EvalError> {
        let mut prepared = self.fresh(items.len())?;
        prepared.insert_all(items, 1)?;
        Ok(prepared)
    }
}

fn empty_memory(model: &AnyModel) -> ModelMemory {
    match model {
        AnyModel::Nbf(m) => ModelMemory::Nbf(crate::nbf::MemoryState::zeros(
            m.config().m_slots,
            m.config().d_w,
        )),
        AnyModel::Lstm(m) => ModelMemory::Lstm(crate::baselines::LstmState {
            hidden: vec![0.0; m.config().hidden],
            cell: vec![0.0; m.config().hidden],
        }),
        AnyModel::MemNet(_) => ModelMemory::MemNet(crate::baselines::MemNetMemory::empty()),
    }
}

impl Prepared<'_> {
    fn insert_all(&mut self, items: &[Item], workers: usize) -> Result<(), EvalError> {
        match self {
            Prepared::Bloom(filter) => {
                for item in items {
                    filter.insert(&item.key_bytes());
                }
            }
            Prepared::Cuckoo(filter) => {
                for item in items {
                    filter.insert(&item.key_bytes());
                }
            }
            Prepared::Neural(calibrated, memory) => {
                let fresh = match &calibrated.model {
                    AnyModel::Nbf(m) => {
                        if workers > 1 {
                            ModelMemory::Nbf(m.write_set_parallel(&calibrated.params, items)?)
                        } else {
                            ModelMemory::Nbf(m.write_set(&calibrated.params, items)?)
                        }
                    }
                    _ => calibrated.model.store_set(&calibrated.params, items, true)?,
                };
                *memory = fresh;
            }
        }
        Ok(())
    }

    fn query_all(&self, queries: &[Item], workers: usize) -> Result<usize, EvalError> {
        match self {
            Prepared::Bloom(filter) => {
                Ok(queries.iter().filter(|q| filter.query(&q.key_bytes())).count())
            }
            Prepared::Cuckoo(filter) => {
                Ok(queries.iter().filter(|q| filter.query(&q.key_bytes())).count())
            }
            Prepared::Neural(calibrated, memory) => {
                if workers > 1 {
                    let hits = queries
                        .par_iter()
                        .map(|q| calibrated.decide(memory, q).map(usize::from))
                        .collect::<Result<Vec<_>, _>>()?;
                    Ok(hits.into_iter().sum())
                } else {
                    let mut hits = 0;
                    for q in queries {
                        if calibrated.decide(memory, q)? {
                            hits += 1;
                        }
                    }
                    Ok(hits)
                }
            }
        }
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs[xs.len() / 2]
}

fn cycle_items(pool: &[Item], count: usize) -> Vec<Item> {
    (0..count).map(|i| pool[i % pool.len()].clone()).collect()
}

/// Latency and throughput table over {insert, query} x batch sizes.
/// Single-op latency is measured by timing a block of repetitions and
/// dividing, since one classical-filter op sits below timer resolution.
/// Median of `repeats` runs after one warm-up.
pub fn timing_bench(
    artifacts: &[(String, BenchArtifact<'_>)],
    item_pool: &[Item],
    query_pool: &[Item],
    batch_sizes: &[usize],
    repeats: usize,
    workers: usize,
) -> Result<Vec<TimingRow>, EvalError> {
    assert!(!item_pool.is_empty() && !query_pool.is_empty());
    let repeats = repeats.max(5);
    let mut rows = Vec::new();
    for (name, artifact) in artifacts {
        for &batch in batch_sizes {
            // enough repetitions that the timed block is well above timer
            // resolution
            let inner = (512 / batch.max(1)).max(1);
            let insert_items = cycle_items(item_pool, batch * inner);

            let mut insert_times = Vec::with_capacity(repeats);
            for run in 0..=repeats {
                let mut prepared = artifact.fresh(insert_items.len())?;
                let start = Instant::now();
                prepared.insert_all(&insert_items, workers)?;
                let elapsed = start.elapsed().as_secs_f64();
                if run > 0 {
                    insert_times.push(elapsed);
                }
            }
            let t = median(insert_times);
            rows.push(TimingRow {
                artifact: name.clone(),
                op: "insert".to_string(),
                batch,
                latency_ms: t / inner as f64 * 1e3,
                throughput_per_s: (batch * inner) as f64 / t,
            });

            let stored = cycle_items(item_pool, batch.max(64).min(item_pool.len()));
            let prepared = artifact.prepare_with(&stored)?;
            let queries = cycle_items(query_pool, batch * inner);
            let mut query_times = Vec::with_capacity(repeats);
            let mut sink = 0usize;
            for run in 0..=repeats {
                let start = Instant::now();
                sink = sink.wrapping_add(prepared.query_all(&queries, workers)?);
                let elapsed = start.elapsed().as_secs_f64();
                if run > 0 {
                    query_times.push(elapsed);
                }
            }
            std::hint::black_box(sink);
            let t = median(query_times);
            rows.push(TimingRow {
                artifact: name.clone(),
                op: "query".to_string(),
                batch,
                latency_ms: t / inner as f64 * 1e3,
                throughput_per_s: (batch * inner) as f64 / t,
            });
        }
    }
    Ok(rows)
}
