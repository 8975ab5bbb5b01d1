//! Memory Network familiarity baseline: one embedded row per stored item,
//! scored by the maximum cosine similarity against the query embedding.

use serde::{Deserialize, Serialize};

use crate::diffcore::{Array, NodeId, ParamStore, Tape};
use crate::item::Item;
use crate::nbf::EncoderSpec;
use crate::rng;

use super::BaselineError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemNetConfig {
    /// Encoder output dimension doubles as the slot word size.
    pub encoder: EncoderSpec,
}

/// One row per stored item; slot count always equals the input count.
#[derive(Debug, Clone, PartialEq)]
pub struct MemNetMemory {
    rows: Vec<Vec<f64>>,
}

impl MemNetMemory {
    pub fn empty() -> Self {
        MemNetMemory { rows: Vec::new() }
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn value_count(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>();
    dot / (na * nb).sqrt()
}

#[derive(Debug, Clone)]
pub struct MemNetFamiliarityModel {
    config: MemNetConfig,
}

impl MemNetFamiliarityModel {
    pub fn new(config: MemNetConfig) -> Self {
        MemNetFamiliarityModel { config }
    }

    pub fn config(&self) -> &MemNetConfig {
        &self.config
    }

    pub fn init_params(&self, seed: u64) -> ParamStore {
        let mut store = ParamStore::new();
        let mut r = rng::chacha(seed, 0x3e37);
        self.config.encoder.init_params(&mut store, "enc", &mut r);
        // Affine map from max similarity to the logit.
        store.insert("sim.alpha", Array::vector(vec![10.0]));
        store.insert("sim.beta", Array::vector(vec![-5.0]));
        store
    }

    /// Store one embedded row per item.
    pub fn write_set(
        &self,
        store: &ParamStore,
        items: &[Item],
    ) -> Result<MemNetMemory, BaselineError> {
        let rows = items
            .iter()
            .map(|item| self.config.encoder.fast(store, "enc", item))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(MemNetMemory { rows })
    }

    pub fn max_similarity(
        &self,
        store: &ParamStore,
        memory: &MemNetMemory,
        item: &Item,
    ) -> Result<f64, BaselineError> {
        if memory.is_empty() {
            return Err(BaselineError::EmptyMemory);
        }
        let q = self.config.encoder.fast(store, "enc", item)?;
        Ok(memory
            .rows
            .iter()
            .map(|row| cosine(&q, row))
            .fold(f64::NEG_INFINITY, f64::max))
    }

    /// logit = alpha * max cosine similarity + beta.
    pub fn query(
        &self,
        store: &ParamStore,
        memory: &MemNetMemory,
        item: &Item,
    ) -> Result<f64, BaselineError> {
        let maxsim = self.max_similarity(store, memory, item)?;
        let alpha = store.get("sim.alpha")?.values()[0];
        let beta = store.get("sim.beta")?.values()[0];
        Ok(alpha * maxsim + beta)
    }

    /// Episode loss graph; rows and similarities live on the tape so the
    /// encoder and the affine score both receive gradients.
    pub fn episode_graph(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        storage: &[Item],
        queries: &[Item],
        labels: &[f64],
    ) -> Result<(NodeId, NodeId), BaselineError> {
        if storage.is_empty() {
            return Err(BaselineError::EmptyMemory);
        }
        let mut row_nodes = Vec::with_capacity(storage.len());
        let mut row_norms = Vec::with_capacity(storage.len());
        for item in storage {
            let row = self.config.encoder.build(tape, store, "enc", item)?;
            let rr = tape.mul(row, row)?;
            let norm2 = tape.reduce_sum(rr)?;
            row_nodes.push(row);
            row_norms.push(norm2);
        }
        let alpha = tape.param("sim.alpha", store)?;
        let beta = tape.param("sim.beta", store)?;
        let mut logit_nodes = Vec::with_capacity(queries.len());
        for item in queries {
            let q = self.config.encoder.build(tape, store, "enc", item)?;
            let qq = tape.mul(q, q)?;
            let qnorm2 = tape.reduce_sum(qq)?;
            let mut sims = Vec::with_capacity(row_nodes.len());
            for (&row, &norm2) in row_nodes.iter().zip(row_norms.iter()) {
                let prod = tape.mul(q, row)?;
                let dot = tape.reduce_sum(prod)?;
                let denom2 = tape.mul(qnorm2, norm2)?;
                let denom = tape.sqrt(denom2)?;
                sims.push(tape.div(dot, denom)?);
            }
            let sims_vec = tape.concat(&sims)?;
            let maxsim = tape.reduce_max(sims_vec)?;
            let scaled = tape.mul(alpha, maxsim)?;
            logit_nodes.push(tape.add(scaled, beta)?);
        }
        let logits = tape.concat(&logit_nodes)?;
        let label_node = tape.constant(Array::vector(labels.to_vec()));
        let loss = tape.bce_loss(logits, label_node)?;
        Ok((loss, logits))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_basics() {
        assert!((cosine(&[1.0, 0.0], &[1.0, 0.0]) - 1.0).abs() < 1e-15);
        assert!(cosine(&[1.0, 0.0], &[0.0, 2.0]).abs() < 1e-15);
        assert!((cosine(&[1.0, 1.0], &[-2.0, -2.0]) + 1.0).abs() < 1e-15);
    }
}
