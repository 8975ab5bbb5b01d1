//! LSTM familiarity baseline: unroll over the storage set, answer queries
//! from an MLP over the concatenated final state and query embedding.

use serde::{Deserialize, Serialize};

use crate::diffcore::{
    init_lstm_params, lstm_cell, lstm_cell_fast, Array, LstmDims, NodeId, ParamStore, Tape,
};
use crate::item::Item;
use crate::nbf::EncoderSpec;
use crate::nets::{init_mlp, mlp_fast, mlp_graph};
use crate::rng;

use super::BaselineError;

fn default_hidden() -> usize {
    128
}

fn default_head_hidden() -> usize {
    128
}

fn default_max_unroll() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LstmConfig {
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    pub encoder: EncoderSpec,
    #[serde(default = "default_head_hidden")]
    pub head_hidden: usize,
    /// Sequential writes beyond this refuse to run without an override.
    #[serde(default = "default_max_unroll")]
    pub max_unroll: usize,
}

/// Final recurrent state; the model's entire per-set memory.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub hidden: Vec<f64>,
    pub cell: Vec<f64>,
}

impl LstmState {
    /// 2h values: hidden plus cell.
    pub fn value_count(&self) -> usize {
        self.hidden.len() + self.cell.len()
    }

    pub fn values(&self) -> Vec<f64> {
        let mut out = self.hidden.clone();
        out.extend_from_slice(&self.cell);
        out
    }
}

#[derive(Debug, Clone)]
pub struct LstmFamiliarityModel {
    config: LstmConfig,
}

impl LstmFamiliarityModel {
    pub fn new(config: LstmConfig) -> Self {
        LstmFamiliarityModel { config }
    }

    pub fn config(&self) -> &LstmConfig {
        &self.config
    }

    pub fn init_params(&self, seed: u64) -> ParamStore {
        let mut store = ParamStore::new();
        let mut r = rng::chacha(seed, 0x157a);
        self.config.encoder.init_params(&mut store, "enc", &mut r);
        let d_z = self.config.encoder.output_dim();
        init_lstm_params(
            &mut store,
            "cell",
            LstmDims {
                input: d_z,
                hidden: self.config.hidden,
            },
            &mut r,
        );
        init_mlp(
            &mut store,
            "head",
            2 * self.config.hidden + d_z,
            self.config.head_hidden,
            1,
            &mut r,
        );
        store
    }

    fn check_unroll(&self, len: usize, allow_long: bool) -> Result<(), BaselineError> {
        if len == 0 {
            return Err(BaselineError::EmptySequence);
        }
        if len > self.config.max_unroll && !allow_long {
            return Err(BaselineError::UnrollTooLong {
                len,
                max: self.config.max_unroll,
            });
        }
        Ok(())
    }

    /// Unroll over the storage set; the final state is the memory.
    pub fn write_set(
        &self,
        store: &ParamStore,
        items: &[Item],
        allow_long: bool,
    ) -> Result<LstmState, BaselineError> {
        self.check_unroll(items.len(), allow_long)?;
        let mut h = vec![0.0; self.config.hidden];
        let mut c = vec![0.0; self.config.hidden];
        for item in items {
            let z = self.config.encoder.fast(store, "enc", item)?;
            let (hn, cn) = lstm_cell_fast(store, "cell", &z, &h, &c)?;
            h = hn;
            c = cn;
        }
        Ok(LstmState { hidden: h, cell: c })
    }

    /// Scalar familiarity logit from [state, encoded query].
    pub fn query(
        &self,
        store: &ParamStore,
        state: &LstmState,
        item: &Item,
    ) -> Result<f64, BaselineError> {
        let z = self.config.encoder.fast(store, "enc", item)?;
        let mut input = state.values();
        input.extend_from_slice(&z);
        Ok(mlp_fast(store, "head", &input)?[0])
    }

    /// Tape version of the unroll; returns (h, c) node ids.
    pub fn write_graph(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        items: &[Item],
        allow_long: bool,
    ) -> Result<(NodeId, NodeId), BaselineError> {
        self.check_unroll(items.len(), allow_long)?;
        let mut h = tape.constant(Array::zeros(vec![self.config.hidden]));
        let mut c = tape.constant(Array::zeros(vec![self.config.hidden]));
        for item in items {
            let z = self.config.encoder.build(tape, store, "enc", item)?;
            let (hn, cn) = lstm_cell(tape, store, "cell", z, h, c)?;
            h = hn;
            c = cn;
        }
        Ok((h, c))
    }

    pub fn query_graph(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        state: (NodeId, NodeId),
        item: &Item,
    ) -> Result<NodeId, BaselineError> {
        let z = self.config.encoder.build(tape, store, "enc", item)?;
        let input = tape.concat(&[state.0, state.1, z])?;
        Ok(mlp_graph(tape, store, "head", input)?)
    }

    /// Episode loss graph over a written set and labelled queries.
    pub fn episode_graph(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        storage: &[Item],
        queries: &[Item],
        labels: &[f64],
        allow_long: bool,
    ) -> Result<(NodeId, NodeId), BaselineError> {
        let state = self.write_graph(tape, store, storage, allow_long)?;
        let mut logit_nodes = Vec::with_capacity(queries.len());
        for item in queries {
            logit_nodes.push(self.query_graph(tape, store, state, item)?);
        }
        let logits = tape.concat(&logit_nodes)?;
        let label_node = tape.constant(Array::vector(labels.to_vec()));
        let loss = tape.bce_loss(logits, label_node)?;
        Ok((loss, logits))
    }
}
