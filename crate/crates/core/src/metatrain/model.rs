//! Unified dispatch over the three one-shot model families.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::baselines::{
    LstmConfig, LstmFamiliarityModel, LstmState, MemNetConfig, MemNetFamiliarityModel,
    MemNetMemory,
};
use crate::diffcore::{Array, ParamStore, Tape};
use crate::item::Item;
use crate::nbf::{MemoryState, NBFConfig, NeuralBloomFilter};
use crate::tasks::Episode;

use super::TrainError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Nbf(NBFConfig),
    Lstm(LstmConfig),
    Memnet(MemNetConfig),
}

impl ModelConfig {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ModelConfig::Nbf(_) => "nbf",
            ModelConfig::Lstm(_) => "lstm",
            ModelConfig::Memnet(_) => "memnet",
        }
    }
}

/// A built model of any family.
#[derive(Debug, Clone)]
pub enum AnyModel {
    Nbf(NeuralBloomFilter),
    Lstm(LstmFamiliarityModel),
    MemNet(MemNetFamiliarityModel),
}

/// Per-set state of any family.
#[derive(Debug, Clone)]
pub enum ModelMemory {
    Nbf(MemoryState),
    Lstm(LstmState),
    MemNet(MemNetMemory),
}

impl ModelMemory {
    /// Number of real values in the state, for space accounting.
    pub fn value_count(&self) -> usize {
        match self {
            ModelMemory::Nbf(m) => m.value_count(),
            ModelMemory::Lstm(s) => s.value_count(),
            ModelMemory::MemNet(m) => m.value_count(),
        }
    }
}

/// What one backward pass over an episode produced.
pub struct EpisodeEval {
    pub loss: f64,
    pub logits: Vec<f64>,
    pub grads: BTreeMap<String, Array>,
    /// Raw pre-sphering query words (empty for non-NBF models).
    pub raw_queries: Vec<Vec<f64>>,
}

impl AnyModel {
    pub fn from_config(config: &ModelConfig, seed: u64) -> Result<Self, TrainError> {
        Ok(match config {
            ModelConfig::Nbf(c) => AnyModel::Nbf(NeuralBloomFilter::new(c.clone(), seed)?),
            ModelConfig::Lstm(c) => AnyModel::Lstm(LstmFamiliarityModel::new(c.clone())),
            ModelConfig::Memnet(c) => AnyModel::MemNet(MemNetFamiliarityModel::new(c.clone())),
        })
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            AnyModel::Nbf(_) => "nbf",
            AnyModel::Lstm(_) => "lstm",
            AnyModel::MemNet(_) => "memnet",
        }
    }

    pub fn init_params(&self, seed: u64) -> ParamStore {
        match self {
            AnyModel::Nbf(m) => m.init_params(seed),
            AnyModel::Lstm(m) => m.init_params(seed),
            AnyModel::MemNet(m) => m.init_params(seed),
        }
    }

    pub fn set_training(&mut self, training: bool) {
        if let AnyModel::Nbf(m) = self {
            m.set_training(training);
        }
    }

    /// One-shot write of a storage set on the inference path.
    pub fn store_set(
        &self,
        params: &ParamStore,
        items: &[Item],
        allow_long_unroll: bool,
    ) -> Result<ModelMemory, TrainError> {
        Ok(match self {
            AnyModel::Nbf(m) => ModelMemory::Nbf(m.write_set(params, items)?),
            AnyModel::Lstm(m) => {
                ModelMemory::Lstm(m.write_set(params, items, allow_long_unroll)?)
            }
            AnyModel::MemNet(m) => ModelMemory::MemNet(m.write_set(params, items)?),
        })
    }

    /// Familiarity logit for one query.
    pub fn query_logit(
        &self,
        params: &ParamStore,
        memory: &ModelMemory,
        item: &Item,
    ) -> Result<f64, TrainError> {
        Ok(match (self, memory) {
            (AnyModel::Nbf(m), ModelMemory::Nbf(mem)) => m.read(params, mem, item)?,
            (AnyModel::Lstm(m), ModelMemory::Lstm(state)) => m.query(params, state, item)?,
            (AnyModel::MemNet(m), ModelMemory::MemNet(mem)) => m.query(params, mem, item)?,
            _ => {
                return Err(TrainError::Config(
                    "memory does not belong to this model".to_string(),
                ))
            }
        })
    }

    /// Forward-only episode loss and per-query logits.
    pub fn episode_loss(
        &self,
        params: &ParamStore,
        episode: &Episode,
        allow_long_unroll: bool,
    ) -> Result<(f64, Vec<f64>), TrainError> {
        let mut tape = Tape::new();
        let (loss, logits, _) = self.episode_nodes(&mut tape, params, episode, allow_long_unroll)?;
        Ok((
            tape.value(loss).item()?,
            tape.value(logits).values().to_vec(),
        ))
    }

    fn episode_nodes(
        &self,
        tape: &mut Tape,
        params: &ParamStore,
        episode: &Episode,
        allow_long_unroll: bool,
    ) -> Result<(usize, usize, Vec<Vec<f64>>), TrainError> {
        let labels = episode.label_floats();
        Ok(match self {
            AnyModel::Nbf(m) => {
                let graph =
                    m.episode_graph(tape, params, &episode.storage, &episode.queries, &labels)?;
                (graph.loss, graph.logits, graph.raw_queries)
            }
            AnyModel::Lstm(m) => {
                let (loss, logits) = m.episode_graph(
                    tape,
                    params,
                    &episode.storage,
                    &episode.queries,
                    &labels,
                    allow_long_unroll,
                )?;
                (loss, logits, Vec::new())
            }
            AnyModel::MemNet(m) => {
                let (loss, logits) =
                    m.episode_graph(tape, params, &episode.storage, &episode.queries, &labels)?;
                (loss, logits, Vec::new())
            }
        })
    }

    /// Loss, logits, and parameter gradients for one episode.
    pub fn episode_backward(
        &self,
        params: &ParamStore,
        episode: &Episode,
        allow_long_unroll: bool,
    ) -> Result<EpisodeEval, TrainError> {
        let mut tape = Tape::new();
        let (loss_node, logits_node, raw_queries) =
            self.episode_nodes(&mut tape, params, episode, allow_long_unroll)?;
        let loss = tape.value(loss_node).item()?;
        if !loss.is_finite() {
            return Err(TrainError::NonFiniteLoss);
        }
        let logits = tape.value(logits_node).values().to_vec();
        let grads = tape.backward(loss_node)?.into_params();
        Ok(EpisodeEval {
            loss,
            logits,
            grads,
            raw_queries,
        })
    }

    /// Feed raw query words into the moving ZCA (NBF only; no-op otherwise).
    pub fn sphering_update(&mut self, raw_queries: &[Vec<f64>]) -> Result<(), TrainError> {
        if let AnyModel::Nbf(m) = self {
            if !raw_queries.is_empty() {
                m.zca_mut().update(raw_queries)?;
            }
        }
        Ok(())
    }

    /// Count of trainable values.
    pub fn param_count(&self, params: &ParamStore) -> usize {
        let _ = self;
        params.value_count()
    }
}
