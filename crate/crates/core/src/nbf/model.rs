//! The Neural Bloom Filter memory: softmax addressing over an address
//! matrix, additive outer-product writes, multiplicative reads through a
//! residual output MLP.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::diffcore::{kernels, Array, DiffError, NodeId, ParamStore, Tape, LEAKY_SLOPE};
use crate::item::Item;
use crate::rng;

use super::address::{AddressMatrix, AddressMode};
use super::encoder::EncoderSpec;
use crate::nets::{init_mlp, normal_matrix};
use super::zca::{SpheringConfig, ZcaState};

fn default_head_hidden() -> usize {
    128
}

fn default_k_addr() -> usize {
    0
}

fn default_sphering() -> SpheringCfgSerde {
    SpheringCfgSerde::default()
}

/// Serialized form of the sphering knobs (all optional in config files).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpheringCfgSerde {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_gamma")]
    pub eta: f64,
    #[serde(default = "default_period")]
    pub period: u64,
}

fn default_gamma() -> f64 {
    0.99
}

fn default_period() -> u64 {
    100
}

impl Default for SpheringCfgSerde {
    fn default() -> Self {
        SpheringCfgSerde {
            enabled: false,
            gamma: 0.99,
            eta: 0.99,
            period: 100,
        }
    }
}

impl From<SpheringCfgSerde> for SpheringConfig {
    fn from(c: SpheringCfgSerde) -> Self {
        SpheringConfig {
            enabled: c.enabled,
            gamma: c.gamma,
            eta: c.eta,
            period: c.period,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NBFConfig {
    pub m_slots: usize,
    pub d_w: usize,
    pub d_q: usize,
    pub address_mode: AddressMode,
    /// Nonzero entries kept in the sparse address; 0 means dense softmax.
    #[serde(default = "default_k_addr")]
    pub k_addr: usize,
    #[serde(default = "default_sphering")]
    pub sphering: SpheringCfgSerde,
    pub encoder: EncoderSpec,
    #[serde(default = "default_head_hidden")]
    pub head_hidden: usize,
    /// Width of the residual output MLP (defaults to head_hidden).
    #[serde(default)]
    pub out_hidden: Option<usize>,
}

impl NBFConfig {
    pub fn validate(&self) -> Result<(), DiffError> {
        if self.m_slots == 0 || self.d_w == 0 || self.d_q == 0 || self.head_hidden == 0 {
            return Err(DiffError::BadShape(
                "m_slots, d_w, d_q, head_hidden must all be >= 1".to_string(),
            ));
        }
        if self.k_addr > self.m_slots {
            return Err(DiffError::BadShape(format!(
                "k_addr = {} exceeds m_slots = {}",
                self.k_addr, self.m_slots
            )));
        }
        Ok(())
    }

    /// Effective top-k; 0 and m_slots both mean dense addressing.
    fn effective_k(&self) -> Option<usize> {
        if self.k_addr == 0 || self.k_addr == self.m_slots {
            None
        } else {
            Some(self.k_addr)
        }
    }
}

const MEMORY_MAGIC: &[u8; 4] = b"NBM1";

/// The per-set state: sum of outer-product writes.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryState {
    matrix: Array,
    writes: u64,
}

impl MemoryState {
    pub fn zeros(m_slots: usize, d_w: usize) -> Self {
        MemoryState {
            matrix: Array::zeros(vec![m_slots, d_w]),
            writes: 0,
        }
    }

    pub fn matrix(&self) -> &Array {
        &self.matrix
    }

    pub fn matrix_mut(&mut self) -> &mut Array {
        &mut self.matrix
    }

    pub fn writes(&self) -> u64 {
        self.writes
    }

    pub fn value_count(&self) -> usize {
        self.matrix.numel()
    }

    /// Relative Frobenius distance to another memory.
    pub fn relative_distance(&self, other: &MemoryState) -> f64 {
        let num: f64 = self
            .matrix
            .values()
            .iter()
            .zip(other.matrix.values())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let den: f64 = self
            .matrix
            .values()
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
            .max(1e-30);
        num / den
    }

    /// Serialize: magic "NBM1", little-endian dims and write counter, then
    /// the payload as little-endian float32.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 24 + self.matrix.numel() * 4);
        out.extend_from_slice(MEMORY_MAGIC);
        out.extend_from_slice(&(self.matrix.shape()[0] as u64).to_le_bytes());
        out.extend_from_slice(&(self.matrix.shape()[1] as u64).to_le_bytes());
        out.extend_from_slice(&self.writes.to_le_bytes());
        for &v in self.matrix.values() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DiffError> {
        let bad = |m: &str| DiffError::BadCheckpoint(m.to_string());
        if bytes.len() < 28 || &bytes[..4] != MEMORY_MAGIC {
            return Err(bad("missing NBM1 header"));
        }
        let rows = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
        let cols = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let writes = u64::from_le_bytes(bytes[20..28].try_into().unwrap());
        let payload = &bytes[28..];
        if payload.len() != rows * cols * 4 {
            return Err(bad("payload length does not match dims"));
        }
        let values: Vec<f64> = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        Ok(MemoryState {
            matrix: Array::new(vec![rows, cols], values)
                .map_err(|e| bad(&format!("bad payload: {e}")))?,
            writes,
        })
    }
}

/// Controller outputs on the inference path.
#[derive(Debug, Clone)]
pub struct ControllerOutput {
    pub z: Vec<f64>,
    /// Raw query word before sphering.
    pub raw_query: Vec<f64>,
    pub query: Vec<f64>,
    pub address: Vec<f64>,
    pub write_word: Vec<f64>,
}

/// Controller node ids on the tape path.
#[derive(Debug, Clone, Copy)]
pub struct ControllerNodes {
    pub z: NodeId,
    pub raw_query: NodeId,
    pub query: NodeId,
    pub address: NodeId,
    pub write_word: NodeId,
}

/// Per-tape shared nodes (address rows, frozen sphering projection).
#[derive(Debug, Clone, Copy)]
pub struct EpisodeContext {
    address_rows: NodeId,
    projection: Option<NodeId>,
}

/// One stored item's write nodes, for gradient identities.
#[derive(Debug, Clone, Copy)]
pub struct WriteNodes {
    pub address: NodeId,
    pub write_word: NodeId,
}

/// Everything the training loop needs from one episode's graph.
#[derive(Debug)]
pub struct EpisodeGraph {
    pub loss: NodeId,
    pub logits: NodeId,
    pub memory: NodeId,
    pub writes: Vec<WriteNodes>,
    /// Raw (pre-sphering) query words from every controller pass, feeding
    /// the moving ZCA update.
    pub raw_queries: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct NeuralBloomFilter {
    config: NBFConfig,
    address: AddressMatrix,
    zca: ZcaState,
}

impl NeuralBloomFilter {
    pub fn new(config: NBFConfig, seed: u64) -> Result<Self, DiffError> {
        config.validate()?;
        let address = match config.address_mode {
            AddressMode::Trainable => AddressMatrix::trainable(config.m_slots, config.d_q),
            AddressMode::GaussianFixed => {
                AddressMatrix::gaussian_fixed(config.m_slots, config.d_q, seed)
            }
            AddressMode::Seeded => AddressMatrix::seeded(config.m_slots, config.d_q, seed),
        };
        let zca = ZcaState::new(config.d_q, config.sphering.into());
        Ok(NeuralBloomFilter {
            config,
            address,
            zca,
        })
    }

    pub fn config(&self) -> &NBFConfig {
        &self.config
    }

    pub fn address_matrix(&self) -> &AddressMatrix {
        &self.address
    }

    pub fn zca(&self) -> &ZcaState {
        &self.zca
    }

    pub fn zca_mut(&mut self) -> &mut ZcaState {
        &mut self.zca
    }

    pub fn set_training(&mut self, training: bool) {
        self.zca.set_training(training);
    }

    /// Fresh parameters for this configuration.
    pub fn init_params(&self, seed: u64) -> ParamStore {
        let mut store = ParamStore::new();
        let mut r = rng::chacha(seed, 0x1b1f);
        let cfg = &self.config;
        cfg.encoder.init_params(&mut store, "enc", &mut r);
        let d_z = cfg.encoder.output_dim();
        init_head(&mut store, "fq", d_z, cfg.head_hidden, cfg.d_q, &mut r);
        init_head(&mut store, "fw", d_z, cfg.head_hidden, cfg.d_w, &mut r);
        let read_dim = cfg.m_slots * cfg.d_w + cfg.d_w + d_z;
        let out_hidden = cfg.out_hidden.unwrap_or(cfg.head_hidden);
        init_output_mlp(&mut store, "fout", read_dim, out_hidden, &mut r);
        if cfg.address_mode == AddressMode::Trainable {
            store.insert("addr.a", self.address.trainable_init(seed));
        }
        store
    }

    /// Shared per-tape nodes; call once per episode graph.
    pub fn episode_context(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
    ) -> Result<EpisodeContext, DiffError> {
        let address_rows = match self.config.address_mode {
            AddressMode::Trainable => tape.param("addr.a", store)?,
            _ => tape.constant(
                self.address
                    .fixed_rows()
                    .expect("fixed modes materialize rows")
                    .clone(),
            ),
        };
        let projection = if self.zca.enabled() {
            Some(tape.constant(self.zca.projection().clone()))
        } else {
            None
        };
        Ok(EpisodeContext {
            address_rows,
            projection,
        })
    }

    /// Controller on the tape: z, raw/sphered query, address, write word.
    pub fn controller_graph(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        ctx: EpisodeContext,
        item: &Item,
    ) -> Result<ControllerNodes, DiffError> {
        let z = self.config.encoder.build(tape, store, "enc", item)?;
        let raw_query = build_head(tape, store, "fq", z)?;
        let query = match ctx.projection {
            Some(theta) => tape.matmul(theta, raw_query)?,
            None => raw_query,
        };
        let logits = tape.matmul(ctx.address_rows, query)?;
        let address = match self.config.effective_k() {
            Some(k) => tape.topk_softmax(logits, k)?,
            None => tape.softmax(logits)?,
        };
        let write_word = build_head(tape, store, "fw", z)?;
        Ok(ControllerNodes {
            z,
            raw_query,
            query,
            address,
            write_word,
        })
    }

    /// Controller on the inference path; bit-identical to the tape path.
    pub fn controller(&self, store: &ParamStore, item: &Item) -> Result<ControllerOutput, DiffError> {
        let cfg = &self.config;
        let z = cfg.encoder.fast(store, "enc", item)?;
        let raw_query = fast_head(store, "fq", &z)?;
        let query = if self.zca.enabled() {
            self.zca.project(&raw_query)
        } else {
            raw_query.clone()
        };
        if query.len() != self.config.d_q {
            return Err(DiffError::ShapeMismatch {
                op: "controller".to_string(),
                detail: format!("query has length {}, d_q is {}", query.len(), cfg.d_q),
            });
        }
        let rows = self.address_rows_values(store)?;
        let mut logits = vec![0.0; cfg.m_slots];
        kernels::matvec(rows, &query, cfg.m_slots, cfg.d_q, &mut logits);
        let mut address = vec![0.0; cfg.m_slots];
        match cfg.effective_k() {
            Some(k) => kernels::topk_softmax(&logits, k, &mut address),
            None => kernels::softmax(&logits, &mut address),
        }
        let write_word = fast_head(store, "fw", &z)?;
        Ok(ControllerOutput {
            z,
            raw_query,
            query,
            address,
            write_word,
        })
    }

    fn address_rows_values<'a>(&'a self, store: &'a ParamStore) -> Result<&'a [f64], DiffError> {
        match self.config.address_mode {
            AddressMode::Trainable => Ok(store.get("addr.a")?.values()),
            _ => Ok(self
                .address
                .fixed_rows()
                .expect("fixed modes materialize rows")
                .values()),
        }
    }

    /// Additive write M += w a^T for one item.
    pub fn write(
        &self,
        store: &ParamStore,
        memory: &mut MemoryState,
        item: &Item,
    ) -> Result<ControllerOutput, DiffError> {
        let out = self.controller(store, item)?;
        let cfg = &self.config;
        let m = memory.matrix.values_mut();
        for (slot, &a) in out.address.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &w) in out.write_word.iter().enumerate() {
                m[slot * cfg.d_w + j] += a * w;
            }
        }
        memory.writes += 1;
        Ok(out)
    }

    /// One-shot write of a whole storage set.
    pub fn write_set(&self, store: &ParamStore, items: &[Item]) -> Result<MemoryState, DiffError> {
        let mut memory = MemoryState::zeros(self.config.m_slots, self.config.d_w);
        for item in items {
            self.write(store, &mut memory, item)?;
        }
        Ok(memory)
    }

    /// Parallel controller passes with a deterministic left-fold reduction;
    /// order invariance of addition makes the result independent of which
    /// worker finished first.
    pub fn write_set_parallel(
        &self,
        store: &ParamStore,
        items: &[Item],
    ) -> Result<MemoryState, DiffError> {
        use rayon::prelude::*;
        let outputs: Result<Vec<ControllerOutput>, DiffError> = items
            .par_iter()
            .map(|item| self.controller(store, item))
            .collect();
        let mut memory = MemoryState::zeros(self.config.m_slots, self.config.d_w);
        let d_w = self.config.d_w;
        for out in outputs? {
            let m = memory.matrix.values_mut();
            for (slot, &a) in out.address.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (j, &w) in out.write_word.iter().enumerate() {
                    m[slot * d_w + j] += a * w;
                }
            }
            memory.writes += 1;
        }
        Ok(memory)
    }

    /// Familiarity logit for one query against a frozen memory.
    pub fn read(
        &self,
        store: &ParamStore,
        memory: &MemoryState,
        item: &Item,
    ) -> Result<f64, DiffError> {
        let out = self.controller(store, item)?;
        let cfg = &self.config;
        // r = flatten(M ⊙ a), row-major, with a broadcast across the word dim.
        let mut read_dim = Vec::with_capacity(cfg.m_slots * cfg.d_w + cfg.d_w + out.z.len());
        let m = memory.matrix.values();
        for slot in 0..cfg.m_slots {
            let a = out.address[slot];
            for j in 0..cfg.d_w {
                read_dim.push(m[slot * cfg.d_w + j] * a);
            }
        }
        read_dim.extend_from_slice(&out.write_word);
        read_dim.extend_from_slice(&out.z);
        fast_output_mlp(store, "fout", &read_dim)
    }

    /// Tape version of the read path; returns the scalar logit node.
    pub fn read_graph(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        memory_node: NodeId,
        ctrl: ControllerNodes,
    ) -> Result<NodeId, DiffError> {
        let masked = tape.mul(memory_node, ctrl.address)?;
        let r = tape.flatten(masked)?;
        let u0 = tape.concat(&[r, ctrl.write_word, ctrl.z])?;
        build_output_mlp(tape, store, "fout", u0)
    }

    /// Full episode graph: one-shot write of the storage set, then a loss
    /// over all query logits.
    pub fn episode_graph(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        storage: &[Item],
        queries: &[Item],
        labels: &[f64],
    ) -> Result<EpisodeGraph, DiffError> {
        if queries.len() != labels.len() {
            return Err(DiffError::BadShape(format!(
                "{} queries but {} labels",
                queries.len(),
                labels.len()
            )));
        }
        let ctx = self.episode_context(tape, store)?;
        let mut raw_queries = Vec::with_capacity(storage.len() + queries.len());
        let mut memory = tape.constant(Array::zeros(vec![self.config.m_slots, self.config.d_w]));
        let mut writes = Vec::with_capacity(storage.len());
        for item in storage {
            let ctrl = self.controller_graph(tape, store, ctx, item)?;
            raw_queries.push(tape.value(ctrl.raw_query).values().to_vec());
            let update = tape.outer(ctrl.address, ctrl.write_word)?;
            memory = tape.add(memory, update)?;
            writes.push(WriteNodes {
                address: ctrl.address,
                write_word: ctrl.write_word,
            });
        }
        let mut logit_nodes = Vec::with_capacity(queries.len());
        for item in queries {
            let ctrl = self.controller_graph(tape, store, ctx, item)?;
            raw_queries.push(tape.value(ctrl.raw_query).values().to_vec());
            logit_nodes.push(self.read_graph(tape, store, memory, ctrl)?);
        }
        let logits = tape.concat(&logit_nodes)?;
        let label_node = tape.constant(Array::vector(labels.to_vec()));
        let loss = tape.bce_loss(logits, label_node)?;
        Ok(EpisodeGraph {
            loss,
            logits,
            memory,
            writes,
            raw_queries,
        })
    }
}

/// Fraction of slots whose accumulated address mass exceeds 1/(10 m_slots).
pub fn memory_utilization(addresses: &[Vec<f64>]) -> f64 {
    let Some(first) = addresses.first() else {
        return 0.0;
    };
    let m = first.len();
    let mut mass = vec![0.0; m];
    for a in addresses {
        for (acc, v) in mass.iter_mut().zip(a.iter()) {
            *acc += v;
        }
    }
    let threshold = 1.0 / (10.0 * m as f64);
    mass.iter().filter(|&&v| v > threshold).count() as f64 / m as f64
}

/// f_q / f_w head: one hidden layer then layer norm at the output.
fn init_head(
    store: &mut ParamStore,
    prefix: &str,
    input: usize,
    hidden: usize,
    output: usize,
    r: &mut impl RngCore,
) {
    init_mlp(store, prefix, input, hidden, output, r);
    store.insert(format!("{prefix}.ln_g"), Array::vector(vec![1.0; output]));
    store.insert(format!("{prefix}.ln_b"), Array::zeros(vec![output]));
}

fn build_head(
    tape: &mut Tape,
    store: &ParamStore,
    prefix: &str,
    z: NodeId,
) -> Result<NodeId, DiffError> {
    let w1 = tape.param(&format!("{prefix}.w1"), store)?;
    let b1 = tape.param(&format!("{prefix}.b1"), store)?;
    let w2 = tape.param(&format!("{prefix}.w2"), store)?;
    let b2 = tape.param(&format!("{prefix}.b2"), store)?;
    let g = tape.param(&format!("{prefix}.ln_g"), store)?;
    let b = tape.param(&format!("{prefix}.ln_b"), store)?;
    let pre = tape.matmul(w1, z)?;
    let pre = tape.add(pre, b1)?;
    let act = tape.leaky_relu(pre)?;
    let out = tape.matmul(w2, act)?;
    let out = tape.add(out, b2)?;
    tape.layer_norm(out, g, b)
}

fn fast_head(store: &ParamStore, prefix: &str, z: &[f64]) -> Result<Vec<f64>, DiffError> {
    let w1 = store.get(&format!("{prefix}.w1"))?;
    let b1 = store.get(&format!("{prefix}.b1"))?;
    let w2 = store.get(&format!("{prefix}.w2"))?;
    let b2 = store.get(&format!("{prefix}.b2"))?;
    let g = store.get(&format!("{prefix}.ln_g"))?;
    let b = store.get(&format!("{prefix}.ln_b"))?;
    let hidden = b1.numel();
    let mut pre = vec![0.0; hidden];
    kernels::matvec(w1.values(), z, hidden, z.len(), &mut pre);
    for (p, bv) in pre.iter_mut().zip(b1.values()) {
        *p = kernels::leaky_relu(*p + bv, LEAKY_SLOPE);
    }
    let out_dim = b2.numel();
    let mut out = vec![0.0; out_dim];
    kernels::matvec(w2.values(), &pre, out_dim, hidden, &mut out);
    for (o, bv) in out.iter_mut().zip(b2.values()) {
        *o += bv;
    }
    let mut normed = vec![0.0; out_dim];
    kernels::layer_norm(
        &out,
        g.values(),
        b.values(),
        crate::diffcore::LAYER_NORM_EPS,
        &mut normed,
    );
    Ok(normed)
}

/// Output network: 3 hidden layers with residual connections, scalar head.
fn init_output_mlp(
    store: &mut ParamStore,
    prefix: &str,
    input: usize,
    hidden: usize,
    r: &mut impl RngCore,
) {
    store.insert(
        format!("{prefix}.w_in"),
        normal_matrix(hidden, input, 1.0 / (input as f64).sqrt(), r),
    );
    store.insert(format!("{prefix}.b_in"), Array::zeros(vec![hidden]));
    for layer in ["w1", "w2"] {
        store.insert(
            format!("{prefix}.{layer}"),
            normal_matrix(hidden, hidden, 1.0 / (hidden as f64).sqrt(), r),
        );
    }
    store.insert(format!("{prefix}.b1"), Array::zeros(vec![hidden]));
    store.insert(format!("{prefix}.b2"), Array::zeros(vec![hidden]));
    store.insert(
        format!("{prefix}.w_head"),
        normal_matrix(1, hidden, 1.0 / (hidden as f64).sqrt(), r),
    );
    store.insert(format!("{prefix}.b_head"), Array::zeros(vec![1]));
}

fn build_output_mlp(
    tape: &mut Tape,
    store: &ParamStore,
    prefix: &str,
    input: NodeId,
) -> Result<NodeId, DiffError> {
    let w_in = tape.param(&format!("{prefix}.w_in"), store)?;
    let b_in = tape.param(&format!("{prefix}.b_in"), store)?;
    let pre = tape.matmul(w_in, input)?;
    let pre = tape.add(pre, b_in)?;
    let mut h = tape.leaky_relu(pre)?;
    for (w_name, b_name) in [("w1", "b1"), ("w2", "b2")] {
        let w = tape.param(&format!("{prefix}.{w_name}"), store)?;
        let b = tape.param(&format!("{prefix}.{b_name}"), store)?;
        let pre = tape.matmul(w, h)?;
        let pre = tape.add(pre, b)?;
        let act = tape.leaky_relu(pre)?;
        h = tape.add(act, h)?;
    }
    let w_head = tape.param(&format!("{prefix}.w_head"), store)?;
    let b_head = tape.param(&format!("{prefix}.b_head"), store)?;
    let out = tape.matmul(w_head, h)?;
    tape.add(out, b_head)
}

fn fast_output_mlp(store: &ParamStore, prefix: &str, input: &[f64]) -> Result<f64, DiffError> {
    let w_in = store.get(&format!("{prefix}.w_in"))?;
    let b_in = store.get(&format!("{prefix}.b_in"))?;
    let hidden = b_in.numel();
    let mut h = vec![0.0; hidden];
    kernels::matvec(w_in.values(), input, hidden, input.len(), &mut h);
    for (v, b) in h.iter_mut().zip(b_in.values()) {
        *v = kernels::leaky_relu(*v + b, LEAKY_SLOPE);
    }
    for (w_name, b_name) in [("w1", "b1"), ("w2", "b2")] {
        let w = store.get(&format!("{prefix}.{w_name}"))?;
        let b = store.get(&format!("{prefix}.{b_name}"))?;
        let mut pre = vec![0.0; hidden];
        kernels::matvec(w.values(), &h, hidden, hidden, &mut pre);
        for ((p, bv), hv) in pre.iter_mut().zip(b.values()).zip(h.iter()) {
            *p = kernels::leaky_relu(*p + bv, LEAKY_SLOPE) + hv;
        }
        h = pre;
    }
    let w_head = store.get(&format!("{prefix}.w_head"))?;
    let b_head = store.get(&format!("{prefix}.b_head"))?;
    let mut out = vec![0.0; 1];
    kernels::matvec(w_head.values(), &h, 1, hidden, &mut out);
    Ok(out[0] + b_head.values()[0])
}
