//! Pluggable input encoders producing the embedding z.
//!
//! Dense vectors go through a two-layer MLP. Byte strings go through either
//! a hashed character-trigram bag followed by an MLP (the cheap default) or
//! a character LSTM.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::diffcore::{
    init_lstm_params, kernels, lstm_cell, lstm_cell_fast, Array, DiffError, LstmDims, NodeId,
    ParamStore, Tape,
};
use crate::filters::KeyedHasher;
use crate::item::Item;
use crate::nets::{init_mlp, mlp_fast, mlp_graph, normal_matrix};

const TRIGRAM_SEED: u64 = 0x5452_4947; // "TRIG"

fn default_hidden() -> usize {
    128
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EncoderSpec {
    /// Two-layer MLP over a dense input vector.
    DenseMlp {
        input_dim: usize,
        #[serde(default = "default_hidden")]
        hidden: usize,
        output_dim: usize,
    },
    /// Hashed character-trigram bag followed by an MLP.
    TrigramMlp {
        hash_dim: usize,
        #[serde(default = "default_hidden")]
        hidden: usize,
        output_dim: usize,
    },
    /// Character LSTM over the raw bytes.
    CharLstm {
        embed_dim: usize,
        #[serde(default = "default_hidden")]
        hidden: usize,
        output_dim: usize,
    },
}

impl EncoderSpec {
    pub fn output_dim(&self) -> usize {
        match self {
            EncoderSpec::DenseMlp { output_dim, .. }
            | EncoderSpec::TrigramMlp { output_dim, .. }
            | EncoderSpec::CharLstm { output_dim, .. } => *output_dim,
        }
    }

    fn modality_err(&self, item: &Item) -> DiffError {
        let got = match item {
            Item::Vector(v) => format!("dense vector of length {}", v.len()),
            Item::Bytes(b) => format!("byte string of length {}", b.len()),
        };
        DiffError::ShapeMismatch {
            op: "encoder".to_string(),
            detail: format!("{self:?} cannot encode {got}"),
        }
    }

    /// Raw feature vector for the MLP encoders.
    fn features(&self, item: &Item) -> Result<Vec<f64>, DiffError> {
        match self {
            EncoderSpec::DenseMlp { input_dim, .. } => match item.as_vector() {
                Some(v) if v.len() == *input_dim => Ok(v.to_vec()),
                _ => Err(self.modality_err(item)),
            },
            EncoderSpec::TrigramMlp { hash_dim, .. } => {
                let bytes = item.as_bytes().ok_or_else(|| self.modality_err(item))?;
                Ok(trigram_bag(bytes, *hash_dim))
            }
            EncoderSpec::CharLstm { .. } => Err(self.modality_err(item)),
        }
    }

    pub fn init_params(&self, store: &mut ParamStore, prefix: &str, rng: &mut impl RngCore) {
        match *self {
            EncoderSpec::DenseMlp {
                input_dim,
                hidden,
                output_dim,
            } => init_mlp(store, prefix, input_dim, hidden, output_dim, rng),
            EncoderSpec::TrigramMlp {
                hash_dim,
                hidden,
                output_dim,
            } => init_mlp(store, prefix, hash_dim, hidden, output_dim, rng),
            EncoderSpec::CharLstm {
                embed_dim,
                hidden,
                output_dim,
            } => {
                store.insert(
                    format!("{prefix}.embed"),
                    normal_matrix(embed_dim, 256, 1.0 / (256.0f64).sqrt(), rng),
                );
                init_lstm_params(
                    store,
                    &format!("{prefix}.lstm"),
                    LstmDims {
                        input: embed_dim,
                        hidden,
                    },
                    rng,
                );
                store.insert(
                    format!("{prefix}.w_out"),
                    normal_matrix(output_dim, hidden, 1.0 / (hidden as f64).sqrt(), rng),
                );
                store.insert(format!("{prefix}.b_out"), Array::zeros(vec![output_dim]));
            }
        }
    }

    /// Tape path: returns the z node.
    pub fn build(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        prefix: &str,
        item: &Item,
    ) -> Result<NodeId, DiffError> {
        match self {
            EncoderSpec::DenseMlp { .. } | EncoderSpec::TrigramMlp { .. } => {
                let features = tape.constant(Array::vector(self.features(item)?));
                mlp_graph(tape, store, prefix, features)
            }
            EncoderSpec::CharLstm { hidden, .. } => {
                let bytes = item.as_bytes().ok_or_else(|| self.modality_err(item))?;
                let embed = tape.param(&format!("{prefix}.embed"), store)?;
                let mut h = tape.constant(Array::zeros(vec![*hidden]));
                let mut c = tape.constant(Array::zeros(vec![*hidden]));
                for &byte in bytes {
                    let mut onehot = vec![0.0; 256];
                    onehot[byte as usize] = 1.0;
                    let x = tape.constant(Array::vector(onehot));
                    let e = tape.matmul(embed, x)?;
                    let (hn, cn) = lstm_cell(tape, store, &format!("{prefix}.lstm"), e, h, c)?;
                    h = hn;
                    c = cn;
                }
                let w = tape.param(&format!("{prefix}.w_out"), store)?;
                let b = tape.param(&format!("{prefix}.b_out"), store)?;
                let wh = tape.matmul(w, h)?;
                tape.add(wh, b)
            }
        }
    }

    /// Inference path; bit-identical to `build` because both use the same
    /// kernels in the same order.
    pub fn fast(
        &self,
        store: &ParamStore,
        prefix: &str,
        item: &Item,
    ) -> Result<Vec<f64>, DiffError> {
        match self {
            EncoderSpec::DenseMlp { .. } | EncoderSpec::TrigramMlp { .. } => {
                mlp_fast(store, prefix, &self.features(item)?)
            }
            EncoderSpec::CharLstm { embed_dim, hidden, .. } => {
                let bytes = item.as_bytes().ok_or_else(|| self.modality_err(item))?;
                let embed = store.get(&format!("{prefix}.embed"))?;
                let mut h = vec![0.0; *hidden];
                let mut c = vec![0.0; *hidden];
                for &byte in bytes {
                    let mut onehot = vec![0.0; 256];
                    onehot[byte as usize] = 1.0;
                    let mut e = vec![0.0; *embed_dim];
                    kernels::matvec(embed.values(), &onehot, *embed_dim, 256, &mut e);
                    let (hn, cn) = lstm_cell_fast(store, &format!("{prefix}.lstm"), &e, &h, &c)?;
                    h = hn;
                    c = cn;
                }
                let w = store.get(&format!("{prefix}.w_out"))?;
                let b = store.get(&format!("{prefix}.b_out"))?;
                let mut z = vec![0.0; b.numel()];
                kernels::matvec(w.values(), &h, b.numel(), *hidden, &mut z);
                for (zv, bv) in z.iter_mut().zip(b.values()) {
                    *zv += bv;
                }
                Ok(z)
            }
        }
    }
}

/// Normalized hashed trigram counts over the padded byte string.
fn trigram_bag(bytes: &[u8], hash_dim: usize) -> Vec<f64> {
    let hasher = KeyedHasher::new(TRIGRAM_SEED);
    let mut padded = Vec::with_capacity(bytes.len() + 2);
    padded.push(0x01);
    padded.extend_from_slice(bytes);
    padded.push(0x02);
    let mut bag = vec![0.0; hash_dim];
    let windows = padded.windows(3);
    let count = padded.len() - 2;
    for w in windows {
        let idx = (hasher.hash1(w) % hash_dim as u64) as usize;
        bag[idx] += 1.0;
    }
    for v in bag.iter_mut() {
        *v /= count as f64;
    }
    bag
}
