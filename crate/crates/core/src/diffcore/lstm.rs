//! Standard LSTM cell with forget/input/output gates and tanh candidate,
//! built from tape primitives so gradients come from the shared backward.

use rand::RngCore;

use super::{kernels, Array, DiffError, NodeId, ParamStore, Tape};
use crate::rng;

#[derive(Debug, Clone, Copy)]
pub struct LstmDims {
    pub input: usize,
    pub hidden: usize,
}

const GATES: [&str; 4] = ["i", "f", "g", "o"];

/// Number of trainable values in one cell: 4 gates, each [hidden, input+hidden]
/// weights plus [hidden] bias.
pub fn lstm_param_count(dims: LstmDims) -> usize {
    4 * (dims.hidden * (dims.input + dims.hidden) + dims.hidden)
}

/// Insert freshly initialized cell parameters under `prefix`.
/// Weights are zero-mean normals scaled by 1/sqrt(fan_in); the forget-gate
/// bias starts at 1 so early training does not erase cell state.
pub fn init_lstm_params(
    store: &mut ParamStore,
    prefix: &str,
    dims: LstmDims,
    rng: &mut impl RngCore,
) {
    let fan_in = dims.input + dims.hidden;
    let scale = 1.0 / (fan_in as f64).sqrt();
    for gate in GATES {
        let w: Vec<f64> = (0..dims.hidden * fan_in)
            .map(|_| rng::normal(rng) * scale)
            .collect();
        store.insert(
            format!("{prefix}.w_{gate}"),
            Array::new(vec![dims.hidden, fan_in], w).expect("valid shape"),
        );
        let bias = if gate == "f" { 1.0 } else { 0.0 };
        store.insert(
            format!("{prefix}.b_{gate}"),
            Array::vector(vec![bias; dims.hidden]),
        );
    }
}

/// One recurrent step on the tape: (h', c') from (x, h, c).
pub fn lstm_cell(
    tape: &mut Tape,
    store: &ParamStore,
    prefix: &str,
    x: NodeId,
    h: NodeId,
    c: NodeId,
) -> Result<(NodeId, NodeId), DiffError> {
    let xh = tape.concat(&[x, h])?;
    let mut pre = [0usize; 4];
    for (slot, gate) in pre.iter_mut().zip(GATES) {
        let w = tape.param(&format!("{prefix}.w_{gate}"), store)?;
        let b = tape.param(&format!("{prefix}.b_{gate}"), store)?;
        let wx = tape.matmul(w, xh)?;
        *slot = tape.add(wx, b)?;
    }
    let i = tape.sigmoid(pre[0])?;
    let f = tape.sigmoid(pre[1])?;
    let g = tape.tanh(pre[2])?;
    let o = tape.sigmoid(pre[3])?;
    let fc = tape.mul(f, c)?;
    let ig = tape.mul(i, g)?;
    let c_new = tape.add(fc, ig)?;
    let c_tanh = tape.tanh(c_new)?;
    let h_new = tape.mul(o, c_tanh)?;
    Ok((h_new, c_new))
}

/// Tape-free step with the same kernels and evaluation order as `lstm_cell`,
/// so both paths produce bit-identical states.
pub fn lstm_cell_fast(
    store: &ParamStore,
    prefix: &str,
    x: &[f64],
    h: &[f64],
    c: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), DiffError> {
    let hidden = h.len();
    let mut xh = Vec::with_capacity(x.len() + hidden);
    xh.extend_from_slice(x);
    xh.extend_from_slice(h);

    let mut acts = Vec::with_capacity(4);
    for gate in GATES {
        let w = store.get(&format!("{prefix}.w_{gate}"))?;
        let b = store.get(&format!("{prefix}.b_{gate}"))?;
        if w.shape() != [hidden, xh.len()] {
            return Err(DiffError::ShapeMismatch {
                op: "lstm_cell".to_string(),
                detail: format!(
                    "weight {prefix}.w_{gate} has shape {:?}, expected [{hidden}, {}]",
                    w.shape(),
                    xh.len()
                ),
            });
        }
        let mut pre = vec![0.0; hidden];
        kernels::matvec(w.values(), &xh, hidden, xh.len(), &mut pre);
        for (p, bv) in pre.iter_mut().zip(b.values()) {
            *p += bv;
        }
        acts.push(pre);
    }
    let mut c_new = vec![0.0; hidden];
    let mut h_new = vec![0.0; hidden];
    for idx in 0..hidden {
        let i = kernels::sigmoid(acts[0][idx]);
        let f = kernels::sigmoid(acts[1][idx]);
        let g = acts[2][idx].tanh();
        let o = kernels::sigmoid(acts[3][idx]);
        c_new[idx] = f * c[idx] + i * g;
        h_new[idx] = o * c_new[idx].tanh();
    }
    Ok((h_new, c_new))
}
