//! Small shared feed-forward building blocks used by the models.

use rand::RngCore;

use crate::diffcore::{kernels, Array, DiffError, NodeId, ParamStore, Tape, LEAKY_SLOPE};
use crate::rng;

pub fn normal_matrix(rows: usize, cols: usize, scale: f64, rng: &mut impl RngCore) -> Array {
    let values: Vec<f64> = (0..rows * cols).map(|_| rng::normal(rng) * scale).collect();
    Array::new(vec![rows, cols], values).expect("normals are finite")
}

/// Two-layer MLP parameters under `prefix`: w1/b1 (hidden) and w2/b2 (output).
pub fn init_mlp(
    store: &mut ParamStore,
    prefix: &str,
    input: usize,
    hidden: usize,
    output: usize,
    rng: &mut impl RngCore,
) {
    store.insert(
        format!("{prefix}.w1"),
        normal_matrix(hidden, input, 1.0 / (input as f64).sqrt(), rng),
    );
    store.insert(format!("{prefix}.b1"), Array::zeros(vec![hidden]));
    store.insert(
        format!("{prefix}.w2"),
        normal_matrix(output, hidden, 1.0 / (hidden as f64).sqrt(), rng),
    );
    store.insert(format!("{prefix}.b2"), Array::zeros(vec![output]));
}

/// Tape path of the two-layer MLP: w2 · lrelu(w1 x + b1) + b2.
pub fn mlp_graph(
    tape: &mut Tape,
    store: &ParamStore,
    prefix: &str,
    input: NodeId,
) -> Result<NodeId, DiffError> {
    let w1 = tape.param(&format!("{prefix}.w1"), store)?;
    let b1 = tape.param(&format!("{prefix}.b1"), store)?;
    let w2 = tape.param(&format!("{prefix}.w2"), store)?;
    let b2 = tape.param(&format!("{prefix}.b2"), store)?;
    let pre = tape.matmul(w1, input)?;
    let pre = tape.add(pre, b1)?;
    let act = tape.leaky_relu(pre)?;
    let out = tape.matmul(w2, act)?;
    tape.add(out, b2)
}

/// Inference path of the same MLP; kernel-for-kernel identical to the tape.
pub fn mlp_fast(store: &ParamStore, prefix: &str, input: &[f64]) -> Result<Vec<f64>, DiffError> {
    let w1 = store.get(&format!("{prefix}.w1"))?;
    let b1 = store.get(&format!("{prefix}.b1"))?;
    let w2 = store.get(&format!("{prefix}.w2"))?;
    let b2 = store.get(&format!("{prefix}.b2"))?;
    let hidden = b1.numel();
    let mut pre = vec![0.0; hidden];
    kernels::matvec(w1.values(), input, hidden, input.len(), &mut pre);
    for (p, b) in pre.iter_mut().zip(b1.values()) {
        *p = kernels::leaky_relu(*p + b, LEAKY_SLOPE);
    }
    let out_dim = b2.numel();
    let mut out = vec![0.0; out_dim];
    kernels::matvec(w2.values(), &pre, out_dim, hidden, &mut out);
    for (o, b) in out.iter_mut().zip(b2.values()) {
        *o += b;
    }
    Ok(out)
}
