//! Reverse-mode differentiation over a linear tape of primitive applications.
//!
//! A `Tape` records every primitive executed during a forward pass together
//! with its inputs and output, in topological order. `backward` replays the
//! tape in reverse, accumulating adjoints per node and collecting gradients
//! for named parameters.

use std::collections::{BTreeMap, HashMap};

use super::kernels;
use super::{Array, DiffError, ParamStore};

/// Negative slope of the leaky ReLU used throughout the models.
pub const LEAKY_SLOPE: f64 = 0.01;
/// Variance epsilon for layer normalization.
pub const LAYER_NORM_EPS: f64 = 1e-5;

pub type NodeId = usize;

/// The primitive vocabulary. Every variant has an exact adjoint rule in
/// `Tape::backward_op`.
#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    /// External input (gradient tracked, useful for input-sensitivity checks).
    Input,
    /// Constant leaf; receives no gradient.
    Const,
    /// Named parameter leaf bound from a `ParamStore`.
    Param(String),
    MatMul,
    Add,
    Mul,
    Div,
    Concat,
    LeakyRelu(f64),
    Sigmoid,
    Tanh,
    Sqrt,
    Softmax,
    TopkSoftmax(usize),
    LayerNorm(f64),
    OuterProduct,
    Flatten,
    ReduceSum,
    ReduceMax,
    /// Mean binary cross-entropy on logits; the second input (labels) is
    /// treated as constant by the adjoint.
    BceLoss,
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Const => "const",
            Op::Param(_) => "param",
            Op::MatMul => "matmul",
            Op::Add => "add",
            Op::Mul => "multiply",
            Op::Div => "divide",
            Op::Concat => "concat",
            Op::LeakyRelu(_) => "leaky_relu",
            Op::Sigmoid => "sigmoid",
            Op::Tanh => "tanh",
            Op::Sqrt => "sqrt",
            Op::Softmax => "softmax",
            Op::TopkSoftmax(_) => "topk_softmax",
            Op::LayerNorm(_) => "layer_norm",
            Op::OuterProduct => "outer_product",
            Op::Flatten => "flatten",
            Op::ReduceSum => "reduce_sum",
            Op::ReduceMax => "reduce_max",
            Op::BceLoss => "bce_loss",
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    inputs: Vec<NodeId>,
    value: Array,
}

/// Gradients produced by a backward pass.
#[derive(Debug, Clone)]
pub struct Gradients {
    node_grads: Vec<Option<Array>>,
    param_grads: BTreeMap<String, Array>,
}

impl Gradients {
    /// Gradient with respect to a node, if any gradient reached it.
    pub fn wrt(&self, id: NodeId) -> Option<&Array> {
        self.node_grads.get(id).and_then(|g| g.as_ref())
    }

    pub fn param(&self, name: &str) -> Option<&Array> {
        self.param_grads.get(name)
    }

    pub fn params(&self) -> &BTreeMap<String, Array> {
        &self.param_grads
    }

    pub fn into_params(self) -> BTreeMap<String, Array> {
        self.param_grads
    }
}

/// Execution tape. Construct, apply primitives, then call `backward` on a
/// scalar loss node.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    bound_params: HashMap<String, NodeId>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Array {
        &self.nodes[id].value
    }

    pub fn input(&mut self, value: Array) -> NodeId {
        self.push(Op::Input, vec![], value)
    }

    pub fn constant(&mut self, value: Array) -> NodeId {
        self.push(Op::Const, vec![], value)
    }

    /// Bind a named parameter as a leaf. Repeated binds of the same name
    /// return the same node so gradients accumulate naturally.
    pub fn param(&mut self, name: &str, store: &ParamStore) -> Result<NodeId, DiffError> {
        if let Some(&id) = self.bound_params.get(name) {
            return Ok(id);
        }
        let value = store.get(name)?.clone();
        let id = self.push(Op::Param(name.to_string()), vec![], value);
        self.bound_params.insert(name.to_string(), id);
        Ok(id)
    }

    fn push(&mut self, op: Op, inputs: Vec<NodeId>, value: Array) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(Node { op, inputs, value });
        id
    }

    /// Apply a primitive to existing nodes; validates shapes and records the
    /// application.
    pub fn apply(&mut self, op: Op, inputs: &[NodeId]) -> Result<NodeId, DiffError> {
        let arrays: Vec<&Array> = inputs.iter().map(|&i| &self.nodes[i].value).collect();
        let value = eval_op(&op, &arrays)?;
        Ok(self.push(op, inputs.to_vec(), value))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, DiffError> {
        self.apply(Op::MatMul, &[a, b])
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, DiffError> {
        self.apply(Op::Add, &[a, b])
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, DiffError> {
        self.apply(Op::Mul, &[a, b])
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, DiffError> {
        self.apply(Op::Div, &[a, b])
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId, DiffError> {
        self.apply(Op::Concat, parts)
    }

    pub fn leaky_relu(&mut self, x: NodeId) -> Result<NodeId, DiffError> {
        self.apply(Op::LeakyRelu(LEAKY_SLOPE), &[x])
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId, DiffError> {
        self.apply(Op::Sigmoid, &[x])
    }

    pub fn tanh(&mut self, x: NodeId) -> Result<NodeId, DiffError> {
        self.apply(Op::Tanh, &[x])
    }

    pub fn sqrt(&mut self, x: NodeId) -> Result<NodeId, DiffError> {
        self.apply(Op::Sqrt, &[x])
    }

    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId, DiffError> {
        self.apply(Op::Softmax, &[x])
    }

    pub fn topk_softmax(&mut self, x: NodeId, k: usize) -> Result<NodeId, DiffError> {
        self.apply(Op::TopkSoftmax(k), &[x])
    }

    pub fn layer_norm(&mut self, x: NodeId, gain: NodeId, bias: NodeId) -> Result<NodeId, DiffError> {
        self.apply(Op::LayerNorm(LAYER_NORM_EPS), &[x, gain, bias])
    }

    pub fn outer(&mut self, x: NodeId, y: NodeId) -> Result<NodeId, DiffError> {
        self.apply(Op::OuterProduct, &[x, y])
    }

    pub fn flatten(&mut self, x: NodeId) -> Result<NodeId, DiffError> {
        self.apply(Op::Flatten, &[x])
    }

    pub fn reduce_sum(&mut self, x: NodeId) -> Result<NodeId, DiffError> {
        self.apply(Op::ReduceSum, &[x])
    }

    pub fn reduce_max(&mut self, x: NodeId) -> Result<NodeId, DiffError> {
        self.apply(Op::ReduceMax, &[x])
    }

    pub fn bce_loss(&mut self, logits: NodeId, labels: NodeId) -> Result<NodeId, DiffError> {
        self.apply(Op::BceLoss, &[logits, labels])
    }

    /// Recompute every node from the leaves. Returns the recomputed values so
    /// callers can assert bit-identical replay.
    pub fn replay(&self) -> Result<Vec<Array>, DiffError> {
        let mut values: Vec<Array> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let value = if node.inputs.is_empty() {
                node.value.clone()
            } else {
                let arrays: Vec<&Array> = node.inputs.iter().map(|&i| &values[i]).collect();
                eval_op(&node.op, &arrays)?
            };
            values.push(value);
        }
        Ok(values)
    }

    /// Reverse pass from a scalar loss node. The seed adjoint is 1.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients, DiffError> {
        let loss_value = &self.nodes[loss].value;
        if !loss_value.is_scalar() {
            return Err(DiffError::NotScalar(loss_value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss] = Some(vec![1.0]);

        for id in (0..=loss).rev() {
            let Some(out_grad) = grads[id].take() else {
                continue;
            };
            let node = &self.nodes[id];
            if node.inputs.is_empty() {
                grads[id] = Some(out_grad);
                continue;
            }
            let input_grads = self.backward_op(node, &out_grad)?;
            grads[id] = Some(out_grad);
            for (&input_id, grad) in node.inputs.iter().zip(input_grads.into_iter()) {
                let Some(grad) = grad else { continue };
                if grad.iter().any(|g| !g.is_finite()) {
                    return Err(DiffError::NonFinite(format!(
                        "gradient through {}",
                        node.op.name()
                    )));
                }
                match &mut grads[input_id] {
                    Some(existing) => {
                        for (e, g) in existing.iter_mut().zip(grad.iter()) {
                            *e += g;
                        }
                    }
                    None => grads[input_id] = Some(grad),
                }
            }
        }

        let mut param_grads = BTreeMap::new();
        for (id, node) in self.nodes.iter().enumerate() {
            if let Op::Param(name) = &node.op {
                let grad = match &grads[id] {
                    Some(g) => Array::new(node.value.shape().to_vec(), g.clone())?,
                    None => Array::zeros(node.value.shape().to_vec()),
                };
                param_grads.insert(name.clone(), grad);
            }
        }
        let node_grads = grads
            .into_iter()
            .enumerate()
            .map(|(id, g)| {
                g.map(|g| {
                    Array::new(self.nodes[id].value.shape().to_vec(), g)
                        .expect("adjoint shape matches node shape")
                })
            })
            .collect();
        Ok(Gradients {
            node_grads,
            param_grads,
        })
    }

    /// Adjoints of one node's inputs given the adjoint of its output.
    /// `None` entries mean no gradient flows to that input.
    fn backward_op(&self, node: &Node, dy: &[f64]) -> Result<Vec<Option<Vec<f64>>>, DiffError> {
        let input = |i: usize| &self.nodes[node.inputs[i]].value;
        let out = &node.value;
        let grads = match &node.op {
            Op::Input | Op::Const | Op::Param(_) => vec![],
            Op::MatMul => {
                let (a, b) = (input(0), input(1));
                let (m, k, n) = matmul_dims(a, b)?;
                let mut da = vec![0.0; m * k];
                let mut db = vec![0.0; k * n];
                // da = dy @ b^T
                for i in 0..m {
                    for kk in 0..k {
                        let mut acc = 0.0;
                        for j in 0..n {
                            acc += dy[i * n + j] * b.values()[kk * n + j];
                        }
                        da[i * k + kk] = acc;
                    }
                }
                // db = a^T @ dy
                for kk in 0..k {
                    for j in 0..n {
                        let mut acc = 0.0;
                        for i in 0..m {
                            acc += a.values()[i * k + kk] * dy[i * n + j];
                        }
                        db[kk * n + j] = acc;
                    }
                }
                vec![Some(da), Some(db)]
            }
            Op::Add => vec![Some(dy.to_vec()), Some(dy.to_vec())],
            Op::Mul => {
                let (a, b) = (input(0), input(1));
                match mul_mode(a, b)? {
                    MulMode::Elementwise => {
                        let da = dy.iter().zip(b.values()).map(|(d, v)| d * v).collect();
                        let db = dy.iter().zip(a.values()).map(|(d, v)| d * v).collect();
                        vec![Some(da), Some(db)]
                    }
                    MulMode::RowScale { rows, cols } => {
                        let mut da = vec![0.0; rows * cols];
                        let mut db = vec![0.0; rows];
                        for i in 0..rows {
                            let scale = b.values()[i];
                            for j in 0..cols {
                                let d = dy[i * cols + j];
                                da[i * cols + j] = d * scale;
                                db[i] += d * a.values()[i * cols + j];
                            }
                        }
                        vec![Some(da), Some(db)]
                    }
                    MulMode::ScalarLhs => {
                        let s = a.values()[0];
                        let da = vec![dy.iter().zip(b.values()).map(|(d, v)| d * v).sum()];
                        let db = dy.iter().map(|d| d * s).collect();
                        vec![Some(da), Some(db)]
                    }
                    MulMode::ScalarRhs => {
                        let s = b.values()[0];
                        let da = dy.iter().map(|d| d * s).collect();
                        let db = vec![dy.iter().zip(a.values()).map(|(d, v)| d * v).sum()];
                        vec![Some(da), Some(db)]
                    }
                }
            }
            Op::Div => {
                let (a, b) = (input(0), input(1));
                if a.shape() == b.shape() {
                    let da: Vec<f64> = dy.iter().zip(b.values()).map(|(d, v)| d / v).collect();
                    let db: Vec<f64> = dy
                        .iter()
                        .zip(a.values().iter().zip(b.values()))
                        .map(|(d, (av, bv))| -d * av / (bv * bv))
                        .collect();
                    vec![Some(da), Some(db)]
                } else {
                    // any / scalar
                    let s = b.values()[0];
                    let da: Vec<f64> = dy.iter().map(|d| d / s).collect();
                    let db = vec![dy
                        .iter()
                        .zip(a.values())
                        .map(|(d, av)| -d * av / (s * s))
                        .sum()];
                    vec![Some(da), Some(db)]
                }
            }
            Op::Concat => {
                let mut parts = Vec::with_capacity(node.inputs.len());
                let mut offset = 0;
                for idx in 0..node.inputs.len() {
                    let len = input(idx).numel();
                    parts.push(Some(dy[offset..offset + len].to_vec()));
                    offset += len;
                }
                parts
            }
            Op::LeakyRelu(slope) => {
                let x = input(0);
                let dx = dy
                    .iter()
                    .zip(x.values())
                    .map(|(d, &v)| if v >= 0.0 { *d } else { d * slope })
                    .collect();
                vec![Some(dx)]
            }
            Op::Sigmoid => {
                let dx = dy
                    .iter()
                    .zip(out.values())
                    .map(|(d, &s)| d * s * (1.0 - s))
                    .collect();
                vec![Some(dx)]
            }
            Op::Tanh => {
                let dx = dy
                    .iter()
                    .zip(out.values())
                    .map(|(d, &t)| d * (1.0 - t * t))
                    .collect();
                vec![Some(dx)]
            }
            Op::Sqrt => {
                let dx = dy
                    .iter()
                    .zip(out.values())
                    .map(|(d, &s)| d * 0.5 / s)
                    .collect();
                vec![Some(dx)]
            }
            Op::Softmax => {
                let y = out.values();
                let dot: f64 = dy.iter().zip(y).map(|(d, v)| d * v).sum();
                let dx = dy.iter().zip(y).map(|(d, v)| v * (d - dot)).collect();
                vec![Some(dx)]
            }
            Op::TopkSoftmax(k) => {
                let support = kernels::topk_indices(input(0).values(), *k);
                let y = out.values();
                let dot: f64 = support.iter().map(|&i| dy[i] * y[i]).sum();
                let mut dx = vec![0.0; y.len()];
                for &i in &support {
                    dx[i] = y[i] * (dy[i] - dot);
                }
                vec![Some(dx)]
            }
            Op::LayerNorm(eps) => {
                let (x, gain) = (input(0), input(1));
                let n = x.numel();
                let nf = n as f64;
                let mean = x.values().iter().sum::<f64>() / nf;
                let var =
                    x.values().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / nf;
                let inv_std = 1.0 / (var + eps).sqrt();
                let xhat: Vec<f64> = x.values().iter().map(|v| (v - mean) * inv_std).collect();
                let h: Vec<f64> = dy.iter().zip(gain.values()).map(|(d, g)| d * g).collect();
                let h_mean = h.iter().sum::<f64>() / nf;
                let hx_mean = h.iter().zip(&xhat).map(|(a, b)| a * b).sum::<f64>() / nf;
                let dx = h
                    .iter()
                    .zip(&xhat)
                    .map(|(hi, xi)| inv_std * (hi - h_mean - xi * hx_mean))
                    .collect();
                let dgain = dy.iter().zip(&xhat).map(|(d, xi)| d * xi).collect();
                let dbias = dy.to_vec();
                vec![Some(dx), Some(dgain), Some(dbias)]
            }
            Op::OuterProduct => {
                let (x, y) = (input(0), input(1));
                let (p, q) = (x.numel(), y.numel());
                let mut dx = vec![0.0; p];
                let mut dyv = vec![0.0; q];
                for i in 0..p {
                    for j in 0..q {
                        let d = dy[i * q + j];
                        dx[i] += d * y.values()[j];
                        dyv[j] += d * x.values()[i];
                    }
                }
                vec![Some(dx), Some(dyv)]
            }
            Op::Flatten => vec![Some(dy.to_vec())],
            Op::ReduceSum => {
                let n = input(0).numel();
                vec![Some(vec![dy[0]; n])]
            }
            Op::ReduceMax => {
                let x = input(0).values();
                let argmax = x
                    .iter()
                    .enumerate()
                    .fold((0usize, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
                        if v > bv {
                            (i, v)
                        } else {
                            (bi, bv)
                        }
                    })
                    .0;
                let mut dx = vec![0.0; x.len()];
                dx[argmax] = dy[0];
                vec![Some(dx)]
            }
            Op::BceLoss => {
                let (logits, labels) = (input(0), input(1));
                let n = logits.numel() as f64;
                let dlogits = logits
                    .values()
                    .iter()
                    .zip(labels.values())
                    .map(|(&z, &y)| dy[0] * (kernels::sigmoid(z) - y) / n)
                    .collect();
                vec![Some(dlogits), None]
            }
        };
        Ok(grads)
    }
}

fn shape_err(op: &Op, detail: String) -> DiffError {
    DiffError::ShapeMismatch {
        op: op.name().to_string(),
        detail,
    }
}

/// Effective (m, k, n) for matmul; rank-1 operands are promoted to a row or
/// column vector.
fn matmul_dims(a: &Array, b: &Array) -> Result<(usize, usize, usize), DiffError> {
    let op = Op::MatMul;
    match (a.shape(), b.shape()) {
        ([m, k], [k2, n]) if k == k2 => Ok((*m, *k, *n)),
        ([m, k], [k2]) if k == k2 => Ok((*m, *k, 1)),
        ([k], [k2, n]) if k == k2 => Ok((1, *k, *n)),
        (sa, sb) => Err(shape_err(
            &op,
            format!("incompatible operands {sa:?} x {sb:?}"),
        )),
    }
}

enum MulMode {
    Elementwise,
    RowScale { rows: usize, cols: usize },
    ScalarLhs,
    ScalarRhs,
}

fn mul_mode(a: &Array, b: &Array) -> Result<MulMode, DiffError> {
    if a.shape() == b.shape() {
        Ok(MulMode::Elementwise)
    } else if a.is_scalar() {
        Ok(MulMode::ScalarLhs)
    } else if b.is_scalar() {
        Ok(MulMode::ScalarRhs)
    } else if a.shape().len() == 2 && b.shape().len() == 1 && a.shape()[0] == b.shape()[0] {
        Ok(MulMode::RowScale {
            rows: a.shape()[0],
            cols: a.shape()[1],
        })
    } else {
        Err(shape_err(
            &Op::Mul,
            format!("incompatible operands {:?} x {:?}", a.shape(), b.shape()),
        ))
    }
}

/// Forward evaluation of one primitive. Shared by `apply` and `replay`.
pub(crate) fn eval_op(op: &Op, inputs: &[&Array]) -> Result<Array, DiffError> {
    let arity_err = |want: &str| {
        Err(shape_err(
            op,
            format!("expects {want} inputs, got {}", inputs.len()),
        ))
    };
    match op {
        Op::Input | Op::Const | Op::Param(_) => Err(shape_err(
            op,
            "leaf ops cannot be applied to inputs".to_string(),
        )),
        Op::MatMul => {
            if inputs.len() != 2 {
                return arity_err("2");
            }
            let (a, b) = (inputs[0], inputs[1]);
            let (m, k, n) = matmul_dims(a, b)?;
            let mut out = vec![0.0; m * n];
            kernels::matmul(a.values(), b.values(), m, k, n, &mut out);
            let shape = match (a.shape().len(), b.shape().len()) {
                (2, 2) => vec![m, n],
                (2, 1) => vec![m],
                (1, 2) => vec![n],
                _ => unreachable!(),
            };
            Array::new(shape, out)
        }
        Op::Add => {
            if inputs.len() != 2 {
                return arity_err("2");
            }
            let (a, b) = (inputs[0], inputs[1]);
            if a.shape() != b.shape() {
                return Err(shape_err(
                    op,
                    format!("operands {:?} vs {:?}", a.shape(), b.shape()),
                ));
            }
            let out = a
                .values()
                .iter()
                .zip(b.values())
                .map(|(x, y)| x + y)
                .collect();
            Array::new(a.shape().to_vec(), out)
        }
        Op::Mul => {
            if inputs.len() != 2 {
                return arity_err("2");
            }
            let (a, b) = (inputs[0], inputs[1]);
            match mul_mode(a, b)? {
                MulMode::Elementwise => {
                    let out = a
                        .values()
                        .iter()
                        .zip(b.values())
                        .map(|(x, y)| x * y)
                        .collect();
                    Array::new(a.shape().to_vec(), out)
                }
                MulMode::RowScale { rows, cols } => {
                    let mut out = vec![0.0; rows * cols];
                    for i in 0..rows {
                        let s = b.values()[i];
                        for j in 0..cols {
                            out[i * cols + j] = a.values()[i * cols + j] * s;
                        }
                    }
                    Array::new(vec![rows, cols], out)
                }
                MulMode::ScalarLhs => {
                    let s = a.values()[0];
                    let out = b.values().iter().map(|v| s * v).collect();
                    Array::new(b.shape().to_vec(), out)
                }
                MulMode::ScalarRhs => {
                    let s = b.values()[0];
                    let out = a.values().iter().map(|v| s * v).collect();
                    Array::new(a.shape().to_vec(), out)
                }
            }
        }
        Op::Div => {
            if inputs.len() != 2 {
                return arity_err("2");
            }
            let (a, b) = (inputs[0], inputs[1]);
            if a.shape() == b.shape() {
                let out = a
                    .values()
                    .iter()
                    .zip(b.values())
                    .map(|(x, y)| x / y)
                    .collect();
                Array::new(a.shape().to_vec(), out)
            } else if b.is_scalar() {
                let s = b.values()[0];
                let out = a.values().iter().map(|v| v / s).collect();
                Array::new(a.shape().to_vec(), out)
            } else {
                Err(shape_err(
                    op,
                    format!("operands {:?} vs {:?}", a.shape(), b.shape()),
                ))
            }
        }
        Op::Concat => {
            if inputs.is_empty() {
                return arity_err("at least 1");
            }
            let mut out = Vec::new();
            for a in inputs {
                if a.shape().len() != 1 {
                    return Err(shape_err(
                        op,
                        format!("only rank-1 inputs supported, got {:?}", a.shape()),
                    ));
                }
                out.extend_from_slice(a.values());
            }
            Ok(Array::vector(out))
        }
        Op::LeakyRelu(slope) => {
            if inputs.len() != 1 {
                return arity_err("1");
            }
            let out = inputs[0]
                .values()
                .iter()
                .map(|&v| kernels::leaky_relu(v, *slope))
                .collect();
            Array::new(inputs[0].shape().to_vec(), out)
        }
        Op::Sigmoid => {
            if inputs.len() != 1 {
                return arity_err("1");
            }
            let out = inputs[0].values().iter().map(|&v| kernels::sigmoid(v)).collect();
            Array::new(inputs[0].shape().to_vec(), out)
        }
        Op::Tanh => {
            if inputs.len() != 1 {
                return arity_err("1");
            }
            let out = inputs[0].values().iter().map(|v| v.tanh()).collect();
            Array::new(inputs[0].shape().to_vec(), out)
        }
        Op::Sqrt => {
            if inputs.len() != 1 {
                return arity_err("1");
            }
            let out = inputs[0].values().iter().map(|v| v.sqrt()).collect();
            Array::new(inputs[0].shape().to_vec(), out)
        }
        Op::Softmax => {
            if inputs.len() != 1 {
                return arity_err("1");
            }
            let x = inputs[0];
            if x.shape().len() != 1 {
                return Err(shape_err(op, format!("needs a vector, got {:?}", x.shape())));
            }
            let mut out = vec![0.0; x.numel()];
            kernels::softmax(x.values(), &mut out);
            Array::new(x.shape().to_vec(), out)
        }
        Op::TopkSoftmax(k) => {
            if inputs.len() != 1 {
                return arity_err("1");
            }
            let x = inputs[0];
            if x.shape().len() != 1 {
                return Err(shape_err(op, format!("needs a vector, got {:?}", x.shape())));
            }
            if *k == 0 || *k > x.numel() {
                return Err(shape_err(
                    op,
                    format!("k={k} outside 1..={}", x.numel()),
                ));
            }
            let mut out = vec![0.0; x.numel()];
            kernels::topk_softmax(x.values(), *k, &mut out);
            Array::new(x.shape().to_vec(), out)
        }
        Op::LayerNorm(eps) => {
            if inputs.len() != 3 {
                return arity_err("3 (x, gain, bias)");
            }
            let (x, gain, bias) = (inputs[0], inputs[1], inputs[2]);
            if x.shape().len() != 1 || x.shape() != gain.shape() || x.shape() != bias.shape() {
                return Err(shape_err(
                    op,
                    format!(
                        "x {:?}, gain {:?}, bias {:?} must be equal-length vectors",
                        x.shape(),
                        gain.shape(),
                        bias.shape()
                    ),
                ));
            }
            let mut out = vec![0.0; x.numel()];
            kernels::layer_norm(x.values(), gain.values(), bias.values(), *eps, &mut out);
            Array::new(x.shape().to_vec(), out)
        }
        Op::OuterProduct => {
            if inputs.len() != 2 {
                return arity_err("2");
            }
            let (x, y) = (inputs[0], inputs[1]);
            if x.shape().len() != 1 || y.shape().len() != 1 {
                return Err(shape_err(
                    op,
                    format!("needs two vectors, got {:?} x {:?}", x.shape(), y.shape()),
                ));
            }
            let mut out = vec![0.0; x.numel() * y.numel()];
            kernels::outer(x.values(), y.values(), &mut out);
            Array::new(vec![x.numel(), y.numel()], out)
        }
        Op::Flatten => {
            if inputs.len() != 1 {
                return arity_err("1");
            }
            inputs[0].reshaped(vec![inputs[0].numel()])
        }
        Op::ReduceSum => {
            if inputs.len() != 1 {
                return arity_err("1");
            }
            Ok(Array::scalar(inputs[0].values().iter().sum()))
        }
        Op::ReduceMax => {
            if inputs.len() != 1 {
                return arity_err("1");
            }
            let m = inputs[0]
                .values()
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max);
            Ok(Array::scalar(m))
        }
        Op::BceLoss => {
            if inputs.len() != 2 {
                return arity_err("2 (logits, labels)");
            }
            let (logits, labels) = (inputs[0], inputs[1]);
            if logits.shape() != labels.shape() || logits.shape().len() != 1 {
                return Err(shape_err(
                    op,
                    format!(
                        "logits {:?} and labels {:?} must be equal-length vectors",
                        logits.shape(),
                        labels.shape()
                    ),
                ));
            }
            Ok(Array::scalar(kernels::bce_with_logits_mean(
                logits.values(),
                labels.values(),
            )))
        }
    }
}
