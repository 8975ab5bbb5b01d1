//! Finite-difference verification of every primitive's adjoint rule.
//!
//! Each case rebuilds the same scalar-valued graph at perturbed inputs, so
//! the central-difference oracle is independent of the backward pass it
//! checks.

use nbf_core::diffcore::{
    finite_diff_check, init_lstm_params, lstm_cell, Array, DiffError, LstmDims, NodeId, ParamStore,
    Tape, GRAD_CHECK_EPS,
};
use nbf_core::rng;
use rand::RngCore;

const TOL: f64 = 1e-4;

/// Random values in [-1, 1].
fn random_vec(rng: &mut impl RngCore, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng::uniform(rng) * 2.0 - 1.0).collect()
}

/// Random values in [-1, 1] with |v| >= margin, for kinked ops.
fn random_vec_off_kink(rng: &mut impl RngCore, n: usize, margin: f64) -> Vec<f64> {
    random_vec(rng, n)
        .into_iter()
        .map(|v| {
            if v.abs() < margin {
                v.signum().max(0.0).mul_add(2.0, -1.0) * margin
            } else {
                v
            }
        })
        .collect()
}

/// Check the gradient of a rebuilt graph with respect to its one varying input.
fn check_graph<F>(build: F, x: Array) -> f64
where
    F: Fn(&Array) -> Result<(Tape, NodeId, NodeId), DiffError>,
{
    let (tape, input, loss) = build(&x).expect("graph builds");
    let grads = tape.backward(loss).expect("backward");
    let analytic = grads.wrt(input).expect("input receives gradient").clone();
    finite_diff_check(
        |p| {
            let (tape, _, loss) = build(p)?;
            tape.value(loss).item()
        },
        &x,
        &analytic,
        GRAD_CHECK_EPS,
    )
    .expect("finite differences evaluate")
}

/// Weighted sum with distinct weights so every output coordinate matters.
fn weighted_sum(tape: &mut Tape, node: NodeId) -> Result<NodeId, DiffError> {
    let n = tape.value(node).numel();
    let weights: Vec<f64> = (0..n).map(|i| 0.37 + 0.61 * i as f64).collect();
    let flat = tape.flatten(node)?;
    let w = tape.constant(Array::vector(weights));
    let prod = tape.mul(flat, w)?;
    tape.reduce_sum(prod)
}

#[test]
fn matmul_gradients_match_finite_differences() {
    let mut r = rng::chacha(101, 0);
    // matrix x matrix, varying the left operand
    let b = Array::matrix(3, 2, random_vec(&mut r, 6)).unwrap();
    let x = Array::matrix(2, 3, random_vec(&mut r, 6)).unwrap();
    let err = check_graph(
        |p| {
            let mut tape = Tape::new();
            let a = tape.input(p.clone());
            let bc = tape.constant(b.clone());
            let y = tape.matmul(a, bc)?;
            let loss = weighted_sum(&mut tape, y)?;
            Ok((tape, a, loss))
        },
        x,
    );
    assert!(err < TOL, "matmul lhs err = {err}");

    // matrix x vector, varying the right operand
    let a = Array::matrix(4, 3, random_vec(&mut r, 12)).unwrap();
    let x = Array::vector(random_vec(&mut r, 3));
    let err = check_graph(
        |p| {
            let mut tape = Tape::new();
            let ac = tape.constant(a.clone());
            let v = tape.input(p.clone());
            let y = tape.matmul(ac, v)?;
            let loss = weighted_sum(&mut tape, y)?;
            Ok((tape, v, loss))
        },
        x,
    );
    assert!(err < TOL, "matvec rhs err = {err}");

    // vector x matrix, varying the left operand
    let b = Array::matrix(3, 4, random_vec(&mut r, 12)).unwrap();
    let x = Array::vector(random_vec(&mut r, 3));
    let err = check_graph(
        |p| {
            let mut tape = Tape::new();
            let v = tape.input(p.clone());
            let bc = tape.constant(b.clone());
            let y = tape.matmul(v, bc)?;
            let loss = weighted_sum(&mut tape, y)?;
            Ok((tape, v, loss))
        },
        x,
    );
    assert!(err < TOL, "vecmat lhs err = {err}");
}

#[test]
fn elementwise_gradients_match_finite_differences() {
    let mut r = rng::chacha(102, 0);
    let other = Array::vector(random_vec(&mut r, 6));

    for (name, build) in [
        (
            "add",
            Box::new(|p: &Array, o: &Array| {
                let mut tape = Tape::new();
                let x = tape.input(p.clone());
                let c = tape.constant(o.clone());
                let y = tape.add(x, c)?;
                let loss = weighted_sum(&mut tape, y)?;
                Ok((tape, x, loss))
            }) as Box<dyn Fn(&Array, &Array) -> Result<(Tape, NodeId, NodeId), DiffError>>,
        ),
        (
            "multiply",
            Box::new(|p: &Array, o: &Array| {
                let mut tape = Tape::new();
                let x = tape.input(p.clone());
                let c = tape.constant(o.clone());
                let y = tape.mul(x, c)?;
                let loss = weighted_sum(&mut tape, y)?;
                Ok((tape, x, loss))
            }),
        ),
        (
            "sigmoid",
            Box::new(|p: &Array, _: &Array| {
                let mut tape = Tape::new();
                let x = tape.input(p.clone());
                let y = tape.sigmoid(x)?;
                let loss = weighted_sum(&mut tape, y)?;
                Ok((tape, x, loss))
            }),
        ),
        (
            "tanh",
            Box::new(|p: &Array, _: &Array| {
                let mut tape = Tape::new();
                let x = tape.input(p.clone());
                let y = tape.tanh(x)?;
                let loss = weighted_sum(&mut tape, y)?;
                Ok((tape, x, loss))
            }),
        ),
        (
            "softmax",
            Box::new(|p: &Array, _: &Array| {
                let mut tape = Tape::new();
                let x = tape.input(p.clone());
                let y = tape.softmax(x)?;
                let loss = weighted_sum(&mut tape, y)?;
                Ok((tape, x, loss))
            }),
        ),
        (
            "reduce_sum",
            Box::new(|p: &Array, _: &Array| {
                let mut tape = Tape::new();
                let x = tape.input(p.clone());
                let loss = tape.reduce_sum(x)?;
                Ok((tape, x, loss))
            }),
        ),
    ] {
        let x = Array::vector(random_vec(&mut r, 6));
        let err = check_graph(|p| build(p, &other), x);
        assert!(err < TOL, "{name} err = {err}");
    }
}

#[test]
fn mul_broadcast_gradients_match_finite_differences() {
    let mut r = rng::chacha(103, 0);
    // row-scale: [m,d] * [m], varying the vector
    let m = Array::matrix(4, 3, random_vec(&mut r, 12)).unwrap();
    let a = Array::vector(random_vec(&mut r, 4));
    let err = check_graph(
        |p| {
            let mut tape = Tape::new();
            let mc = tape.constant(m.clone());
            let v = tape.input(p.clone());
            let y = tape.mul(mc, v)?;
            let loss = weighted_sum(&mut tape, y)?;
            Ok((tape, v, loss))
        },
        a,
    );
    assert!(err < TOL, "row-scale err = {err}");

    // scalar broadcast, varying the scalar
    let m2 = Array::matrix(2, 3, random_vec(&mut r, 6)).unwrap();
    let s = Array::scalar(0.4);
    let err = check_graph(
        |p| {
            let mut tape = Tape::new();
            let sc = tape.input(p.clone());
            let mc = tape.constant(m2.clone());
            let y = tape.mul(sc, mc)?;
            let loss = weighted_sum(&mut tape, y)?;
            Ok((tape, sc, loss))
        },
        s,
    );
    assert!(err < TOL, "scalar broadcast err = {err}");
}

#[test]
fn div_sqrt_reduce_max_gradients_match_finite_differences() {
    let mut r = rng::chacha(104, 0);
    // div by scalar, varying numerator
    let x = Array::vector(random_vec(&mut r, 5));
    let err = check_graph(
        |p| {
            let mut tape = Tape::new();
            let num = tape.input(p.clone());
            let den = tape.constant(Array::scalar(0.7));
            let y = tape.div(num, den)?;
            let loss = weighted_sum(&mut tape, y)?;
            Ok((tape, num, loss))
        },
        x,
    );
    assert!(err < TOL, "div numerator err = {err}");

    // div varying the scalar denominator
    let s = Array::scalar(0.8);
    let numerator = Array::vector(random_vec(&mut r, 5));
    let err = check_graph(
        |p| {
            let mut tape = Tape::new();
            let num = tape.constant(numerator.clone());
            let den = tape.input(p.clone());
            let y = tape.div(num, den)?;
            let loss = weighted_sum(&mut tape, y)?;
            Ok((tape, den, loss))
        },
        s,
    );
    assert!(err < TOL, "div denominator err = {err}");

    // sqrt over positive inputs
    let x = Array::vector((0..5).map(|i| 0.2 + 0.3 * i as f64).collect());
    let err = check_graph(
        |p| {
            let mut tape = Tape::new();
            let v = tape.input(p.clone());
            let y = tape.sqrt(v)?;
            let loss = weighted_sum(&mut tape, y)?;
            Ok((tape, v, loss))
        },
        x,
    );
    assert!(err < TOL, "sqrt err = {err}");

    // reduce_max with a clear margin around the max
    let mut vals = random_vec(&mut r, 6);
    vals[2] = 2.0;
    let err = check_graph(
        |p| {
            let mut tape = Tape::new();
            let v = tape.input(p.clone());
            let loss = tape.reduce_max(v)?;
            Ok((tape, v, loss))
        },
        Array::vector(vals),
    );
    assert!(err < TOL, "reduce_max err = {err}");
}

#[test]
fn leaky_relu_gradient_matches_away_from_kink() {
    let mut r = rng::chacha(105, 0);
    let x = Array::vector(random_vec_off_kink(&mut r, 8, 0.05));
    let err = check_graph(
        |p| {
            let mut tape = Tape::new();
            let v = tape.input(p.clone());
            let y = tape.leaky_relu(v)?;
            let loss = weighted_sum(&mut tape, y)?;
            Ok((tape, v, loss))
        },
        x,
    );
    assert!(err < TOL, "leaky_relu err = {err}");
}

#[test]
fn topk_softmax_gradient_matches_inside_stable_support() {
    // Gaps well above the probe step keep the top-k support fixed under
    // perturbation, where the adjoint is exact.
    let x = Array::vector(vec![1.0, -0.4, 0.62, 0.1, -0.9]);
    let err = check_graph(
        |p| {
            let mut tape = Tape::new();
            let v = tape.input(p.clone());
            let y = tape.topk_softmax(v, 2)?;
            let loss = weighted_sum(&mut tape, y)?;
            Ok((tape, v, loss))
        },
        x,
    );
    assert!(err < TOL, "topk_softmax err = {err}");
}

#[test]
fn layer_norm_gradients_match_finite_differences() {
    let mut r = rng::chacha(106, 0);
    let x = Array::vector(random_vec(&mut r, 6));
    let gain = Array::vector(random_vec(&mut r, 6));
    let bias = Array::vector(random_vec(&mut r, 6));

    // with respect to x
    let err = check_graph(
        |p| {
            let mut tape = Tape::new();
            let v = tape.input(p.clone());
            let g = tape.constant(gain.clone());
            let b = tape.constant(bias.clone());
            let y = tape.layer_norm(v, g, b)?;
            let loss = weighted_sum(&mut tape, y)?;
            Ok((tape, v, loss))
        },
        x.clone(),
    );
    assert!(err < TOL, "layer_norm x err = {err}");

    // with respect to gain
    let err = check_graph(
        |p| {
            let mut tape = Tape::new();
            let v = tape.constant(x.clone());
            let g = tape.input(p.clone());
            let b = tape.constant(bias.clone());
            let y = tape.layer_norm(v, g, b)?;
            let loss = weighted_sum(&mut tape, y)?;
            Ok((tape, g, loss))
        },
        gain.clone(),
    );
    assert!(err < TOL, "layer_norm gain err = {err}");

    // with respect to bias
    let err = check_graph(
        |p| {
            let mut tape = Tape::new();
            let v = tape.constant(x.clone());
            let g = tape.constant(gain.clone());
            let b = tape.input(p.clone());
            let y = tape.layer_norm(v, g, b)?;
            let loss = weighted_sum(&mut tape, y)?;
            Ok((tape, b, loss))
        },
        bias,
    );
    assert!(err < TOL, "layer_norm bias err = {err}");
}

#[test]
fn outer_concat_flatten_bce_gradients_match_finite_differences() {
    let mut r = rng::chacha(107, 0);
    // outer product, both operands
    let y_side = Array::vector(random_vec(&mut r, 3));
    let x = Array::vector(random_vec(&mut r, 4));
    let err = check_graph(
        |p| {
            let mut tape = Tape::new();
            let a = tape.input(p.clone());
            let b = tape.constant(y_side.clone());
            let y = tape.outer(a, b)?;
            let loss = weighted_sum(&mut tape, y)?;
            Ok((tape, a, loss))
        },
        x.clone(),
    );
    assert!(err < TOL, "outer lhs err = {err}");
    let err = check_graph(
        |p| {
            let mut tape = Tape::new();
            let a = tape.constant(x.clone());
            let b = tape.input(p.clone());
            let y = tape.outer(a, b)?;
            let loss = weighted_sum(&mut tape, y)?;
            Ok((tape, b, loss))
        },
        y_side,
    );
    assert!(err < TOL, "outer rhs err = {err}");

    // concat + flatten in one graph
    let tail = Array::vector(random_vec(&mut r, 3));
    let x = Array::matrix(2, 2, random_vec(&mut r, 4)).unwrap();
    let err = check_graph(
        |p| {
            let mut tape = Tape::new();
            let m = tape.input(p.clone());
            let flat = tape.flatten(m)?;
            let t = tape.constant(tail.clone());
            let cat = tape.concat(&[flat, t])?;
            let loss = weighted_sum(&mut tape, cat)?;
            Ok((tape, m, loss))
        },
        x,
    );
    assert!(err < TOL, "concat/flatten err = {err}");

    // bce loss with respect to logits
    let labels = Array::vector(vec![1.0, 0.0, 1.0, 1.0, 0.0]);
    let logits = Array::vector(random_vec(&mut r, 5));
    let err = check_graph(
        |p| {
            let mut tape = Tape::new();
            let z = tape.input(p.clone());
            let y = tape.constant(labels.clone());
            let loss = tape.bce_loss(z, y)?;
            Ok((tape, z, loss))
        },
        logits,
    );
    assert!(err < TOL, "bce_loss err = {err}");
}

#[test]
fn unrolled_lstm_gradient_matches_finite_differences() {
    let dims = LstmDims { input: 3, hidden: 4 };
    let mut store = ParamStore::new();
    let mut r = rng::chacha(108, 0);
    init_lstm_params(&mut store, "cell", dims, &mut r);
    let steps: Vec<Array> = (0..3)
        .map(|_| Array::vector(random_vec(&mut r, 3)))
        .collect();

    // Gradient with respect to the first input of a 3-step unroll.
    let x0 = steps[0].clone();
    let build = |p: &Array| -> Result<(Tape, NodeId, NodeId), DiffError> {
        let mut tape = Tape::new();
        let mut h = tape.constant(Array::zeros(vec![4]));
        let mut c = tape.constant(Array::zeros(vec![4]));
        let first = tape.input(p.clone());
        let (h1, c1) = lstm_cell(&mut tape, &store, "cell", first, h, c)?;
        h = h1;
        c = c1;
        for step in &steps[1..] {
            let x = tape.constant(step.clone());
            let (hn, cn) = lstm_cell(&mut tape, &store, "cell", x, h, c)?;
            h = hn;
            c = cn;
        }
        let loss = weighted_sum(&mut tape, h)?;
        Ok((tape, first, loss))
    };
    let err = check_graph(build, x0);
    assert!(err < TOL, "lstm unroll input err = {err}");

    // Gradient with respect to one weight matrix through the same unroll.
    let w_name = "cell.w_g";
    let w0 = store.get(w_name).unwrap().clone();
    let run = |w: &Array| -> Result<(Tape, f64, Array), DiffError> {
        let mut local = store.clone();
        local.insert(w_name, w.clone());
        let mut tape = Tape::new();
        let mut h = tape.constant(Array::zeros(vec![4]));
        let mut c = tape.constant(Array::zeros(vec![4]));
        for step in &steps {
            let x = tape.constant(step.clone());
            let (hn, cn) = lstm_cell(&mut tape, &local, "cell", x, h, c)?;
            h = hn;
            c = cn;
        }
        let loss = weighted_sum(&mut tape, h)?;
        let value = tape.value(loss).item()?;
        let grads = tape.backward(loss)?;
        Ok((tape, value, grads.param(w_name).unwrap().clone()))
    };
    let (_, _, analytic) = run(&w0).unwrap();
    let err = finite_diff_check(
        |w| run(w).map(|(_, v, _)| v),
        &w0,
        &analytic,
        GRAD_CHECK_EPS,
    )
    .unwrap();
    assert!(err < TOL, "lstm unroll weight err = {err}");
}
