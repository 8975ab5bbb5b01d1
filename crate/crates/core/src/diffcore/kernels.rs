//! Shared forward math kernels.
//!
//! Both the tape (training) path and the plain inference path call these,
//! so the two paths produce bit-identical outputs by construction.

/// out[m,n] = a[m,k] @ b[k,n], all row-major.
pub fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for row in 0..m {
        let a_row = &a[row * k..(row + 1) * k];
        let out_row = &mut out[row * n..(row + 1) * n];
        out_row.fill(0.0);
        for (kk, &av) in a_row.iter().enumerate() {
            let b_row = &b[kk * n..(kk + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row.iter()) {
                *o += av * bv;
            }
        }
    }
}

/// out[m] = a[m,k] @ x[k].
pub fn matvec(a: &[f64], x: &[f64], m: usize, k: usize, out: &mut [f64]) {
    matmul(a, x, m, k, 1, out);
}

pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Softmax with max-subtraction; writes a probability vector summing to 1.
pub fn softmax(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &l) in out.iter_mut().zip(logits.iter()) {
        let e = (l - max).exp();
        *o = e;
        sum += e;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Indices of the k largest entries, ties broken by lowest index.
/// Returned indices are in ascending order.
pub fn topk_indices(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

/// Softmax restricted to the top-k logits; entries outside the support are 0.
pub fn topk_softmax(logits: &[f64], k: usize, out: &mut [f64]) {
    let support = topk_indices(logits, k);
    let max = support
        .iter()
        .map(|&i| logits[i])
        .fold(f64::NEG_INFINITY, f64::max);
    out.fill(0.0);
    let mut sum = 0.0;
    for &i in &support {
        let e = (logits[i] - max).exp();
        out[i] = e;
        sum += e;
    }
    for &i in &support {
        out[i] /= sum;
    }
}

/// y = (x - mean) / sqrt(var + eps) * gain + bias, over the whole vector.
/// Returns (mean, inv_std) for reuse in the backward pass.
pub fn layer_norm(x: &[f64], gain: &[f64], bias: &[f64], eps: f64, out: &mut [f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv_std = 1.0 / (var + eps).sqrt();
    for ((o, &v), (&g, &b)) in out
        .iter_mut()
        .zip(x.iter())
        .zip(gain.iter().zip(bias.iter()))
    {
        *o = (v - mean) * inv_std * g + b;
    }
    (mean, inv_std)
}

/// Numerically stable binary cross-entropy with logits, averaged over elements.
pub fn bce_with_logits_mean(logits: &[f64], labels: &[f64]) -> f64 {
    let mut total = 0.0;
    for (&z, &y) in logits.iter().zip(labels.iter()) {
        // max(z,0) - z*y + ln(1 + exp(-|z|))
        total += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
    }
    total / logits.len() as f64
}

/// out[p,q] = x[p] * y[q].
pub fn outer(x: &[f64], y: &[f64], out: &mut [f64]) {
    debug_assert_eq!(out.len(), x.len() * y.len());
    for (i, &xv) in x.iter().enumerate() {
        for (j, &yv) in y.iter().enumerate() {
            out[i * y.len() + j] = xv * yv;
        }
    }
}
