//! Cyclic Jacobi eigendecomposition for small symmetric matrices.
//!
//! Query dimensions here are at most a few hundred, so the quadratic-per-sweep
//! Jacobi iteration is plenty and keeps the crate free of a linear-algebra
//! dependency for this one routine.

use crate::diffcore::Array;

/// Eigendecomposition A = U diag(values) U^T of a symmetric matrix.
/// Columns of `u` are orthonormal eigenvectors. Eigenvalues are returned in
/// descending order.
pub fn symmetric_eigen(a: &Array) -> (Array, Vec<f64>) {
    let d = a.shape()[0];
    assert_eq!(a.shape(), &[d, d], "symmetric_eigen needs a square matrix");
    let mut m: Vec<f64> = a.values().to_vec();
    let mut u: Vec<f64> = vec![0.0; d * d];
    for i in 0..d {
        u[i * d + i] = 1.0;
    }

    let frob: f64 = m.iter().map(|v| v * v).sum::<f64>().sqrt();
    let tol = (frob * 1e-14).max(1e-300);
    for _sweep in 0..100 {
        let off: f64 = (0..d)
            .flat_map(|i| (i + 1..d).map(move |j| (i, j)))
            .map(|(i, j)| m[i * d + j] * m[i * d + j])
            .sum::<f64>()
            .sqrt();
        if off <= tol {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = m[p * d + q];
                if apq.abs() <= tol / (d as f64) {
                    continue;
                }
                let app = m[p * d + p];
                let aqq = m[q * d + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // Rotate rows/columns p and q of m.
                for i in 0..d {
                    let mip = m[i * d + p];
                    let miq = m[i * d + q];
                    m[i * d + p] = c * mip - s * miq;
                    m[i * d + q] = s * mip + c * miq;
                }
                for j in 0..d {
                    let mpj = m[p * d + j];
                    let mqj = m[q * d + j];
                    m[p * d + j] = c * mpj - s * mqj;
                    m[q * d + j] = s * mpj + c * mqj;
                }
                // Accumulate the rotation into u.
                for i in 0..d {
                    let uip = u[i * d + p];
                    let uiq = u[i * d + q];
                    u[i * d + p] = c * uip - s * uiq;
                    u[i * d + q] = s * uip + c * uiq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| m[j * d + j].partial_cmp(&m[i * d + i]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| m[i * d + i]).collect();
    let mut u_sorted = vec![0.0; d * d];
    for (new_col, &old_col) in order.iter().enumerate() {
        for row in 0..d {
            u_sorted[row * d + new_col] = u[row * d + old_col];
        }
    }
    (
        Array::new(vec![d, d], u_sorted).expect("rotation stays finite"),
        values,
    )
}
