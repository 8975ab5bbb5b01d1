//! Central finite-difference verification of analytic gradients.

use super::{Array, DiffError};

/// Default step for central differences at double precision.
pub const GRAD_CHECK_EPS: f64 = 1e-5;

/// Additive floor in the relative-error denominator; keeps coordinates with
/// near-zero true gradient from amplifying finite-difference noise.
const DENOM_FLOOR: f64 = 1e-5;

/// Compare an analytic gradient against central finite differences of `f`
/// at `x`. Returns the max over coordinates of
/// `|analytic - central| / (|central| + floor)`.
pub fn finite_diff_check<F>(
    mut f: F,
    x: &Array,
    analytic: &Array,
    eps: f64,
) -> Result<f64, DiffError>
where
    F: FnMut(&Array) -> Result<f64, DiffError>,
{
    if x.shape() != analytic.shape() {
        return Err(DiffError::BadShape(format!(
            "analytic gradient shape {:?} does not match point shape {:?}",
            analytic.shape(),
            x.shape()
        )));
    }
    let mut max_err: f64 = 0.0;
    let mut probe = x.clone();
    for i in 0..x.numel() {
        let original = probe.values()[i];
        probe.values_mut()[i] = original + eps;
        let plus = f(&probe)?;
        probe.values_mut()[i] = original - eps;
        let minus = f(&probe)?;
        probe.values_mut()[i] = original;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(DiffError::NonFinite(format!(
                "finite-difference probe at coordinate {i}"
            )));
        }
        let central = (plus - minus) / (2.0 * eps);
        let err = (analytic.values()[i] - central).abs() / (central.abs() + DENOM_FLOOR);
        max_err = max_err.max(err);
    }
    Ok(max_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_squares_gradient_is_exact() {
        let x = Array::vector(vec![1.0, 2.0]);
        let analytic = Array::vector(vec![2.0, 4.0]);
        let err = finite_diff_check(
            |p| Ok(p.values().iter().map(|v| v * v).sum()),
            &x,
            &analytic,
            GRAD_CHECK_EPS,
        )
        .unwrap();
        assert!(err < 1e-8, "err = {err}");
    }

    #[test]
    fn constant_function_has_zero_error() {
        let x = Array::vector(vec![0.3, -0.7, 1.1]);
        let analytic = Array::zeros(vec![3]);
        let err = finite_diff_check(|_| Ok(42.0), &x, &analytic, GRAD_CHECK_EPS).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn non_finite_probe_is_an_error() {
        let x = Array::vector(vec![0.0]);
        let analytic = Array::vector(vec![0.0]);
        let res = finite_diff_check(|_| Ok(f64::NAN), &x, &analytic, GRAD_CHECK_EPS);
        assert!(res.is_err());
    }
}
