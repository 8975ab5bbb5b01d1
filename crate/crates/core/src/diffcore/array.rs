//! Dense row-major f64 arrays, the numeric carrier for every model in the crate.

use super::DiffError;

/// A dense array of f64 values with an explicit shape, stored row-major.
///
/// Rank 1 arrays are vectors, rank 2 are matrices. Scalars are represented
/// as shape `[1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Array {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl Array {
    /// Build an array, checking that the shape matches the value count and
    /// every value is finite.
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self, DiffError> {
        let numel: usize = shape.iter().product();
        if shape.iter().any(|&d| d == 0) {
            return Err(DiffError::BadShape(format!(
                "zero-sized dimension in shape {shape:?}"
            )));
        }
        if numel != values.len() {
            return Err(DiffError::BadShape(format!(
                "shape {shape:?} implies {numel} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(DiffError::NonFinite("array construction".into()));
        }
        Ok(Array { shape, values })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel = shape.iter().product();
        Array {
            shape,
            values: vec![0.0; numel],
        }
    }

    pub fn scalar(v: f64) -> Self {
        Array {
            shape: vec![1],
            values: vec![v],
        }
    }

    pub fn vector(values: Vec<f64>) -> Self {
        Array {
            shape: vec![values.len()],
            values,
        }
    }

    /// Matrix from row-major values.
    pub fn matrix(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self, DiffError> {
        Array::new(vec![rows, cols], values)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn numel(&self) -> usize {
        self.values.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.values.len() == 1
    }

    /// The single value of a scalar array.
    pub fn item(&self) -> Result<f64, DiffError> {
        if self.is_scalar() {
            Ok(self.values[0])
        } else {
            Err(DiffError::NotScalar(self.shape.clone()))
        }
    }

    /// Rank-2 accessor; panics if out of range (internal use after shape checks).
    pub fn at2(&self, i: usize, j: usize) -> f64 {
        debug_assert_eq!(self.shape.len(), 2);
        self.values[i * self.shape[1] + j]
    }

    /// Reinterpret with a new shape of identical element count.
    pub fn reshaped(&self, shape: Vec<usize>) -> Result<Self, DiffError> {
        let numel: usize = shape.iter().product();
        if numel != self.values.len() {
            return Err(DiffError::BadShape(format!(
                "cannot reshape {:?} ({} values) into {:?}",
                self.shape,
                self.values.len(),
                shape
            )));
        }
        Ok(Array {
            shape,
            values: self.values.clone(),
        })
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Max absolute difference to another array of the same shape.
    pub fn max_abs_diff(&self, other: &Array) -> f64 {
        assert_eq!(self.shape, other.shape, "max_abs_diff shape mismatch");
        self.values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
