//! Owned dense vector plus the handful of BLAS-1 kernels the solvers use.

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use super::NumericsError;

/// Dense column vector of `f64`.
///
/// Arithmetic helpers live as free functions over slices so they compose with
/// borrowed sub-views; the newtype exists to carry the finiteness invariant
/// for data read from files or produced by instance generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseVector(pub Vec<f64>);

impl DenseVector {
    pub fn zeros(len: usize) -> Self {
        DenseVector(vec![0.0; len])
    }

    pub fn from_fn(len: usize, f: impl FnMut(usize) -> f64) -> Self {
        DenseVector((0..len).map(f).collect())
    }

    /// Constructs from raw data, rejecting NaN/Inf entries. Entry point for
    /// file readers and generators.
    pub fn from_checked(data: Vec<f64>) -> Result<Self, NumericsError> {
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(NumericsError::NonFinite(i));
        }
        Ok(DenseVector(data))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm2(&self) -> f64 {
        norm2(&self.0)
    }

    pub fn dot(&self, other: &Self) -> f64 {
        dot(&self.0, &other.0)
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, alpha: f64, other: &[f64]) {
        axpy(alpha, other, &mut self.0);
    }

    pub fn scale(&mut self, alpha: f64) {
        for v in &mut self.0 {
            *v *= alpha;
        }
    }

    /// Returns `self + alpha * other` without mutating.
    pub fn plus_scaled(&self, alpha: f64, other: &[f64]) -> Self {
        let mut out = self.clone();
        out.add_scaled(alpha, other);
        out
    }

    /// Returns `self - other`.
    pub fn minus(&self, other: &[f64]) -> Self {
        debug_assert_eq!(self.len(), other.len());
        DenseVector(self.iter().zip(other).map(|(a, b)| a - b).collect())
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        DenseVector(self.iter().map(|v| alpha * v).collect())
    }
}

impl Deref for DenseVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for DenseVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for DenseVector {
    fn from(v: Vec<f64>) -> Self {
        DenseVector(v)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // Four-way unrolled accumulation; keeps the FP order deterministic while
    // letting the compiler vectorize.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = 4 * i;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut tail = 0.0;
    for j in 4 * chunks..a.len() {
        tail += a[j] * b[j];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub fn norm2_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm2(a: &[f64]) -> f64 {
    norm2_sq(a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
