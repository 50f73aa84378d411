//! Dense vector/matrix kernels and the two SPD linear-system strategies
//! (direct Cholesky factorization, preconditioned conjugate gradient) shared
//! by all Newton solves.

mod cholesky;
mod matrix;
mod pcg;
mod vector;

pub use cholesky::{cholesky_solve, CholeskyFactor};
pub use matrix::DenseMatrix;
pub use pcg::{pcg_solve, DiagPrecond, PcgOutcome};
pub use vector::{axpy, dot, norm2, norm2_sq, DenseVector};

use thiserror::Error;

/// Errors from the dense linear-algebra layer.
#[derive(Debug, Error)]
pub enum NumericsError {
    /// A Cholesky pivot was non-positive: the matrix is not positive definite.
    #[error("matrix is not symmetric positive definite (pivot {pivot:.3e} at index {index})")]
    NotSpd { index: usize, pivot: f64 },
    /// The matrix handed to the factorization path is not symmetric.
    #[error("matrix is not symmetric (max asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },
    /// CG detected `<p, Ap> <= 0`, which signals a non-SPD operator.
    #[error("conjugate gradient breakdown: <p, Ap> = {curvature:.3e} <= 0")]
    Breakdown { curvature: f64 },
    /// Shape mismatch between operands.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// Non-finite value encountered while reading external data.
    #[error("non-finite entry at position {0}")]
    NonFinite(usize),
}

/// Abstract symmetric linear operator, used by PCG and the structured
/// Newton systems that never materialize their matrix.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    /// Computes `out = A * x`.
    fn apply(&self, x: &[f64], out: &mut [f64]);

    fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.apply(x, &mut out);
        out
    }
}

/// Wraps a closure as a [`LinearOperator`].
pub struct FnOperator<F: Fn(&[f64], &mut [f64])> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}

impl LinearOperator for DenseMatrix {
    fn dim(&self) -> usize {
        debug_assert_eq!(self.rows(), self.cols());
        self.rows()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.matvec_into(x, out);
    }
}

/// System dimension up to which Newton systems are solved by a direct
/// factorization; larger systems fall back to PCG on the structured matvec.
pub const DIRECT_SOLVE_MAX_DIM: usize = 2000;

/// Probabilistic SPD check: `<d, A d> > 0` for `trials` random directions.
/// A deterministic certificate would require a full factorization, so this is
/// the cheap sanity check used before handing an operator to CG.
pub fn probably_spd<R: rand::Rng>(op: &dyn LinearOperator, trials: usize, rng: &mut R) -> bool {
    let n = op.dim();
    let mut buf = vec![0.0; n];
    for _ in 0..trials {
        let d: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        op.apply(&d, &mut buf);
        if dot(&d, &buf) <= 0.0 {
            return false;
        }
    }
    true
}
