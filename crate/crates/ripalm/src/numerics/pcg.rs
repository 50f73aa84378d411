//! Preconditioned conjugate gradient for SPD operators.

use super::vector::{axpy, dot, norm2, DenseVector};
use super::{LinearOperator, NumericsError};

/// Result of a PCG run. `converged` is false when the iteration budget ran
/// out; `x` then holds the iterate with the smallest residual seen.
pub struct PcgOutcome {
    pub x: DenseVector,
    pub iterations: usize,
    pub converged: bool,
    pub residual_norm: f64,
}

/// Solves `A x = rhs` for an SPD operator `A` to `||A x - rhs|| <= tol`.
///
/// `precond` applies an SPD approximation of `A^{-1}` (typically the inverse
/// diagonal); `None` runs plain CG. Breakdown (`<p, Ap> <= 0`) signals a
/// non-SPD operator and is reported as an error.
pub fn pcg_solve(
    op: &dyn LinearOperator,
    rhs: &[f64],
    tol: f64,
    max_iterations: usize,
    precond: Option<&dyn LinearOperator>,
) -> Result<PcgOutcome, NumericsError> {
    let n = op.dim();
    debug_assert_eq!(rhs.len(), n);

    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut r_norm = norm2(&r);
    if r_norm <= tol {
        return Ok(PcgOutcome {
            x: DenseVector(x),
            iterations: 0,
            converged: true,
            residual_norm: r_norm,
        });
    }

    let apply_precond = |r: &[f64], z: &mut Vec<f64>| match precond {
        Some(m) => m.apply(r, z),
        None => z.copy_from_slice(r),
    };

    let mut z = vec![0.0; n];
    apply_precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];

    let mut best_x = x.clone();
    let mut best_norm = r_norm;

    for it in 1..=max_iterations {
        op.apply(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if curvature <= 0.0 {
            return Err(NumericsError::Breakdown { curvature });
        }
        let alpha = rz / curvature;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        r_norm = norm2(&r);
        if r_norm < best_norm {
            best_norm = r_norm;
            best_x.copy_from_slice(&x);
        }
        if r_norm <= tol {
            return Ok(PcgOutcome {
                x: DenseVector(x),
                iterations: it,
                converged: true,
                residual_norm: r_norm,
            });
        }
        apply_precond(&r, &mut z);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }

    Ok(PcgOutcome {
        x: DenseVector(best_x),
        iterations: max_iterations,
        converged: false,
        residual_norm: best_norm,
    })
}

/// Jacobi preconditioner: applies `diag^{-1}` entrywise.
pub struct DiagPrecond(pub Vec<f64>);

impl LinearOperator for DiagPrecond {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for ((o, xi), d) in out.iter_mut().zip(x).zip(&self.0) {
            *o = xi / d;
        }
    }
}
