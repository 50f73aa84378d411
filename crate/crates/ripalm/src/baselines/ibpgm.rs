//! Bregman proximal-gradient warm start for QROT.
//!
//! Each outer iteration linearizes the quadratic term at the current plan and
//! solves the resulting entropic-OT subproblem approximately with a single
//! Sinkhorn sweep on the kernel `Xi = exp(-M / mu)`,
//! `M = C + lambda X - mu log X`. Dual potentials are recovered as
//! `mu log u`, `mu log v`; the loop stops once the QROT KKT residual drops
//! below the warm-start tolerance.

use std::time::Instant;

use thiserror::Error;

use crate::numerics::{DenseMatrix, DenseVector};
use crate::qrot::{kkt_residuals_qrot, QrotDualPoint, QrotInstance};

use super::WarmStartInfo;

#[derive(Debug, Error)]
pub enum IbpgmError {
    /// The entropic kernel rounded to zero somewhere a marginal needs mass:
    /// the proximal parameter is too small for the cost scale.
    #[error("entropic kernel underflow at {context}")]
    Underflow { context: &'static str },
}

/// One Sinkhorn sweep: `u = alpha ./ (Xi v_prev)`, then
/// `v = beta ./ (Xi^T u)`.
pub fn sinkhorn_sweep(
    xi: &DenseMatrix,
    alpha: &DenseVector,
    beta: &DenseVector,
    v_prev: &DenseVector,
) -> Result<(DenseVector, DenseVector), IbpgmError> {
    let xv = xi.matvec(v_prev);
    let mut u = vec![0.0; alpha.len()];
    for i in 0..u.len() {
        if xv[i] <= 0.0 || !xv[i].is_finite() {
            return Err(IbpgmError::Underflow { context: "row sum" });
        }
        u[i] = alpha[i] / xv[i];
    }
    let xtu = xi.matvec_t(&u);
    let mut v = vec![0.0; beta.len()];
    for j in 0..v.len() {
        if xtu[j] <= 0.0 || !xtu[j].is_finite() {
            return Err(IbpgmError::Underflow {
                context: "column sum",
            });
        }
        v[j] = beta[j] / xtu[j];
    }
    Ok((DenseVector(u), DenseVector(v)))
}

pub struct IbpgmWarmStart {
    /// Recovered dual potential for the row marginal (`mu log u`).
    pub u: DenseVector,
    /// Recovered dual potential for the column marginal (`mu log v`).
    pub v: DenseVector,
    pub plan: DenseMatrix,
    pub info: WarmStartInfo,
}

/// Runs the warm-start loop for at most `max_outer` iterations or until
/// `Delta_res < tol`. The proximal parameter is fixed to
/// `max(lambda, 0.1 * median(C))`, floored away from zero so the kernel stays
/// finite.
pub fn ibpgm_warmstart(
    inst: &QrotInstance,
    max_outer: usize,
    tol: f64,
) -> Result<IbpgmWarmStart, IbpgmError> {
    let start = Instant::now();
    let (m, n) = (inst.m(), inst.n());
    let mu = proximal_parameter(inst);
    assert!(mu >= inst.lambda() && mu > 0.0);

    // Uniform product start keeps everything strictly positive.
    let mut plan = DenseMatrix::from_fn(m, n, |i, j| inst.alpha()[i] * inst.beta()[j]);
    let mut v_prev = DenseVector(vec![1.0; n]);
    let mut potentials = QrotDualPoint {
        u: DenseVector::zeros(m),
        v: DenseVector::zeros(n),
    };
    let mut residual = kkt_residuals_qrot(inst, &potentials, &plan).res_max();
    let mut iterations = 0;

    let lambda = inst.lambda();
    let mut xi = DenseMatrix::zeros(m, n);
    for k in 0..max_outer {
        if residual < tol {
            break;
        }
        // Xi = exp(-(C + lambda X - mu log X) / mu).
        for i in 0..m {
            let crow = inst.cost().row(i);
            let xrow = plan.row(i);
            let xirow = xi.row_mut(i);
            for j in 0..n {
                let mij = crow[j] + lambda * xrow[j] - mu * xrow[j].ln();
                xirow[j] = (-mij / mu).exp();
            }
        }
        let (u, v) = sinkhorn_sweep(&xi, inst.alpha(), inst.beta(), &v_prev)?;
        for i in 0..m {
            let xirow = xi.row(i);
            let xrow = plan.row_mut(i);
            let ui = u[i];
            for j in 0..n {
                xrow[j] = ui * xirow[j] * v[j];
            }
        }
        potentials = QrotDualPoint {
            u: DenseVector(u.iter().map(|x| mu * x.ln()).collect()),
            v: DenseVector(v.iter().map(|x| mu * x.ln()).collect()),
        };
        v_prev = v;
        iterations = k + 1;
        residual = kkt_residuals_qrot(inst, &potentials, &plan).res_max();
    }

    Ok(IbpgmWarmStart {
        u: potentials.u,
        v: potentials.v,
        plan,
        info: WarmStartInfo {
            iterations,
            seconds: start.elapsed().as_secs_f64(),
            residual,
        },
    })
}

fn proximal_parameter(inst: &QrotInstance) -> f64 {
    let mut entries = inst.cost().data().to_vec();
    let mid = entries.len() / 2;
    let (_, median, _) = entries.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    inst.lambda().max(0.1 * *median).max(1e-6)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sweep_hand_example() {
        // Xi = ones(2x2), alpha = beta = (1/2, 1/2), v0 = 1:
        // u = (1/4, 1/4), v = (1, 1), X = Diag(u) Xi Diag(v) = 0.25 ones.
        let xi = DenseMatrix::from_vec(2, 2, vec![1.0; 4]);
        let alpha = DenseVector(vec![0.5, 0.5]);
        let beta = DenseVector(vec![0.5, 0.5]);
        let v0 = DenseVector(vec![1.0, 1.0]);
        let (u, v) = sinkhorn_sweep(&xi, &alpha, &beta, &v0).unwrap();
        assert_eq!(&u[..], &[0.25, 0.25]);
        assert_eq!(&v[..], &[1.0, 1.0]);
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(u[i] * xi.get(i, j) * v[j], 0.25);
            }
        }
    }

    #[test]
    fn marginals_exact_after_each_half_update() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let m = rng.gen_range(2..6);
            let n = rng.gen_range(2..6);
            let xi = DenseMatrix::from_fn(m, n, |_, _| rng.gen_range(0.05..2.0));
            let mut a: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..1.0)).collect();
            let sa: f64 = a.iter().sum();
            a.iter_mut().for_each(|x| *x /= sa);
            let mut b: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
            let sb: f64 = b.iter().sum();
            b.iter_mut().for_each(|x| *x /= sb);
            let alpha = DenseVector(a);
            let beta = DenseVector(b);
            let v0 = DenseVector((0..n).map(|_| rng.gen_range(0.2..2.0)).collect());

            let (u, v) = sinkhorn_sweep(&xi, &alpha, &beta, &v0).unwrap();

            // After the u-update the row marginals of Diag(u) Xi Diag(v0)
            // equal alpha.
            for i in 0..m {
                let row: f64 = (0..n).map(|j| u[i] * xi.get(i, j) * v0[j]).sum();
                assert!((row - alpha[i]).abs() <= 1e-14 * alpha[i].max(1.0));
            }
            // After the v-update the column marginals of Diag(u) Xi Diag(v)
            // equal beta.
            for j in 0..n {
                let col: f64 = (0..m).map(|i| u[i] * xi.get(i, j) * v[j]).sum();
                assert!((col - beta[j]).abs() <= 1e-14 * beta[j].max(1.0));
            }
        }
    }

    #[test]
    fn underflow_detected() {
        let xi = DenseMatrix::zeros(2, 2);
        let alpha = DenseVector(vec![0.5, 0.5]);
        let beta = DenseVector(vec![0.5, 0.5]);
        let v0 = DenseVector(vec![1.0, 1.0]);
        assert!(matches!(
            sinkhorn_sweep(&xi, &alpha, &beta, &v0),
            Err(IbpgmError::Underflow { .. })
        ));
    }

    #[test]
    fn warmstart_reaches_loose_tolerance() {
        let inst = crate::qrot::gen_gaussian_mixture_instance(20, 20, 1.0, 4);
        let warm = ibpgm_warmstart(&inst, 500, 1e-3).unwrap();
        assert!(warm.info.residual < 1e-3);
        assert!(warm.info.iterations <= 500);
        // mu >= lambda is enforced.
        assert!(warm.plan.data().iter().all(|&x| x > 0.0));
    }
}
