//! Basis pursuit denoising (BPDN) problem binding.
//!
//! The primal problem `min ||s||_1  s.t. ||D s - b|| <= kappa_hat` is lifted
//! with `t = D s - b` into the linear-constraint template with
//! `x = (s; t)`, `f(x) = ||s||_1 + indicator(||t|| <= kappa_hat)` and
//! `A = [D, -I]`, then solved through the dual with the outer ALM loop and a
//! semismooth Newton subsolver whose linear systems exploit the soft-threshold
//! active set via the Sherman-Morrison-Woodbury identity.

mod generate;
mod newton;
mod oracle;
mod residuals;

pub use generate::gen_synthetic_bpdn;
pub use newton::{assemble_newton_system, solve_newton_bpdn, BallCase, BpdnNewtonSystem};
pub use oracle::{grad_phi, phi_value, prox_l1, proj_l2ball, BpdnOracle, BpdnSubproblem};
pub use residuals::{dual_objective, feas_nobj, kkt_residuals_bpdn, primal_objective};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{dadmm_bpdn_solve, AdmmConfig, WarmStartInfo};
use crate::numerics::{DenseMatrix, DenseVector};
use crate::solver::{
    ripalm_solve, InitialPoint, KktResiduals, RipalmConfig, RipalmError, SolveReport,
};
use crate::ssn::SsnConfig;

/// Problem data: dictionary `D`, measurement `b`, and noise bound
/// `kappa_hat > 0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BpdnInstance {
    dict: DenseMatrix,
    rhs: DenseVector,
    kappa_hat: f64,
}

impl BpdnInstance {
    pub fn new(dict: DenseMatrix, rhs: DenseVector, kappa_hat: f64) -> Result<Self, BpdnError> {
        if dict.rows() != rhs.len() {
            return Err(BpdnError::DimensionMismatch {
                rows: dict.rows(),
                rhs: rhs.len(),
            });
        }
        if dict.rows() == 0 || dict.cols() == 0 {
            return Err(BpdnError::Empty);
        }
        if !(kappa_hat > 0.0) || !kappa_hat.is_finite() {
            return Err(BpdnError::BadNoiseBound(kappa_hat));
        }
        Ok(BpdnInstance {
            dict,
            rhs,
            kappa_hat,
        })
    }

    pub fn m(&self) -> usize {
        self.dict.rows()
    }

    pub fn n(&self) -> usize {
        self.dict.cols()
    }

    pub fn dict(&self) -> &DenseMatrix {
        &self.dict
    }

    pub fn rhs(&self) -> &DenseVector {
        &self.rhs
    }

    pub fn kappa_hat(&self) -> f64 {
        self.kappa_hat
    }
}

/// Lifted primal point `(s, t)` with `t` standing in for `D s - b`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BpdnPrimalPoint {
    pub s: DenseVector,
    pub t: DenseVector,
}

impl BpdnPrimalPoint {
    /// Splits the stacked solver variable `x = (s; t)`.
    pub fn from_stacked(x: &DenseVector, n: usize) -> Self {
        BpdnPrimalPoint {
            s: DenseVector(x[..n].to_vec()),
            t: DenseVector(x[n..].to_vec()),
        }
    }

    pub fn stacked(&self) -> DenseVector {
        let mut x = Vec::with_capacity(self.s.len() + self.t.len());
        x.extend_from_slice(&self.s);
        x.extend_from_slice(&self.t);
        DenseVector(x)
    }
}

#[derive(Debug, Error)]
pub enum BpdnError {
    #[error("dictionary has {rows} rows but the measurement has length {rhs}")]
    DimensionMismatch { rows: usize, rhs: usize },
    #[error("dictionary must be nonempty")]
    Empty,
    #[error("noise bound must be positive and finite, got {0}")]
    BadNoiseBound(f64),
    #[error("sparsity {sparsity} exceeds the signal dimension {n}")]
    SparsityTooLarge { sparsity: usize, n: usize },
}

/// Converged solution with its dual certificate and solve trace.
#[derive(Debug, Clone)]
pub struct BpdnSolution {
    pub primal: BpdnPrimalPoint,
    pub dual: DenseVector,
    pub report: SolveReport,
    pub warm_start: Option<WarmStartInfo>,
}

/// Solves a BPDN instance with ripALM. `warm_start` first runs the dual ADMM
/// to `Delta_res < 1e-3` (at most 100 iterations) and starts from its
/// primal-dual output; otherwise everything starts at the origin.
pub fn solve_ripalm(
    inst: &BpdnInstance,
    cfg: &RipalmConfig,
    ssn_cfg: &SsnConfig,
    warm_start: bool,
) -> Result<BpdnSolution, RipalmError> {
    let (m, n) = (inst.m(), inst.n());
    let oracle = BpdnOracle::new(inst);
    let (init, warm_info) = if warm_start {
        let mut admm_cfg = AdmmConfig::default();
        admm_cfg.sigma0 = 1.0;
        admm_cfg.tol = 1e-3;
        admm_cfg.max_iterations = 100;
        let warm = dadmm_bpdn_solve(inst, &admm_cfg);
        let x0 = BpdnPrimalPoint {
            s: warm.s,
            t: warm.t,
        }
        .stacked();
        let info = WarmStartInfo {
            iterations: warm.report.outer_iterations,
            seconds: warm.report.wall_seconds,
            residual: warm.report.final_residuals.res_max(),
        };
        (InitialPoint::warm(warm.y, x0), Some(info))
    } else {
        (InitialPoint::origin(m, n + m), None)
    };

    let residual_fn = |state: &crate::solver::RipalmState| -> KktResiduals {
        residuals::kkt_residuals_parts(inst, &state.x[..n], &state.x[n..], &state.y)
    };
    let (state, report) = ripalm_solve(&oracle, cfg, ssn_cfg, residual_fn, init)?;

    Ok(BpdnSolution {
        primal: BpdnPrimalPoint::from_stacked(&state.x, n),
        dual: state.y,
        report,
        warm_start: warm_info,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instance_validation() {
        let d = DenseMatrix::zeros(2, 3);
        assert!(BpdnInstance::new(d.clone(), DenseVector::zeros(2), 1.0).is_ok());
        assert!(matches!(
            BpdnInstance::new(d.clone(), DenseVector::zeros(3), 1.0),
            Err(BpdnError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            BpdnInstance::new(d, DenseVector::zeros(2), 0.0),
            Err(BpdnError::BadNoiseBound(_))
        ));
    }
}
