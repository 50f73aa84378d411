//! Quadratically regularized optimal transport (QROT) problem binding.
//!
//! The primal problem is
//!
//! ```text
//! min_X  (lambda/2) ||X||_F^2 + <C, X>
//! s.t.   X 1_n = alpha,  X^T 1_m = beta,  X >= 0,
//! ```
//!
//! solved through its dual in the potentials `(u, v)` with the outer ALM loop
//! and a semismooth Newton subsolver on the structured generalized Jacobian.

mod generate;
mod jacobian;
mod oracle;
mod residuals;

pub use generate::{gen_gaussian_mixture_instance, gen_image_instance};
pub use jacobian::{build_jacobian, newton_direction_qrot, QrotJacobian};
pub use oracle::{grad_psi, prox_fq, psi_value, QrotOracle, QrotSubproblem};
pub use residuals::{dual_objective, kkt_residuals_qrot, primal_objective};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{ibpgm_warmstart, IbpgmError, WarmStartInfo};
use crate::numerics::{DenseMatrix, DenseVector};
use crate::solver::{
    ripalm_solve, InitialPoint, KktResiduals, RipalmConfig, RipalmError, SolveReport,
};
use crate::ssn::SsnConfig;

/// Problem data: nonnegative cost matrix and strictly positive probability
/// marginals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QrotInstance {
    cost: DenseMatrix,
    alpha: DenseVector,
    beta: DenseVector,
    lambda: f64,
}

/// Marginal sums must match 1 to this absolute tolerance.
const MARGINAL_SUM_TOL: f64 = 1e-12;

impl QrotInstance {
    pub fn new(
        cost: DenseMatrix,
        alpha: DenseVector,
        beta: DenseVector,
        lambda: f64,
    ) -> Result<Self, QrotError> {
        if cost.rows() != alpha.len() || cost.cols() != beta.len() {
            return Err(QrotError::DimensionMismatch {
                rows: cost.rows(),
                cols: cost.cols(),
                alpha: alpha.len(),
                beta: beta.len(),
            });
        }
        if lambda < 0.0 || !lambda.is_finite() {
            return Err(QrotError::BadLambda(lambda));
        }
        if let Some((i, &c)) = cost
            .data()
            .iter()
            .enumerate()
            .find(|(_, &c)| c < 0.0 || !c.is_finite())
        {
            return Err(QrotError::NegativeCost { index: i, value: c });
        }
        check_marginal("alpha", &alpha)?;
        check_marginal("beta", &beta)?;
        Ok(QrotInstance {
            cost,
            alpha,
            beta,
            lambda,
        })
    }

    pub fn m(&self) -> usize {
        self.cost.rows()
    }

    pub fn n(&self) -> usize {
        self.cost.cols()
    }

    pub fn cost(&self) -> &DenseMatrix {
        &self.cost
    }

    pub fn alpha(&self) -> &DenseVector {
        &self.alpha
    }

    pub fn beta(&self) -> &DenseVector {
        &self.beta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

fn check_marginal(name: &'static str, w: &DenseVector) -> Result<(), QrotError> {
    if w.iter().any(|&x| x <= 0.0 || !x.is_finite()) {
        return Err(QrotError::NonPositiveMarginal(name));
    }
    let sum: f64 = w.iter().sum();
    if (sum - 1.0).abs() > MARGINAL_SUM_TOL {
        return Err(QrotError::MarginalSum { name, sum });
    }
    Ok(())
}

/// Dual potentials `(u, v)` for the two marginal constraints.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QrotDualPoint {
    pub u: DenseVector,
    pub v: DenseVector,
}

impl QrotDualPoint {
    /// Splits the stacked solver variable `y = (u; v)`.
    pub fn from_stacked(y: &DenseVector, m: usize) -> Self {
        QrotDualPoint {
            u: DenseVector(y[..m].to_vec()),
            v: DenseVector(y[m..].to_vec()),
        }
    }

    pub fn stacked(&self) -> DenseVector {
        let mut y = Vec::with_capacity(self.u.len() + self.v.len());
        y.extend_from_slice(&self.u);
        y.extend_from_slice(&self.v);
        DenseVector(y)
    }
}

#[derive(Debug, Error)]
pub enum QrotError {
    #[error("cost is {rows}x{cols} but marginals have lengths {alpha} and {beta}")]
    DimensionMismatch {
        rows: usize,
        cols: usize,
        alpha: usize,
        beta: usize,
    },
    #[error("regularization parameter must be finite and nonnegative, got {0}")]
    BadLambda(f64),
    #[error("cost entry {index} is negative or non-finite ({value})")]
    NegativeCost { index: usize, value: f64 },
    #[error("{0} must be strictly positive entrywise")]
    NonPositiveMarginal(&'static str),
    #[error("{name} sums to {sum}, expected 1")]
    MarginalSum { name: &'static str, sum: f64 },
    #[error("an input image has zero total mass")]
    ZeroMass,
    #[error("images must share one resolution, got {a_rows}x{a_cols} and {b_rows}x{b_cols}")]
    ResolutionMismatch {
        a_rows: usize,
        a_cols: usize,
        b_rows: usize,
        b_cols: usize,
    },
}

/// Converged transport plan with its dual certificate and solve trace.
#[derive(Debug, Clone)]
pub struct QrotSolution {
    pub plan: DenseMatrix,
    pub dual: QrotDualPoint,
    pub report: SolveReport,
    pub warm_start: Option<WarmStartInfo>,
}

#[derive(Debug, Error)]
pub enum QrotSolveError {
    #[error(transparent)]
    Ripalm(#[from] RipalmError),
    #[error("warm start failed: {0}")]
    WarmStart(#[from] IbpgmError),
}

/// Solves a QROT instance with ripALM. `warm_start` runs the Bregman
/// proximal-gradient/Sinkhorn phase first and starts the outer loop from its
/// approximate primal-dual pair; otherwise everything starts at the origin.
pub fn solve_ripalm(
    inst: &QrotInstance,
    cfg: &RipalmConfig,
    ssn_cfg: &SsnConfig,
    warm_start: bool,
) -> Result<QrotSolution, QrotSolveError> {
    let (m, n) = (inst.m(), inst.n());
    let oracle = QrotOracle::new(inst);
    let (init, warm_info) = if warm_start {
        let warm = ibpgm_warmstart(inst, 500, 1e-3)?;
        let y0 = QrotDualPoint {
            u: warm.u,
            v: warm.v,
        }
        .stacked();
        let x0 = DenseVector(warm.plan.data().to_vec());
        (InitialPoint::warm(y0, x0), Some(warm.info))
    } else {
        (InitialPoint::origin(m + n, m * n), None)
    };

    let residual_fn = |state: &crate::solver::RipalmState| -> KktResiduals {
        residuals::kkt_residuals_parts(inst, &state.y[..m], &state.y[m..], &state.x)
    };
    let (state, report) = ripalm_solve(&oracle, cfg, ssn_cfg, residual_fn, init)?;

    Ok(QrotSolution {
        plan: DenseMatrix::from_vec(m, n, state.x.0.clone()),
        dual: QrotDualPoint::from_stacked(&state.y, m),
        report,
        warm_start: warm_info,
    })
}
