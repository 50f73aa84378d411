//! Dual ADMM for BPDN.
//!
//! Applies ADMM to the dual reformulation
//! `min indicator(||u||_inf <= 1) + kappa_hat ||v|| - b^T y` subject to
//! `D^T y = u`, `-y = v`. Both split subproblems have closed forms; the `y`
//! step solves the fixed SPD system `(D D^T + I) y = rhs`, factored once.
//! The multipliers `(s, t)` converge to the lifted primal solution.

use std::time::Instant;

use crate::bpdn::{kkt_residuals_bpdn, proj_l2ball, BpdnInstance, BpdnPrimalPoint};
use crate::numerics::{norm2_sq, CholeskyFactor, DenseVector};
use crate::solver::{IterationRecord, KktResiduals, SolveReport, SolveStatus};

use super::{adapt_penalty, AdmmConfig};

#[derive(Debug, Clone)]
pub struct DadmmBpdnState {
    pub u: DenseVector,
    pub v: DenseVector,
    pub y: DenseVector,
    pub s: DenseVector,
    pub t: DenseVector,
    pub sigma: f64,
}

impl DadmmBpdnState {
    pub fn zeros(inst: &BpdnInstance, sigma: f64) -> Self {
        DadmmBpdnState {
            u: DenseVector::zeros(inst.n()),
            v: DenseVector::zeros(inst.m()),
            y: DenseVector::zeros(inst.m()),
            s: DenseVector::zeros(inst.n()),
            t: DenseVector::zeros(inst.m()),
            sigma,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AdmmStepInfo {
    pub r_primal: f64,
    pub r_dual: f64,
    /// Residual of the `y`-step linear system after the solve.
    pub system_residual: f64,
}

/// One ADMM sweep. `factor` is the cached Cholesky factorization of
/// `D D^T + I`, which does not depend on the penalty parameter.
pub fn dadmm_bpdn_step(
    inst: &BpdnInstance,
    state: &mut DadmmBpdnState,
    cfg: &AdmmConfig,
    factor: &CholeskyFactor,
) -> AdmmStepInfo {
    let (m, n) = (inst.m(), inst.n());
    let sigma = state.sigma;
    let inv_sigma = 1.0 / sigma;

    // u = Pi_{B_inf}(D^T y + s / sigma): entrywise clamp to [-1, 1].
    let mut dty = vec![0.0; n];
    inst.dict().matvec_t_into(&state.y, &mut dty);
    for i in 0..n {
        state.u[i] = (dty[i] + inv_sigma * state.s[i]).clamp(-1.0, 1.0);
    }

    // sigma v = (t - sigma y) - Pi_ball(t - sigma y).
    let tv: Vec<f64> = state
        .t
        .iter()
        .zip(state.y.iter())
        .map(|(t, y)| t - sigma * y)
        .collect();
    let pv = proj_l2ball(&tv, inst.kappa_hat());
    for i in 0..m {
        state.v[i] = inv_sigma * (tv[i] - pv[i]);
    }

    // (D D^T + I) y = (b - D(s - sigma u) + (t - sigma v)) / sigma.
    let su: Vec<f64> = state
        .s
        .iter()
        .zip(state.u.iter())
        .map(|(s, u)| s - sigma * u)
        .collect();
    let dsu = inst.dict().matvec(&su);
    let rhs: Vec<f64> = (0..m)
        .map(|i| inv_sigma * (inst.rhs()[i] - dsu[i] + (state.t[i] - sigma * state.v[i])))
        .collect();
    let y_old = std::mem::replace(&mut state.y, factor.solve(&rhs));

    // System residual (D D^T + I) y - rhs, via two matvecs.
    let dty_new = inst.dict().matvec_t(&state.y);
    let ddty = inst.dict().matvec(&dty_new);
    let mut sys_sq = 0.0;
    for i in 0..m {
        let r = ddty[i] + state.y[i] - rhs[i];
        sys_sq += r * r;
    }

    // Multiplier updates with step cfg.step * sigma.
    let step = cfg.step * sigma;
    let mut r_primal_sq = 0.0;
    for i in 0..n {
        let r = dty_new[i] - state.u[i];
        r_primal_sq += r * r;
        state.s[i] += step * r;
    }
    for i in 0..m {
        let r = -state.y[i] - state.v[i];
        r_primal_sq += r * r;
        state.t[i] += step * r;
    }

    // Dual residual from the y change: sigma * ||(D^T dy; dy)||.
    let dy: Vec<f64> = state
        .y
        .iter()
        .zip(y_old.iter())
        .map(|(a, b)| a - b)
        .collect();
    let dtdy = inst.dict().matvec_t(&dy);
    let r_dual = sigma * (norm2_sq(&dtdy) + norm2_sq(&dy)).sqrt();

    AdmmStepInfo {
        r_primal: r_primal_sq.sqrt(),
        r_dual,
        system_residual: sys_sq.sqrt(),
    }
}

pub struct DadmmBpdnOutput {
    pub s: DenseVector,
    pub t: DenseVector,
    pub y: DenseVector,
    pub report: SolveReport,
}

/// Builds the cached factorization of `D D^T + I`.
pub fn factor_normal_matrix(inst: &BpdnInstance) -> CholeskyFactor {
    let mut k = inst.dict().gram_rows();
    k.add_diagonal(1.0);
    CholeskyFactor::new_unchecked(&k).expect("D D^T + I is positive definite")
}

/// Runs dual ADMM from the origin until `Delta_res < cfg.tol` or the
/// iteration cap.
pub fn dadmm_bpdn_solve(inst: &BpdnInstance, cfg: &AdmmConfig) -> DadmmBpdnOutput {
    let start = Instant::now();
    let factor = factor_normal_matrix(inst);
    let mut state = DadmmBpdnState::zeros(inst, cfg.sigma0);
    let mut records = Vec::new();
    let mut status = SolveStatus::MaxIterations;
    let mut last = kkt_residuals(inst, &state);
    let mut outer = 0;

    if last.res_max() < cfg.tol {
        status = SolveStatus::Converged;
    } else {
        for k in 1..=cfg.max_iterations {
            let info = dadmm_bpdn_step(inst, &mut state, cfg, &factor);
            outer = k;
            if k % cfg.adapt.period == 0 {
                state.sigma = adapt_penalty(state.sigma, info.r_primal, info.r_dual, &cfg.adapt);
            }
            if k % cfg.check_every == 0 || k == cfg.max_iterations {
                last = kkt_residuals(inst, &state);
                records.push(IterationRecord {
                    k,
                    sigma: state.sigma,
                    tau: cfg.step,
                    inner_iterations: 0,
                    criterion_lhs: None,
                    criterion_rhs: None,
                    residuals: last,
                });
                if last.res_max() < cfg.tol {
                    status = SolveStatus::Converged;
                    break;
                }
            }
        }
    }

    let report = SolveReport {
        status,
        outer_iterations: outer,
        total_inner_iterations: 0,
        final_residuals: last,
        wall_seconds: start.elapsed().as_secs_f64(),
        iterations: records,
    };
    DadmmBpdnOutput {
        s: state.s,
        t: state.t,
        y: state.y,
        report,
    }
}

fn kkt_residuals(inst: &BpdnInstance, state: &DadmmBpdnState) -> KktResiduals {
    let point = BpdnPrimalPoint {
        s: state.s.clone(),
        t: state.t.clone(),
    };
    kkt_residuals_bpdn(inst, &point, &state.y)
}
