//! Relative KKT residuals, duality gap, and solution-quality metrics for
//! BPDN.

use crate::numerics::{dot, norm2, DenseVector};
use crate::solver::KktResiduals;

use super::oracle::{prox_l1, proj_l2ball};
use super::{BpdnInstance, BpdnPrimalPoint};

/// `pobj(s, t) = ||s||_1`.
pub fn primal_objective(s: &[f64]) -> f64 {
    s.iter().map(|x| x.abs()).sum()
}

/// `dobj(y) = -kappa_hat ||y|| + b^T y`.
pub fn dual_objective(inst: &BpdnInstance, y: &[f64]) -> f64 {
    -inst.kappa_hat() * norm2(y) + dot(inst.rhs(), y)
}

/// Relative KKT residuals at `(s, t, y)`:
///
/// * primal: `||D s - b - t|| / (1 + ||b||)`,
/// * dual: fixed-point residuals of the two proximal maps over `1 + ||D||_F`,
/// * gap: relative primal-dual objective gap.
pub fn kkt_residuals_bpdn(
    inst: &BpdnInstance,
    point: &BpdnPrimalPoint,
    y: &DenseVector,
) -> KktResiduals {
    kkt_residuals_parts(inst, &point.s, &point.t, y)
}

pub(crate) fn kkt_residuals_parts(
    inst: &BpdnInstance,
    s: &[f64],
    t: &[f64],
    y: &[f64],
) -> KktResiduals {
    let ds = inst.dict().matvec(s);
    let mut infeas = 0.0;
    for i in 0..inst.m() {
        let r = ds[i] - inst.rhs()[i] - t[i];
        infeas += r * r;
    }
    let primal = infeas.sqrt() / (1.0 + inst.rhs().norm2());

    let mut dty = vec![0.0; inst.n()];
    inst.dict().matvec_t_into(y, &mut dty);
    let arg_s: Vec<f64> = s.iter().zip(&dty).map(|(a, b)| a + b).collect();
    let ps = prox_l1(&arg_s, 1.0);
    let arg_t: Vec<f64> = t.iter().zip(y).map(|(a, b)| a - b).collect();
    let pt = proj_l2ball(&arg_t, inst.kappa_hat());
    let mut dual_sq = 0.0;
    for (si, pi) in s.iter().zip(ps.iter()) {
        dual_sq += (si - pi) * (si - pi);
    }
    for (ti, pi) in t.iter().zip(pt.iter()) {
        dual_sq += (ti - pi) * (ti - pi);
    }
    let dual = dual_sq.sqrt() / (1.0 + inst.dict().frob_norm());

    let pobj = primal_objective(s);
    let dobj = dual_objective(inst, y);
    let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());

    KktResiduals {
        primal,
        dual,
        complementarity: None,
        gap,
    }
}

/// Solution-quality pair against a reference signal: relative feasibility
/// residual `max(||D s - b|| - kappa_hat, 0) / (1 + ||b||)` and normalized
/// objective gap `| ||s||_1 - ||s_ref||_1 | / (1 + ||s_ref||_1)`.
pub fn feas_nobj(inst: &BpdnInstance, s: &[f64], s_ref: &[f64]) -> (f64, f64) {
    let ds = inst.dict().matvec(s);
    let r = ds.minus(inst.rhs()).norm2();
    let feas = (r - inst.kappa_hat()).max(0.0) / (1.0 + inst.rhs().norm2());
    let obj = primal_objective(s);
    let obj_ref = primal_objective(s_ref);
    let nobj = (obj - obj_ref).abs() / (1.0 + obj_ref);
    (feas, nobj)
}
