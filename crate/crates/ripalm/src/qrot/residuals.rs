//! Relative KKT residuals and duality gap for QROT, the solver's
//! self-certification layer.

use crate::numerics::{dot, norm2, DenseMatrix};
use crate::solver::KktResiduals;

use super::{QrotDualPoint, QrotInstance};

/// `pobj(X) = (lambda/2) ||X||_F^2 + <C, X>`. The nonnegativity indicator is
/// not folded in; negativity is reported through the primal residual instead.
pub fn primal_objective(inst: &QrotInstance, x: &[f64]) -> f64 {
    let c = inst.cost().data();
    let quad: f64 = dot(x, x);
    0.5 * inst.lambda() * quad + dot(c, x)
}

/// `dobj(u, v) = -f_q*(u 1^T + 1 v^T) + alpha^T u + beta^T v` with
/// `f_q*(Z) = ||Pi_+(Z - C)||_F^2 / (2 lambda)` for `lambda > 0`. For
/// `lambda = 0` the conjugate degenerates to the indicator of `Z <= C`; the
/// linear part is returned and the violation shows up in the dual residual.
pub fn dual_objective(inst: &QrotInstance, u: &[f64], v: &[f64]) -> f64 {
    let lin = dot(u, inst.alpha()) + dot(v, inst.beta());
    if inst.lambda() == 0.0 {
        return lin;
    }
    let c = inst.cost();
    let n = inst.n();
    let mut sq = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        let crow = c.row(i);
        for j in 0..n {
            let z = (ui + v[j] - crow[j]).max(0.0);
            sq += z * z;
        }
    }
    lin - sq / (2.0 * inst.lambda())
}

/// Relative KKT residuals at `(u, v, X)`:
///
/// * primal: marginal violations and negativity of `X`,
/// * dual: negativity of `Z = C + lambda X - u 1^T - 1 v^T`,
/// * complementarity: `|<X, Z>|`,
/// * gap: relative primal-dual objective gap.
///
/// The overall `Delta_res` is `KktResiduals::res_max`.
pub fn kkt_residuals_qrot(
    inst: &QrotInstance,
    point: &QrotDualPoint,
    x: &DenseMatrix,
) -> KktResiduals {
    kkt_residuals_parts(inst, &point.u, &point.v, x.data())
}

pub(crate) fn kkt_residuals_parts(
    inst: &QrotInstance,
    u: &[f64],
    v: &[f64],
    x: &[f64],
) -> KktResiduals {
    let (m, n) = (inst.m(), inst.n());
    debug_assert_eq!(x.len(), m * n);
    let c = inst.cost();
    let lambda = inst.lambda();

    let mut row_sums = vec![0.0; m];
    let mut col_sums = vec![0.0; n];
    let mut x_neg_sq = 0.0;
    let mut x_sq = 0.0;
    let mut z_neg_sq = 0.0;
    let mut xz = 0.0;
    for i in 0..m {
        let xrow = &x[i * n..(i + 1) * n];
        let crow = c.row(i);
        let ui = u[i];
        let mut rs = 0.0;
        for j in 0..n {
            let xij = xrow[j];
            rs += xij;
            col_sums[j] += xij;
            x_sq += xij * xij;
            let neg = xij.min(0.0);
            x_neg_sq += neg * neg;
            let zij = crow[j] + lambda * xij - ui - v[j];
            let zneg = zij.min(0.0);
            z_neg_sq += zneg * zneg;
            xz += xij * zij;
        }
        row_sums[i] = rs;
    }

    let alpha = inst.alpha();
    let beta = inst.beta();
    let row_err = norm2(
        &row_sums
            .iter()
            .zip(alpha.iter())
            .map(|(r, a)| r - a)
            .collect::<Vec<_>>(),
    );
    let col_err = norm2(
        &col_sums
            .iter()
            .zip(beta.iter())
            .map(|(r, b)| r - b)
            .collect::<Vec<_>>(),
    );
    let primal = (row_err / (1.0 + alpha.norm2()))
        .max(col_err / (1.0 + beta.norm2()))
        .max(x_neg_sq.sqrt() / (1.0 + x_sq.sqrt()));

    let cost_norm = c.frob_norm();
    let dual = z_neg_sq.sqrt() / (1.0 + cost_norm);
    let comp = xz.abs() / (1.0 + cost_norm);

    let pobj = primal_objective(inst, x);
    let dobj = dual_objective(inst, u, v);
    let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());

    KktResiduals {
        primal,
        dual,
        complementarity: Some(comp),
        gap,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::DenseVector;

    /// 2x2 symmetric instance solved by hand: alpha = beta = (1/2, 1/2),
    /// C = 0, lambda = 1. The minimum-norm feasible plan X* = 0.25 * ones is
    /// optimal with potentials u = v = (0.125, 0.125), making Z identically 0.
    fn hand_solved() -> (QrotInstance, QrotDualPoint, DenseMatrix) {
        let inst = QrotInstance::new(
            DenseMatrix::zeros(2, 2),
            DenseVector(vec![0.5, 0.5]),
            DenseVector(vec![0.5, 0.5]),
            1.0,
        )
        .unwrap();
        let point = QrotDualPoint {
            u: DenseVector(vec![0.125, 0.125]),
            v: DenseVector(vec![0.125, 0.125]),
        };
        let x = DenseMatrix::from_vec(2, 2, vec![0.25; 4]);
        (inst, point, x)
    }

    #[test]
    fn zero_residuals_at_hand_solved_optimum() {
        let (inst, point, x) = hand_solved();
        let r = kkt_residuals_qrot(&inst, &point, &x);
        assert!(r.primal < 1e-15);
        assert!(r.dual < 1e-15);
        assert!(r.complementarity.unwrap() < 1e-15);
        assert!(r.gap < 1e-15);
        assert!(r.res_max() < 1e-15);
    }

    #[test]
    fn negative_plan_entry_shows_in_primal() {
        let (inst, point, mut x) = hand_solved();
        x.set(0, 0, -0.1);
        let r = kkt_residuals_qrot(&inst, &point, &x);
        assert!(r.primal > 0.0);
    }

    #[test]
    fn denominators_follow_the_formulas() {
        // Doubling C doubles <X, Z>'s cost contribution, but dual and
        // complementarity residuals are normalized by 1 + ||C||_F literally.
        let inst = QrotInstance::new(
            DenseMatrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]),
            DenseVector(vec![0.5, 0.5]),
            DenseVector(vec![0.5, 0.5]),
            1.0,
        )
        .unwrap();
        let point = QrotDualPoint {
            u: DenseVector(vec![5.0, 5.0]),
            v: DenseVector(vec![5.0, 5.0]),
        };
        let x = DenseMatrix::from_vec(2, 2, vec![0.25; 4]);
        let r = kkt_residuals_qrot(&inst, &point, &x);

        // Recompute by the displayed formulas.
        let cnorm = inst.cost().frob_norm();
        let mut zneg = 0.0f64;
        let mut xz = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                let z = inst.cost().get(i, j) + x.get(i, j) - 10.0;
                zneg += z.min(0.0).powi(2);
                xz += x.get(i, j) * z;
            }
        }
        assert!((r.dual - zneg.sqrt() / (1.0 + cnorm)).abs() < 1e-15);
        assert!((r.complementarity.unwrap() - xz.abs() / (1.0 + cnorm)).abs() < 1e-15);

        let pobj = primal_objective(&inst, x.data());
        let dobj = dual_objective(&inst, &point.u, &point.v);
        assert!((r.gap - (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs())).abs() < 1e-15);
    }
}
