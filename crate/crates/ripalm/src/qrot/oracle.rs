//! Dual augmented Lagrangian oracles for QROT: the proximal mapping of
//! `sigma f_q`, the subproblem objective `Psi` and its gradient, and the
//! trait plumbing that hands the subproblem to the semismooth Newton solver.

use crate::numerics::{dot, norm2_sq, DenseMatrix, DenseVector, NumericsError};
use crate::solver::{ProblemOracle, SubproblemContext, SubsolveOutcome};
use crate::ssn::{ssn_solve, SsnConfig, SsnError, SubproblemOracle};

use super::jacobian::{build_jacobian_from_shifted, newton_direction_qrot};
use super::QrotInstance;

/// `prox_{sigma f_q}(Z) = Pi_+(Z - sigma C) / (1 + lambda sigma)` entrywise.
pub fn prox_fq(z: &DenseMatrix, sigma: f64, inst: &QrotInstance) -> DenseMatrix {
    debug_assert!(sigma > 0.0);
    let inv = 1.0 / (1.0 + inst.lambda() * sigma);
    let mut out = DenseMatrix::zeros(inst.m(), inst.n());
    let c = inst.cost().data();
    for ((o, &zi), &ci) in out.data_mut().iter_mut().zip(z.data()).zip(c) {
        *o = (zi - sigma * ci).max(0.0) * inv;
    }
    out
}

/// The shifted matrix `W(u, v) = Xbar + sigma (u 1^T + 1 v^T - C)` whose
/// positive part drives both the prox and the generalized Jacobian.
fn shifted_matrix(
    inst: &QrotInstance,
    x_bar: &[f64],
    u: &[f64],
    v: &[f64],
    sigma: f64,
) -> DenseMatrix {
    let (m, n) = (inst.m(), inst.n());
    let mut w = DenseMatrix::zeros(m, n);
    let c = inst.cost();
    for i in 0..m {
        let ui = u[i];
        let base = i * n;
        let row = w.row_mut(i);
        let crow = c.row(i);
        for j in 0..n {
            row[j] = x_bar[base + j] + sigma * (ui + v[j] - crow[j]);
        }
    }
    w
}

/// Subproblem objective value `Psi(u, v)` at the given point, with proximal
/// center `(u_bar, v_bar)` and multiplier `Xbar`.
///
/// The Moreau-envelope difference is evaluated in the expanded form
/// `<P, Xbar>/sigma + <P, u (+) v> - ||P||^2/(2 sigma) - f_q(P)`, which is
/// algebraically identical to `||Y||^2/(2 sigma) - M_{sigma f}(Y)` but avoids
/// the cancellation of two `O(sigma)` terms; line searches rely on value
/// differences far below that rounding level once `sigma` is large.
#[allow(clippy::too_many_arguments)]
pub fn psi_value(
    inst: &QrotInstance,
    u: &[f64],
    v: &[f64],
    x_bar: &[f64],
    u_bar: &[f64],
    v_bar: &[f64],
    sigma: f64,
    tau: f64,
) -> f64 {
    let (m, n) = (inst.m(), inst.n());
    let inv = 1.0 / (1.0 + inst.lambda() * sigma);
    let lambda = inst.lambda();

    let mut p_dot_xbar = 0.0;
    let mut p_dot_uv = 0.0;
    let mut p_sq = 0.0;
    let mut c_dot_p = 0.0;
    let mut xbar_sq = 0.0;
    for i in 0..m {
        let ui = u[i];
        let base = i * n;
        let crow = inst.cost().row(i);
        for j in 0..n {
            let xb = x_bar[base + j];
            xbar_sq += xb * xb;
            let wij = xb + sigma * (ui + v[j] - crow[j]);
            if wij > 0.0 {
                let p = wij * inv;
                p_dot_xbar += p * xb;
                p_dot_uv += p * (ui + v[j]);
                p_sq += p * p;
                c_dot_p += crow[j] * p;
            }
        }
    }

    let lin: f64 = dot(u, inst.alpha()) + dot(v, inst.beta());
    let prox_term = {
        let du: f64 = u
            .iter()
            .zip(u_bar)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
        let dv: f64 = v
            .iter()
            .zip(v_bar)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
        tau / (2.0 * sigma) * (du + dv)
    };

    -lin + p_dot_xbar / sigma + p_dot_uv
        - p_sq * (1.0 + lambda * sigma) / (2.0 * sigma)
        - c_dot_p
        - xbar_sq / (2.0 * sigma)
        + prox_term
}

/// Gradient of `Psi`: `(P 1 - alpha + (tau/sigma)(u - u_bar),
/// P^T 1 - beta + (tau/sigma)(v - v_bar))` with `P` the current prox output.
#[allow(clippy::too_many_arguments)]
pub fn grad_psi(
    inst: &QrotInstance,
    u: &[f64],
    v: &[f64],
    x_bar: &[f64],
    u_bar: &[f64],
    v_bar: &[f64],
    sigma: f64,
    tau: f64,
) -> (DenseVector, DenseVector) {
    let (m, n) = (inst.m(), inst.n());
    let w = shifted_matrix(inst, x_bar, u, v, sigma);
    let inv = 1.0 / (1.0 + inst.lambda() * sigma);
    let ratio = tau / sigma;

    let mut gu = vec![0.0; m];
    let mut gv = vec![0.0; n];
    for i in 0..m {
        let row = w.row(i);
        let mut rs = 0.0;
        for (j, &wij) in row.iter().enumerate() {
            if wij > 0.0 {
                let p = wij * inv;
                rs += p;
                gv[j] += p;
            }
        }
        gu[i] = rs - inst.alpha()[i] + ratio * (u[i] - u_bar[i]);
    }
    for j in 0..n {
        gv[j] += -inst.beta()[j] + ratio * (v[j] - v_bar[j]);
    }
    (DenseVector(gu), DenseVector(gv))
}

/// QROT as the generic dual problem: `x = vec(X)` row-major,
/// `y = (u; v)`, `A vec(X) = (X 1; X^T 1)`, `b = (alpha; beta)`.
pub struct QrotOracle<'a> {
    inst: &'a QrotInstance,
    rhs: DenseVector,
}

impl<'a> QrotOracle<'a> {
    pub fn new(inst: &'a QrotInstance) -> Self {
        let mut rhs = Vec::with_capacity(inst.m() + inst.n());
        rhs.extend_from_slice(inst.alpha());
        rhs.extend_from_slice(inst.beta());
        QrotOracle {
            inst,
            rhs: DenseVector(rhs),
        }
    }

    pub fn instance(&self) -> &QrotInstance {
        self.inst
    }
}

impl ProblemOracle for QrotOracle<'_> {
    fn dual_dim(&self) -> usize {
        self.inst.m() + self.inst.n()
    }

    fn primal_dim(&self) -> usize {
        self.inst.m() * self.inst.n()
    }

    fn apply_a(&self, x: &DenseVector) -> DenseVector {
        let (m, n) = (self.inst.m(), self.inst.n());
        debug_assert_eq!(x.len(), m * n);
        let mut out = vec![0.0; m + n];
        for i in 0..m {
            let row = &x[i * n..(i + 1) * n];
            out[i] = row.iter().sum();
            for (j, &xij) in row.iter().enumerate() {
                out[m + j] += xij;
            }
        }
        DenseVector(out)
    }

    fn apply_at(&self, y: &DenseVector) -> DenseVector {
        let (m, n) = (self.inst.m(), self.inst.n());
        debug_assert_eq!(y.len(), m + n);
        let (u, v) = y.split_at(m);
        let mut out = Vec::with_capacity(m * n);
        for &ui in u {
            for &vj in v {
                out.push(ui + vj);
            }
        }
        DenseVector(out)
    }

    fn prox_f(&self, z: &DenseVector, sigma: f64) -> DenseVector {
        let inv = 1.0 / (1.0 + self.inst.lambda() * sigma);
        let c = self.inst.cost().data();
        DenseVector(
            z.iter()
                .zip(c)
                .map(|(&zi, &ci)| (zi - sigma * ci).max(0.0) * inv)
                .collect(),
        )
    }

    fn b(&self) -> &DenseVector {
        &self.rhs
    }

    fn subsolve(
        &self,
        ctx: &SubproblemContext<'_>,
        accept: &mut dyn FnMut(&DenseVector, &DenseVector) -> bool,
        cfg: &SsnConfig,
    ) -> Result<SubsolveOutcome, SsnError> {
        let sub = QrotSubproblem::new(self.inst, ctx);
        let out = ssn_solve(&sub, ctx.y_center, accept, cfg)?;
        Ok(SubsolveOutcome {
            y: out.y,
            iterations: out.iterations,
        })
    }
}

/// One outer iteration's subproblem `min Psi(u, v)` seen by the SSN solver.
pub struct QrotSubproblem<'a> {
    inst: &'a QrotInstance,
    x_bar: &'a DenseVector,
    y_bar: &'a DenseVector,
    sigma: f64,
    tau: f64,
}

impl<'a> QrotSubproblem<'a> {
    pub fn new(inst: &'a QrotInstance, ctx: &SubproblemContext<'a>) -> Self {
        QrotSubproblem {
            inst,
            x_bar: ctx.x,
            y_bar: ctx.y_center,
            sigma: ctx.sigma,
            tau: ctx.tau,
        }
    }
}

impl SubproblemOracle for QrotSubproblem<'_> {
    fn dim(&self) -> usize {
        self.inst.m() + self.inst.n()
    }

    fn value(&self, y: &DenseVector) -> f64 {
        let m = self.inst.m();
        let (u, v) = y.split_at(m);
        let (u_bar, v_bar) = self.y_bar.split_at(m);
        psi_value(
            self.inst, u, v, self.x_bar, u_bar, v_bar, self.sigma, self.tau,
        )
    }

    fn gradient(&self, y: &DenseVector) -> DenseVector {
        let m = self.inst.m();
        let (u, v) = y.split_at(m);
        let (u_bar, v_bar) = self.y_bar.split_at(m);
        let (gu, gv) = grad_psi(
            self.inst, u, v, self.x_bar, u_bar, v_bar, self.sigma, self.tau,
        );
        let mut g = gu.0;
        g.extend_from_slice(&gv);
        DenseVector(g)
    }

    fn newton_solve(
        &self,
        y: &DenseVector,
        grad: &DenseVector,
        tol: f64,
    ) -> Result<DenseVector, NumericsError> {
        let m = self.inst.m();
        let (u, v) = y.split_at(m);
        let w = shifted_matrix(self.inst, self.x_bar, u, v, self.sigma);
        let jac = build_jacobian_from_shifted(self.inst, &w, self.sigma, self.tau);
        newton_direction_qrot(&jac, grad, tol)
    }
}
