//! Proximal maps and dual subproblem oracles for BPDN.

use crate::numerics::{dot, norm2, norm2_sq, DenseVector, NumericsError};
use crate::solver::{ProblemOracle, SubproblemContext, SubsolveOutcome};
use crate::ssn::{ssn_solve, SsnConfig, SsnError, SubproblemOracle};

use super::newton::{assemble_newton_system, solve_newton_bpdn};
use super::BpdnInstance;

/// Soft threshold: `prox_{sigma ||.||_1}(u)_i = sign(u_i) max(|u_i| - sigma, 0)`.
pub fn prox_l1(u: &[f64], sigma: f64) -> DenseVector {
    debug_assert!(sigma > 0.0);
    DenseVector(
        u.iter()
            .map(|&x| x.signum() * (x.abs() - sigma).max(0.0))
            .collect(),
    )
}

/// Projection onto the Euclidean ball of radius `kappa_hat`.
pub fn proj_l2ball(v: &[f64], kappa_hat: f64) -> DenseVector {
    debug_assert!(kappa_hat > 0.0);
    let nv = norm2(v);
    if nv <= kappa_hat {
        DenseVector(v.to_vec())
    } else {
        let f = kappa_hat / nv;
        DenseVector(v.iter().map(|&x| f * x).collect())
    }
}

/// Subproblem objective `Phi(y)` with proximal center `y_bar` and multipliers
/// `(s_bar, t_bar)`.
///
/// Both Moreau-envelope differences are evaluated in the expanded form
/// `<p, z>/sigma - ||p||^2/(2 sigma) - f(p)`, avoiding the cancellation of
/// `O(sigma)` terms that would swamp line-search value differences at large
/// penalty parameters.
#[allow(clippy::too_many_arguments)]
pub fn phi_value(
    inst: &BpdnInstance,
    y: &[f64],
    s_bar: &[f64],
    t_bar: &[f64],
    y_bar: &[f64],
    sigma: f64,
    tau: f64,
) -> f64 {
    let mut dty = vec![0.0; inst.n()];
    inst.dict().matvec_t_into(y, &mut dty);
    // l1 block: p = soft(s_bar + sigma D^T y, sigma).
    let mut l1_part = 0.0;
    for (sb, d) in s_bar.iter().zip(&dty) {
        let u = sb + sigma * d;
        let p = u.signum() * (u.abs() - sigma).max(0.0);
        l1_part += p * (sb / sigma + d) - p * p / (2.0 * sigma) - p.abs();
    }
    let sbar_sq = norm2_sq(s_bar);

    // Ball block: pv = Pi_ball(t_bar - sigma y).
    let v: Vec<f64> = t_bar.iter().zip(y).map(|(t, yi)| t - sigma * yi).collect();
    let pv = proj_l2ball(&v, inst.kappa_hat());
    let mut ball_part = 0.0;
    for (i, &pvi) in pv.iter().enumerate() {
        ball_part += pvi * (t_bar[i] / sigma - y[i]) - pvi * pvi / (2.0 * sigma);
    }
    let tbar_sq = norm2_sq(t_bar);

    let y_dist: f64 = y
        .iter()
        .zip(y_bar)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();

    -dot(inst.rhs(), y) + l1_part - sbar_sq / (2.0 * sigma) + ball_part
        - tbar_sq / (2.0 * sigma)
        + tau / (2.0 * sigma) * y_dist
}

/// Gradient of `Phi`:
/// `D prox_{sigma ||.||_1}(s_bar + sigma D^T y) - Pi_ball(t_bar - sigma y)
///  - b + (tau/sigma)(y - y_bar)`.
#[allow(clippy::too_many_arguments)]
pub fn grad_phi(
    inst: &BpdnInstance,
    y: &[f64],
    s_bar: &[f64],
    t_bar: &[f64],
    y_bar: &[f64],
    sigma: f64,
    tau: f64,
) -> DenseVector {
    let mut dty = vec![0.0; inst.n()];
    inst.dict().matvec_t_into(y, &mut dty);
    let u: Vec<f64> = s_bar
        .iter()
        .zip(&dty)
        .map(|(s, d)| s + sigma * d)
        .collect();
    let p = prox_l1(&u, sigma);
    let v: Vec<f64> = t_bar.iter().zip(y).map(|(t, yi)| t - sigma * yi).collect();
    let pv = proj_l2ball(&v, inst.kappa_hat());

    let mut g = inst.dict().matvec(&p);
    let ratio = tau / sigma;
    for i in 0..inst.m() {
        g[i] += -pv[i] - inst.rhs()[i] + ratio * (y[i] - y_bar[i]);
    }
    g
}

/// BPDN as the generic dual problem: `x = (s; t)`, `A x = D s - t`,
/// `A^T y = (D^T y; -y)`, `prox_{sigma f}` acts as soft threshold on the `s`
/// block and ball projection on the `t` block.
pub struct BpdnOracle<'a> {
    inst: &'a BpdnInstance,
}

impl<'a> BpdnOracle<'a> {
    pub fn new(inst: &'a BpdnInstance) -> Self {
        BpdnOracle { inst }
    }
}

impl ProblemOracle for BpdnOracle<'_> {
    fn dual_dim(&self) -> usize {
        self.inst.m()
    }

    fn primal_dim(&self) -> usize {
        self.inst.n() + self.inst.m()
    }

    fn apply_a(&self, x: &DenseVector) -> DenseVector {
        let n = self.inst.n();
        let (s, t) = x.split_at(n);
        let mut out = self.inst.dict().matvec(s);
        for (o, ti) in out.iter_mut().zip(t) {
            *o -= ti;
        }
        out
    }

    fn apply_at(&self, y: &DenseVector) -> DenseVector {
        let mut out = vec![0.0; self.inst.n() + self.inst.m()];
        let (s, t) = out.split_at_mut(self.inst.n());
        self.inst.dict().matvec_t_into(y, s);
        for (ti, yi) in t.iter_mut().zip(y.iter()) {
            *ti = -yi;
        }
        DenseVector(out)
    }

    fn prox_f(&self, z: &DenseVector, sigma: f64) -> DenseVector {
        let n = self.inst.n();
        let (zs, zt) = z.split_at(n);
        let mut out = prox_l1(zs, sigma).0;
        out.extend_from_slice(&proj_l2ball(zt, self.inst.kappa_hat()));
        DenseVector(out)
    }

    fn b(&self) -> &DenseVector {
        self.inst.rhs()
    }

    fn subsolve(
        &self,
        ctx: &SubproblemContext<'_>,
        accept: &mut dyn FnMut(&DenseVector, &DenseVector) -> bool,
        cfg: &SsnConfig,
    ) -> Result<SubsolveOutcome, SsnError> {
        let sub = BpdnSubproblem::new(self.inst, ctx);
        let out = ssn_solve(&sub, ctx.y_center, accept, cfg)?;
        Ok(SubsolveOutcome {
            y: out.y,
            iterations: out.iterations,
        })
    }
}

/// One outer iteration's subproblem `min Phi(y)` seen by the SSN solver.
pub struct BpdnSubproblem<'a> {
    inst: &'a BpdnInstance,
    s_bar: &'a [f64],
    t_bar: &'a [f64],
    y_bar: &'a DenseVector,
    sigma: f64,
    tau: f64,
}

impl<'a> BpdnSubproblem<'a> {
    pub fn new(inst: &'a BpdnInstance, ctx: &SubproblemContext<'a>) -> Self {
        let n = inst.n();
        let (s_bar, t_bar) = ctx.x.split_at(n);
        BpdnSubproblem {
            inst,
            s_bar,
            t_bar,
            y_bar: ctx.y_center,
            sigma: ctx.sigma,
            tau: ctx.tau,
        }
    }
}

impl SubproblemOracle for BpdnSubproblem<'_> {
    fn dim(&self) -> usize {
        self.inst.m()
    }

    fn value(&self, y: &DenseVector) -> f64 {
        phi_value(
            self.inst, y, self.s_bar, self.t_bar, self.y_bar, self.sigma, self.tau,
        )
    }

    fn gradient(&self, y: &DenseVector) -> DenseVector {
        grad_phi(
            self.inst, y, self.s_bar, self.t_bar, self.y_bar, self.sigma, self.tau,
        )
    }

    fn newton_solve(
        &self,
        y: &DenseVector,
        grad: &DenseVector,
        _tol: f64,
    ) -> Result<DenseVector, NumericsError> {
        // The active-set direct solve is near-exact regardless of the
        // requested inexactness, so the looser SSN tolerance is ignored.
        let sys = assemble_newton_system(self.inst, y, self.s_bar, self.t_bar, self.sigma, self.tau);
        solve_newton_bpdn(&sys, self.inst, grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::DenseMatrix;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy_instance(m: usize, n: usize, kappa: f64, seed: u64) -> BpdnInstance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = DenseMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
        let b = DenseVector((0..m).map(|_| rng.gen_range(-1.0..1.0)).collect());
        BpdnInstance::new(d, b, kappa).unwrap()
    }

    #[test]
    fn prox_l1_examples() {
        assert_eq!(&prox_l1(&[0.0, 0.0], 1.0)[..], &[0.0, 0.0]);
        assert_eq!(&prox_l1(&[3.0, -0.5], 1.0)[..], &[2.0, 0.0]);
    }

    #[test]
    fn prox_l1_against_scalar_grid_oracle() {
        // prox minimizes sigma|x| + (x-u)^2/2 per entry; brute-force the
        // scalar problem on a fine grid.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let u: f64 = rng.gen_range(-4.0..4.0);
            let sigma: f64 = rng.gen_range(0.1..2.0);
            let p = prox_l1(&[u], sigma)[0];
            let objective = |x: f64| sigma * x.abs() + 0.5 * (x - u) * (x - u);
            let mut best = f64::INFINITY;
            let mut best_x = 0.0;
            let mut x = -5.0;
            while x <= 5.0 {
                let f = objective(x);
                if f < best {
                    best = f;
                    best_x = x;
                }
                x += 1e-4;
            }
            assert!((p - best_x).abs() < 1e-3, "u={u} sigma={sigma}");
            assert!(objective(p) <= best + 1e-9);
        }
    }

    #[test]
    fn proj_ball_examples() {
        let inside = proj_l2ball(&[0.1, -0.2], 1.0);
        assert_eq!(&inside[..], &[0.1, -0.2]);
        let projected = proj_l2ball(&[3.0, 4.0], 1.0);
        assert_relative_eq!(projected[0], 0.6, epsilon = 1e-15);
        assert_relative_eq!(projected[1], 0.8, epsilon = 1e-15);
        // Idempotence.
        let twice = proj_l2ball(&projected, 1.0);
        assert_eq!(&twice[..], &projected[..]);
    }

    #[test]
    fn moreau_identity_for_ball_projection() {
        // Pi_ball(x) = x - prox_{kappa ||.||_2}(x), with
        // prox_{kappa ||.||}(x) = x * max(1 - kappa/||x||, 0).
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let kappa: f64 = rng.gen_range(0.1..3.0);
            let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let pi = proj_l2ball(&x, kappa);
            let nx = norm2(&x);
            let shrink = (1.0 - kappa / nx).max(0.0);
            for i in 0..5 {
                let prox_norm = x[i] * shrink;
                assert_relative_eq!(pi[i], x[i] - prox_norm, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn grad_phi_hand_example() {
        // D = 0, b = 0, t_bar = 0, y_bar = y: with ||sigma y|| <= kappa the
        // projection returns -sigma y, so the gradient is sigma y.
        let inst = BpdnInstance::new(
            DenseMatrix::zeros(2, 3),
            DenseVector::zeros(2),
            10.0,
        )
        .unwrap();
        let y = [0.3, -0.4];
        let sigma = 2.0;
        let g = grad_phi(&inst, &y, &[0.0; 3], &[0.0; 2], &y, sigma, 5.0);
        assert_relative_eq!(g[0], sigma * y[0], epsilon = 1e-15);
        assert_relative_eq!(g[1], sigma * y[1], epsilon = 1e-15);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let inst = toy_instance(3, 6, 0.8, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let sigma = 0.9;
        let tau = 5.0;
        for _ in 0..5 {
            let s_bar: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let t_bar: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y_bar: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let g = grad_phi(&inst, &y, &s_bar, &t_bar, &y_bar, sigma, tau);
            let h = 1e-6;
            for i in 0..3 {
                let mut yp = y.clone();
                let mut ym = y.clone();
                yp[i] += h;
                ym[i] -= h;
                let fd = (phi_value(&inst, &yp, &s_bar, &t_bar, &y_bar, sigma, tau)
                    - phi_value(&inst, &ym, &s_bar, &t_bar, &y_bar, sigma, tau))
                    / (2.0 * h);
                assert_relative_eq!(g[i], fd, max_relative = 1e-6, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn oracle_adjointness() {
        let inst = toy_instance(4, 7, 1.0, 9);
        let oracle = BpdnOracle::new(&inst);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..10 {
            let x = DenseVector((0..11).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let y = DenseVector((0..4).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let lhs = dot(&oracle.apply_a(&x), &y);
            let rhs = dot(&x, &oracle.apply_at(&y));
            assert!((lhs - rhs).abs() <= 1e-10 * x.norm2() * y.norm2());
        }
    }

    proptest::proptest! {
        #[test]
        fn prox_and_projection_nonexpansive(
            a in proptest::collection::vec(-10.0f64..10.0, 4),
            b in proptest::collection::vec(-10.0f64..10.0, 4),
            sigma in 0.1f64..4.0,
            kappa in 0.1f64..4.0,
        ) {
            let pa = prox_l1(&a, sigma);
            let pb = prox_l1(&b, sigma);
            let dp = pa.minus(&pb).norm2();
            let dz = DenseVector(a.clone()).minus(&b).norm2();
            proptest::prop_assert!(dp <= dz * (1.0 + 1e-12) + 1e-15);

            let qa = proj_l2ball(&a, kappa);
            let qb = proj_l2ball(&b, kappa);
            proptest::prop_assert!(qa.minus(&qb).norm2() <= dz * (1.0 + 1e-12) + 1e-15);
        }
    }
}
