//! Newton systems for the BPDN subproblem.
//!
//! Every generalized Jacobian element has the form
//! `H = sigma (D U D^T + V) + (tau/sigma) I` where `U` is the 0/1 diagonal
//! active-set matrix of the soft threshold and `V` is the Jacobian of the
//! ball projection. Writing `H = sigma K`, the reduced system `K d = -g/sigma`
//! is solved by one of four routes depending on the ball case and on whether
//! `m <= |I|` (factor the m x m matrix directly) or `m > |I|` (reduce to an
//! `|I| x |I|` system with the Sherman-Morrison-Woodbury identity).

use crate::numerics::{
    norm2, pcg_solve, CholeskyFactor, DenseMatrix, DenseVector, DiagPrecond, FnOperator,
    NumericsError, DIRECT_SOLVE_MAX_DIM,
};

use super::BpdnInstance;

/// Ball-projection Jacobian case at `v = t_bar - sigma y`.
#[derive(Debug, Clone, PartialEq)]
pub enum BallCase {
    /// `||v|| <= kappa_hat`: `V = I`.
    Interior,
    /// `||v|| > kappa_hat`: `V = (kappa_hat/||v||)(I - v v^T / ||v||^2)`.
    Exterior,
}

/// One generalized Jacobian element, stored as its active set, ball case and
/// the shift point `v`.
pub struct BpdnNewtonSystem {
    /// Indices with `|u_i| > sigma` (boundary entries map to 0).
    pub active: Vec<usize>,
    pub case: BallCase,
    /// `v = t_bar - sigma y`.
    pub v: DenseVector,
    pub v_norm: f64,
    pub sigma: f64,
    pub tau: f64,
}

/// Selects the Jacobian element at `y`: the soft-threshold active set from
/// `u = s_bar + sigma D^T y` and the ball case from `v = t_bar - sigma y`.
pub fn assemble_newton_system(
    inst: &BpdnInstance,
    y: &[f64],
    s_bar: &[f64],
    t_bar: &[f64],
    sigma: f64,
    tau: f64,
) -> BpdnNewtonSystem {
    let mut dty = vec![0.0; inst.n()];
    inst.dict().matvec_t_into(y, &mut dty);
    let active: Vec<usize> = (0..inst.n())
        .filter(|&i| (s_bar[i] + sigma * dty[i]).abs() > sigma)
        .collect();
    let v: Vec<f64> = t_bar.iter().zip(y).map(|(t, yi)| t - sigma * yi).collect();
    let v = DenseVector(v);
    let v_norm = v.norm2();
    let case = if v_norm <= inst.kappa_hat() {
        BallCase::Interior
    } else {
        BallCase::Exterior
    };
    BpdnNewtonSystem {
        active,
        case,
        v,
        v_norm,
        sigma,
        tau,
    }
}

impl BpdnNewtonSystem {
    /// Applies `H = sigma (D_I D_I^T + V) + (tau/sigma) I` using the active
    /// columns only.
    pub fn apply_h(&self, inst: &BpdnInstance, d: &[f64], out: &mut [f64]) {
        let m = inst.m();
        debug_assert_eq!(d.len(), m);
        // D_I D_I^T d without materializing the submatrix.
        let dict = inst.dict();
        let mut coeff = vec![0.0; self.active.len()];
        for i in 0..m {
            let di = d[i];
            if di == 0.0 {
                continue;
            }
            let row = dict.row(i);
            for (c, &j) in coeff.iter_mut().zip(&self.active) {
                *c += di * row[j];
            }
        }
        for (i, o) in out.iter_mut().enumerate() {
            let row = dict.row(i);
            let mut s = 0.0;
            for (c, &j) in coeff.iter().zip(&self.active) {
                s += c * row[j];
            }
            *o = s;
        }
        match self.case {
            BallCase::Interior => {
                for (o, &di) in out.iter_mut().zip(d) {
                    *o += di;
                }
            }
            BallCase::Exterior => {
                let k = inst.kappa_hat() / self.v_norm;
                let vd = crate::numerics::dot(&self.v, d);
                let c = vd / (self.v_norm * self.v_norm);
                for ((o, &di), &vi) in out.iter_mut().zip(d).zip(self.v.iter()) {
                    *o += k * (di - c * vi);
                }
            }
        }
        let ridge = self.tau / self.sigma;
        for (o, &di) in out.iter_mut().zip(d) {
            *o = self.sigma * *o + ridge * di;
        }
    }
}

/// Closed-form inverse of `B = c1 I - (kappa/||v||^3) v v^T` in the exterior
/// case, where `c1 = kappa/||v|| + tau/sigma^2`.
struct BallInverse {
    c1: f64,
    /// Coefficient of the rank-one term of `B^{-1}`.
    coef: f64,
    v: DenseVector,
}

impl BallInverse {
    fn new(v: &DenseVector, v_norm: f64, kappa: f64, tau: f64, sigma: f64) -> Self {
        let ratio = kappa / v_norm;
        let c1 = ratio + tau / (sigma * sigma);
        // alpha_bar = 1 - (kappa/||v||) / c1 = (tau/sigma^2) / c1 > 0.
        let alpha_bar = 1.0 - ratio / c1;
        let coef = (kappa / (v_norm * v_norm * v_norm)) / (alpha_bar * c1 * c1);
        BallInverse {
            c1,
            coef,
            v: v.clone(),
        }
    }

    fn apply(&self, x: &[f64]) -> DenseVector {
        let vx = crate::numerics::dot(&self.v, x);
        DenseVector(
            x.iter()
                .zip(self.v.iter())
                .map(|(&xi, &vi)| xi / self.c1 + self.coef * vx * vi)
                .collect(),
        )
    }

    /// `B` itself, for tests and dense assembly.
    fn dense(&self, kappa: f64, v_norm: f64) -> DenseMatrix {
        let m = self.v.len();
        let w = kappa / (v_norm * v_norm * v_norm);
        let mut b = DenseMatrix::from_fn(m, m, |i, j| -w * self.v[i] * self.v[j]);
        b.add_diagonal(self.c1);
        b
    }
}

enum ReducedFactor<'a> {
    /// Empty active set, interior ball: `K = gamma_bar I`.
    Scaled { gamma: f64 },
    /// Empty active set, exterior ball: `K = B`.
    BallOnly { binv: BallInverse },
    /// `m <= |I|`: dense Cholesky of the assembled `m x m` matrix.
    Direct { factor: CholeskyFactor },
    /// Case I with `m > |I|`: SMW through `gamma_bar I + D_I^T D_I`.
    SmwInterior {
        d_active: DenseMatrix,
        factor: CholeskyFactor,
        gamma: f64,
    },
    /// Case II with `m > |I|`: SMW through `I + D_I^T B^{-1} D_I`.
    SmwExterior {
        d_active: DenseMatrix,
        factor: CholeskyFactor,
        binv: BallInverse,
    },
    /// Dimension beyond the direct-solve threshold: PCG on the structured
    /// matvec.
    Iterative { sys: &'a BpdnNewtonSystem },
}

struct BpdnNewtonSolver<'a> {
    inst: &'a BpdnInstance,
    sys: &'a BpdnNewtonSystem,
    reduced: ReducedFactor<'a>,
}

impl<'a> BpdnNewtonSolver<'a> {
    fn new(sys: &'a BpdnNewtonSystem, inst: &'a BpdnInstance) -> Result<Self, NumericsError> {
        let m = inst.m();
        let sigma = sys.sigma;
        let tau = sys.tau;
        let kappa = inst.kappa_hat();
        let gamma = (sigma * sigma + tau) / (sigma * sigma);

        let reduced = if m > DIRECT_SOLVE_MAX_DIM {
            ReducedFactor::Iterative { sys }
        } else if sys.active.is_empty() {
            match sys.case {
                BallCase::Interior => ReducedFactor::Scaled { gamma },
                BallCase::Exterior => ReducedFactor::BallOnly {
                    binv: BallInverse::new(&sys.v, sys.v_norm, kappa, tau, sigma),
                },
            }
        } else if m <= sys.active.len() {
            // Factor the m x m matrix directly.
            let d_active = inst.dict().select_columns(&sys.active);
            let mut k = d_active.gram_rows();
            match sys.case {
                BallCase::Interior => k.add_diagonal(gamma),
                BallCase::Exterior => {
                    let binv = BallInverse::new(&sys.v, sys.v_norm, kappa, tau, sigma);
                    let b = binv.dense(kappa, sys.v_norm);
                    for (ki, bi) in k.data_mut().iter_mut().zip(b.data()) {
                        *ki += bi;
                    }
                }
            }
            ReducedFactor::Direct {
                factor: CholeskyFactor::new_unchecked(&k)?,
            }
        } else {
            let d_active = inst.dict().select_columns(&sys.active);
            match sys.case {
                BallCase::Interior => {
                    let mut small = d_active.gram_cols();
                    small.add_diagonal(gamma);
                    ReducedFactor::SmwInterior {
                        factor: CholeskyFactor::new_unchecked(&small)?,
                        d_active,
                        gamma,
                    }
                }
                BallCase::Exterior => {
                    let binv = BallInverse::new(&sys.v, sys.v_norm, kappa, tau, sigma);
                    // S = I + D_I^T B^{-1} D_I
                    //   = I + (1/c1) D_I^T D_I + binv.coef (D_I^T v)(D_I^T v)^T
                    let mut small = d_active.gram_cols();
                    let inv_c1 = 1.0 / binv.c1;
                    for x in small.data_mut() {
                        *x *= inv_c1;
                    }
                    let dtv = d_active.matvec_t(&sys.v);
                    let r = small.rows();
                    for i in 0..r {
                        for j in 0..r {
                            let upd = binv.coef * dtv[i] * dtv[j];
                            small.set(i, j, small.get(i, j) + upd);
                        }
                    }
                    small.add_diagonal(1.0);
                    ReducedFactor::SmwExterior {
                        factor: CholeskyFactor::new_unchecked(&small)?,
                        d_active,
                        binv,
                    }
                }
            }
        };
        Ok(BpdnNewtonSolver { inst, sys, reduced })
    }

    /// Solves `H d = rhs`.
    fn solve(&self, rhs: &[f64]) -> Result<DenseVector, NumericsError> {
        let sigma = self.sys.sigma;
        // H = sigma K: solve the reduced system against rhs/sigma.
        let scaled: Vec<f64> = rhs.iter().map(|x| x / sigma).collect();
        match &self.reduced {
            ReducedFactor::Scaled { gamma } => {
                Ok(DenseVector(scaled.iter().map(|x| x / gamma).collect()))
            }
            ReducedFactor::BallOnly { binv } => Ok(binv.apply(&scaled)),
            ReducedFactor::Direct { factor } => Ok(factor.solve(&scaled)),
            ReducedFactor::SmwInterior {
                d_active,
                factor,
                gamma,
            } => {
                // (D D^T + g I)^{-1} r = (r - D (gI + D^T D)^{-1} D^T r) / g
                let dtr = d_active.matvec_t(&scaled);
                let q = factor.solve(&dtr);
                let dq = d_active.matvec(&q);
                Ok(DenseVector(
                    scaled
                        .iter()
                        .zip(dq.iter())
                        .map(|(r, d)| (r - d) / gamma)
                        .collect(),
                ))
            }
            ReducedFactor::SmwExterior {
                d_active,
                factor,
                binv,
            } => {
                // (B + D D^T)^{-1} r = z - B^{-1} D (I + D^T B^{-1} D)^{-1} D^T z,
                // z = B^{-1} r.
                let z = binv.apply(&scaled);
                let dtz = d_active.matvec_t(&z);
                let q = factor.solve(&dtz);
                let dq = d_active.matvec(&q);
                let bdq = binv.apply(&dq);
                Ok(z.minus(&bdq))
            }
            ReducedFactor::Iterative { sys } => {
                let inst = self.inst;
                let op = FnOperator::new(inst.m(), |x: &[f64], out: &mut [f64]| {
                    sys.apply_h(inst, x, out)
                });
                let mut diag = vec![0.0; inst.m()];
                let ridge = self.sys.tau / sigma;
                let vcase = match self.sys.case {
                    BallCase::Interior => None,
                    BallCase::Exterior => Some(inst.kappa_hat() / self.sys.v_norm),
                };
                for i in 0..inst.m() {
                    let row = inst.dict().row(i);
                    let mut dd = 0.0;
                    for &j in &self.sys.active {
                        dd += row[j] * row[j];
                    }
                    let vii = match vcase {
                        None => 1.0,
                        Some(k) => {
                            k * (1.0
                                - self.sys.v[i] * self.sys.v[i]
                                    / (self.sys.v_norm * self.sys.v_norm))
                        }
                    };
                    diag[i] = sigma * (dd + vii) + ridge;
                }
                let precond = DiagPrecond(diag);
                let tol = 1e-10 * norm2(rhs).max(1.0);
                let out = pcg_solve(&op, rhs, tol, 20 * inst.m(), Some(&precond))?;
                Ok(out.x)
            }
        }
    }
}

/// Refinement passes polishing the SMW solve against the structured residual.
const MAX_REFINE: usize = 4;

/// Solves `H d = -g` with `||H d + g|| <= 1e-10 max(1, ||g||)`.
pub fn solve_newton_bpdn(
    sys: &BpdnNewtonSystem,
    inst: &BpdnInstance,
    g: &DenseVector,
) -> Result<DenseVector, NumericsError> {
    let m = inst.m();
    debug_assert_eq!(g.len(), m);
    let solver = BpdnNewtonSolver::new(sys, inst)?;
    let neg_g: Vec<f64> = g.iter().map(|x| -x).collect();
    let mut d = solver.solve(&neg_g)?;
    let tol = 1e-10 * norm2(g).max(1.0);
    let mut residual = vec![0.0; m];
    for _ in 0..MAX_REFINE {
        sys.apply_h(inst, &d, &mut residual);
        for (r, &gi) in residual.iter_mut().zip(g.iter()) {
            *r += gi;
        }
        if norm2(&residual) <= tol {
            break;
        }
        residual.iter_mut().for_each(|r| *r = -*r);
        let corr = solver.solve(&residual)?;
        d.add_scaled(1.0, &corr);
    }
    Ok(d)
}
