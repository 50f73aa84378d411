//! Structured generalized Jacobian of the QROT subproblem gradient and the
//! Newton-direction solver built on it.
//!
//! Every Jacobian element has the form
//!
//! ```text
//! H = (sigma / (1 + lambda sigma)) B Diag(vec(Omega)) B^T + (tau/sigma) I
//! ```
//!
//! with `B = [1_n^T (x) I_m ; I_n (x) 1_m^T]` and `Omega` a 0/1 mask picking
//! the positive entries of the shifted matrix `W`. Expanded into blocks this
//! is
//!
//! ```text
//! H (d_u; d_v) = scale * [ Diag(Omega 1) d_u + Omega d_v
//!                        ; Omega^T d_u + Diag(Omega^T 1) d_v ] + ridge * d
//! ```
//!
//! so only the active-entry index lists are stored; a matvec costs
//! `O(nnz + m + n)`. The ridge keeps `H` positive definite for any mask.

use crate::numerics::{
    norm2, pcg_solve, CholeskyFactor, DenseMatrix, DenseVector, DiagPrecond, LinearOperator,
    NumericsError, DIRECT_SOLVE_MAX_DIM,
};

use super::{QrotDualPoint, QrotInstance};

/// Active-set representation of one generalized Jacobian element.
pub struct QrotJacobian {
    m: usize,
    n: usize,
    /// Active column indices per row (positive entries of W).
    rows: Vec<Vec<u32>>,
    /// Active row indices per column.
    cols: Vec<Vec<u32>>,
    /// `Omega 1_n`
    row_counts: Vec<f64>,
    /// `Omega^T 1_m`
    col_counts: Vec<f64>,
    /// `sigma / (1 + lambda sigma)`
    pub scale: f64,
    /// `tau / sigma`
    pub ridge: f64,
}

/// Chooses the Jacobian element at `(u, v)`: `Omega_ij = 1` iff `W_ij > 0`,
/// with boundary entries mapped to 0.
pub fn build_jacobian(
    inst: &QrotInstance,
    point: &QrotDualPoint,
    x_bar: &DenseMatrix,
    sigma: f64,
    tau: f64,
) -> QrotJacobian {
    let (m, n) = (inst.m(), inst.n());
    let mut w = DenseMatrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            let val = x_bar.get(i, j) + sigma * (point.u[i] + point.v[j] - inst.cost().get(i, j));
            w.set(i, j, val);
        }
    }
    build_jacobian_from_shifted(inst, &w, sigma, tau)
}

/// Same as [`build_jacobian`] when the shifted matrix `W` is already at hand.
pub(crate) fn build_jacobian_from_shifted(
    inst: &QrotInstance,
    w: &DenseMatrix,
    sigma: f64,
    tau: f64,
) -> QrotJacobian {
    let (m, n) = (inst.m(), inst.n());
    let mut rows: Vec<Vec<u32>> = vec![Vec::new(); m];
    let mut cols: Vec<Vec<u32>> = vec![Vec::new(); n];
    for i in 0..m {
        let row = w.row(i);
        let ri = &mut rows[i];
        for (j, &wij) in row.iter().enumerate() {
            if wij > 0.0 {
                ri.push(j as u32);
                cols[j].push(i as u32);
            }
        }
    }
    let row_counts = rows.iter().map(|r| r.len() as f64).collect();
    let col_counts = cols.iter().map(|c| c.len() as f64).collect();
    QrotJacobian {
        m,
        n,
        rows,
        cols,
        row_counts,
        col_counts,
        scale: sigma / (1.0 + inst.lambda() * sigma),
        ridge: tau / sigma,
    }
}

impl QrotJacobian {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(|r| r.len()).sum()
    }

    /// The 0/1 mask as a dense matrix, for oracle comparisons in tests.
    pub fn omega_dense(&self) -> DenseMatrix {
        let mut o = DenseMatrix::zeros(self.m, self.n);
        for (i, row) in self.rows.iter().enumerate() {
            for &j in row {
                o.set(i, j as usize, 1.0);
            }
        }
        o
    }

    /// Diagonal of `H`, used as the PCG preconditioner.
    fn diagonal(&self) -> Vec<f64> {
        let mut d = Vec::with_capacity(self.m + self.n);
        d.extend(self.row_counts.iter().map(|&c| self.scale * c + self.ridge));
        d.extend(self.col_counts.iter().map(|&c| self.scale * c + self.ridge));
        d
    }
}

impl LinearOperator for QrotJacobian {
    fn dim(&self) -> usize {
        self.m + self.n
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let (du, dv) = x.split_at(self.m);
        let (ou, ov) = out.split_at_mut(self.m);
        for (i, o) in ou.iter_mut().enumerate() {
            let mut s = self.row_counts[i] * du[i];
            for &j in &self.rows[i] {
                s += dv[j as usize];
            }
            *o = self.scale * s + self.ridge * du[i];
        }
        for (j, o) in ov.iter_mut().enumerate() {
            let mut s = self.col_counts[j] * dv[j];
            for &i in &self.cols[j] {
                s += du[i as usize];
            }
            *o = self.scale * s + self.ridge * dv[j];
        }
    }
}

/// Direct solver of `H d = r` through the Schur complement of the smaller
/// diagonal block. `H` has an SPD arrowhead-free 2x2 block structure
/// `[Diag(a_u), scale*Omega; scale*Omega^T, Diag(a_v)]`, so eliminating one
/// side leaves a dense SPD system of dimension `min(m, n)`.
struct SchurSolver<'a> {
    jac: &'a QrotJacobian,
    a_u: Vec<f64>,
    a_v: Vec<f64>,
    factor: CholeskyFactor,
    /// True when the factored (retained) block is the `u` block.
    u_side: bool,
}

impl<'a> SchurSolver<'a> {
    fn new(jac: &'a QrotJacobian) -> Result<Self, NumericsError> {
        let a_u: Vec<f64> = jac
            .row_counts
            .iter()
            .map(|&c| jac.scale * c + jac.ridge)
            .collect();
        let a_v: Vec<f64> = jac
            .col_counts
            .iter()
            .map(|&c| jac.scale * c + jac.ridge)
            .collect();
        let u_side = jac.m <= jac.n;
        let schur = if u_side {
            build_schur(jac.m, &a_u, &a_v, &jac.cols, jac.scale, jac.nnz())
        } else {
            build_schur(jac.n, &a_v, &a_u, &jac.rows, jac.scale, jac.nnz())
        };
        let factor = CholeskyFactor::new_unchecked(&schur)?;
        Ok(SchurSolver {
            jac,
            a_u,
            a_v,
            factor,
            u_side,
        })
    }

    fn solve(&self, r: &[f64]) -> DenseVector {
        let jac = self.jac;
        let (r_u, r_v) = r.split_at(jac.m);
        let mut out = vec![0.0; jac.m + jac.n];
        if self.u_side {
            // rhs_u = r_u - scale * Omega (r_v / a_v)
            let rv_scaled: Vec<f64> = r_v.iter().zip(&self.a_v).map(|(r, a)| r / a).collect();
            let mut rhs = r_u.to_vec();
            for (i, row) in jac.rows.iter().enumerate() {
                let mut s = 0.0;
                for &j in row {
                    s += rv_scaled[j as usize];
                }
                rhs[i] -= jac.scale * s;
            }
            let d_u = self.factor.solve(&rhs);
            // d_v = (r_v - scale * Omega^T d_u) / a_v
            let (ou, ov) = out.split_at_mut(jac.m);
            ou.copy_from_slice(&d_u);
            for (j, col) in jac.cols.iter().enumerate() {
                let mut s = 0.0;
                for &i in col {
                    s += d_u[i as usize];
                }
                ov[j] = (r_v[j] - jac.scale * s) / self.a_v[j];
            }
        } else {
            let ru_scaled: Vec<f64> = r_u.iter().zip(&self.a_u).map(|(r, a)| r / a).collect();
            let mut rhs = r_v.to_vec();
            for (j, col) in jac.cols.iter().enumerate() {
                let mut s = 0.0;
                for &i in col {
                    s += ru_scaled[i as usize];
                }
                rhs[j] -= jac.scale * s;
            }
            let d_v = self.factor.solve(&rhs);
            let (ou, ov) = out.split_at_mut(jac.m);
            ov.copy_from_slice(&d_v);
            for (i, row) in jac.rows.iter().enumerate() {
                let mut s = 0.0;
                for &j in row {
                    s += d_v[j as usize];
                }
                ou[i] = (r_u[i] - jac.scale * s) / self.a_u[i];
            }
        }
        DenseVector(out)
    }
}

/// Schur complement `Diag(a_keep) - scale^2 * Sum_k (1/a_elim[k]) w_k w_k^T`
/// where `w_k` is the 0/1 incidence column of eliminated index `k`. Uses a
/// sparse scatter when the mask is sparse enough, otherwise a dense rank-k
/// update.
fn build_schur(
    dim: usize,
    a_keep: &[f64],
    a_elim: &[f64],
    elim_lists: &[Vec<u32>],
    scale: f64,
    nnz: usize,
) -> DenseMatrix {
    let mut schur = DenseMatrix::zeros(dim, dim);
    for (i, &a) in a_keep.iter().enumerate() {
        schur.set(i, i, a);
    }
    let s2 = scale * scale;
    let scatter_cost: usize = elim_lists.iter().map(|l| l.len() * l.len()).sum();
    let dense_cost = dim * dim * a_elim.len() / 2 + nnz;
    if scatter_cost <= dense_cost / 2 {
        for (k, list) in elim_lists.iter().enumerate() {
            if list.is_empty() {
                continue;
            }
            let w = s2 / a_elim[k];
            for (p, &ip) in list.iter().enumerate() {
                let ip = ip as usize;
                let row = schur.row_mut(ip);
                for &iq in &list[p..] {
                    row[iq as usize] -= w;
                }
            }
        }
        // Mirror the updated upper triangle.
        for i in 0..dim {
            for j in (i + 1)..dim {
                let v = schur.get(i, j);
                schur.set(j, i, v);
            }
        }
    } else {
        // Dense path: G[i][k] = scale / sqrt(a_elim[k]) on active entries,
        // then Schur = Diag - G G^T.
        let mut g = DenseMatrix::zeros(dim, a_elim.len());
        for (k, list) in elim_lists.iter().enumerate() {
            let val = scale / a_elim[k].sqrt();
            for &i in list {
                g.set(i as usize, k, val);
            }
        }
        let gg = g.gram_rows();
        for i in 0..dim {
            for j in 0..dim {
                schur.set(i, j, schur.get(i, j) - gg.get(i, j));
            }
        }
    }
    schur
}

/// Maximum refinement passes when polishing the direct solve against the
/// structured matvec.
const MAX_REFINE: usize = 4;

/// Solves `H d = -g` to `||H d + g|| <= tol`: Schur-complement Cholesky when
/// the system dimension allows a direct factorization, PCG on the structured
/// matvec otherwise.
pub fn newton_direction_qrot(
    jac: &QrotJacobian,
    g: &DenseVector,
    tol: f64,
) -> Result<DenseVector, NumericsError> {
    let dim = jac.dim();
    debug_assert_eq!(g.len(), dim);
    let neg_g: Vec<f64> = g.iter().map(|x| -x).collect();

    if dim <= DIRECT_SOLVE_MAX_DIM {
        let solver = SchurSolver::new(jac)?;
        let mut d = solver.solve(&neg_g);
        let mut residual = vec![0.0; dim];
        for _ in 0..MAX_REFINE {
            jac.apply(&d, &mut residual);
            for (r, &gi) in residual.iter_mut().zip(g.iter()) {
                *r += gi;
            }
            if norm2(&residual) <= tol {
                break;
            }
            residual.iter_mut().for_each(|r| *r = -*r);
            let corr = solver.solve(&residual);
            d.add_scaled(1.0, &corr);
        }
        Ok(d)
    } else {
        let precond = DiagPrecond(jac.diagonal());
        let out = pcg_solve(jac, &neg_g, tol, 20 * dim, Some(&precond))?;
        if !out.converged {
            log::warn!(
                "newton direction PCG hit its iteration cap (residual {:.3e}, tol {:.3e})",
                out.residual_norm,
                tol
            );
        }
        Ok(out.x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::dot;
    use crate::qrot::QrotInstance;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform_instance(m: usize, n: usize, lambda: f64) -> QrotInstance {
        QrotInstance::new(
            DenseMatrix::zeros(m, n),
            DenseVector(vec![1.0 / m as f64; m]),
            DenseVector(vec![1.0 / n as f64; n]),
            lambda,
        )
        .unwrap()
    }

    fn jacobian_from_mask(
        inst: &QrotInstance,
        mask: &DenseMatrix,
        sigma: f64,
        tau: f64,
    ) -> QrotJacobian {
        // Shifted matrix with the requested sign pattern.
        let w = DenseMatrix::from_fn(mask.rows(), mask.cols(), |i, j| {
            if mask.get(i, j) > 0.0 {
                1.0
            } else {
                -1.0
            }
        });
        build_jacobian_from_shifted(inst, &w, sigma, tau)
    }

    /// Independent dense oracle: H = scale * B Diag(vec(Omega)) B^T + ridge I
    /// with B = [1_n^T (x) I_m ; I_n (x) 1_m^T] built entry by entry
    /// (column-major vec indexing).
    fn dense_from_kronecker(omega: &DenseMatrix, scale: f64, ridge: f64) -> DenseMatrix {
        let (m, n) = (omega.rows(), omega.cols());
        let mn = m * n;
        let mut b = DenseMatrix::zeros(m + n, mn);
        for i in 0..m {
            for j in 0..n {
                let col = i + j * m;
                b.set(i, col, 1.0);
                b.set(m + j, col, 1.0);
            }
        }
        let mut h = DenseMatrix::zeros(m + n, m + n);
        for r in 0..m + n {
            for c in 0..m + n {
                let mut s = 0.0;
                for i in 0..m {
                    for j in 0..n {
                        let col = i + j * m;
                        s += b.get(r, col) * omega.get(i, j) * b.get(c, col);
                    }
                }
                h.set(r, c, scale * s);
            }
        }
        h.add_diagonal(ridge);
        h
    }

    #[test]
    fn all_negative_mask_gives_ridge_only() {
        let inst = uniform_instance(2, 3, 1.0);
        let mask = DenseMatrix::zeros(2, 3);
        let jac = jacobian_from_mask(&inst, &mask, 2.0, 5.0);
        let d = vec![1.0, -1.0, 0.5, 2.0, -0.5];
        let out = jac.apply_vec(&d);
        for (o, di) in out.iter().zip(&d) {
            assert!((o - jac.ridge * di).abs() < 1e-15);
        }
    }

    #[test]
    fn all_positive_two_by_two_matches_explicit_blocks() {
        // H = scale * [[2I, 1], [1, 2I]] + ridge I when Omega is all ones.
        let inst = uniform_instance(2, 2, 1.0);
        let mask = DenseMatrix::from_vec(2, 2, vec![1.0; 4]);
        let sigma = 1.5;
        let tau = 5.0;
        let jac = jacobian_from_mask(&inst, &mask, sigma, tau);
        let scale = sigma / (1.0 + sigma);
        let ridge = tau / sigma;
        let d = vec![1.0, 2.0, -1.0, 0.5];
        let out = jac.apply_vec(&d);
        let ones = |a: f64, b: f64| a + b;
        let expect = vec![
            scale * (2.0 * d[0] + ones(d[2], d[3])) + ridge * d[0],
            scale * (2.0 * d[1] + ones(d[2], d[3])) + ridge * d[1],
            scale * (2.0 * d[2] + ones(d[0], d[1])) + ridge * d[2],
            scale * (2.0 * d[3] + ones(d[0], d[1])) + ridge * d[3],
        ];
        for (o, e) in out.iter().zip(&expect) {
            assert!((o - e).abs() < 1e-14);
        }
    }

    #[test]
    fn structured_matvec_matches_kronecker_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let inst = uniform_instance(3, 4, 0.7);
        let sigma = 1.3;
        let tau = 5.0;
        let mask = DenseMatrix::from_fn(3, 4, |_, _| if rng.gen_bool(0.5) { 1.0 } else { 0.0 });
        let jac = jacobian_from_mask(&inst, &mask, sigma, tau);
        let dense = dense_from_kronecker(&jac.omega_dense(), jac.scale, jac.ridge);
        for _ in 0..20 {
            let d: Vec<f64> = (0..7).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let structured = jac.apply_vec(&d);
            let full = dense.matvec(&d);
            for (s, f) in structured.iter().zip(full.iter()) {
                assert!((s - f).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn structured_equals_dense_exhaustive_small() {
        // All instances with m*n <= 100 here via random masks.
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for (m, n) in [(1usize, 1usize), (2, 5), (5, 2), (4, 4), (10, 10), (3, 7)] {
            let inst = uniform_instance(m, n, 0.3);
            for _ in 0..8 {
                let density = rng.gen_range(0.0..=1.0);
                let mask = DenseMatrix::from_fn(m, n, |_, _| {
                    if rng.gen_bool(density) {
                        1.0
                    } else {
                        0.0
                    }
                });
                let jac = jacobian_from_mask(&inst, &mask, rng.gen_range(0.1..5.0), 5.0);
                let dense = dense_from_kronecker(&jac.omega_dense(), jac.scale, jac.ridge);
                let d: Vec<f64> = (0..m + n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let s = jac.apply_vec(&d);
                let f = dense.matvec(&d);
                for (a, b) in s.iter().zip(f.iter()) {
                    assert!((a - b).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn spd_floor_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let inst = uniform_instance(4, 6, 1.0);
        let sigma = 2.0;
        let tau = 5.0;
        let mask = DenseMatrix::from_fn(4, 6, |_, _| if rng.gen_bool(0.4) { 1.0 } else { 0.0 });
        let jac = jacobian_from_mask(&inst, &mask, sigma, tau);
        for _ in 0..100 {
            let d: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let hd = jac.apply_vec(&d);
            let quad = dot(&d, &hd);
            let floor = jac.ridge * dot(&d, &d);
            assert!(quad >= floor * (1.0 - 1e-12));
        }
    }

    #[test]
    fn ridge_only_direction_is_exact() {
        let inst = uniform_instance(3, 3, 1.0);
        let mask = DenseMatrix::zeros(3, 3);
        let sigma = 2.0;
        let tau = 5.0;
        let jac = jacobian_from_mask(&inst, &mask, sigma, tau);
        let g = DenseVector(vec![1.0, -2.0, 0.5, 0.0, 3.0, -1.0]);
        let d = newton_direction_qrot(&jac, &g, 1e-12).unwrap();
        for (di, gi) in d.iter().zip(g.iter()) {
            assert!((di + sigma / tau * gi).abs() < 1e-12);
        }
    }

    #[test]
    fn direction_matches_dense_cholesky() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let inst = uniform_instance(2, 2, 1.0);
        let mask = DenseMatrix::from_vec(2, 2, vec![1.0, 0.0, 1.0, 1.0]);
        let jac = jacobian_from_mask(&inst, &mask, 1.2, 5.0);
        let dense = dense_from_kronecker(&jac.omega_dense(), jac.scale, jac.ridge);
        let g = DenseVector((0..4).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let d = newton_direction_qrot(&jac, &g, 1e-12).unwrap();
        let neg_g = DenseVector(g.iter().map(|x| -x).collect());
        let oracle = crate::numerics::cholesky_solve(&dense, &neg_g).unwrap();
        assert!(d.minus(&oracle).norm2() <= 1e-8);
    }

    #[test]
    fn direction_residual_contract() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..10 {
            let (m, n) = (rng.gen_range(2..8), rng.gen_range(2..8));
            let inst = uniform_instance(m, n, 0.5);
            let mask =
                DenseMatrix::from_fn(m, n, |_, _| if rng.gen_bool(0.5) { 1.0 } else { 0.0 });
            let jac = jacobian_from_mask(&inst, &mask, rng.gen_range(0.5..3.0), 5.0);
            let g = DenseVector((0..m + n).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let tol = 1e-10;
            let d = newton_direction_qrot(&jac, &g, tol).unwrap();
            let mut r = jac.apply_vec(&d);
            for (ri, gi) in r.iter_mut().zip(g.iter()) {
                *ri += gi;
            }
            assert!(norm2(&r) <= tol, "residual {} > {}", norm2(&r), tol);
        }
    }
}
