//! Dense Cholesky factorization with forward/backward substitution and one
//! step of iterative refinement, used for every direct SPD solve.

use super::matrix::DenseMatrix;
use super::vector::{dot, norm2, DenseVector};
use super::NumericsError;

/// Relative asymmetry tolerated before a matrix is rejected as non-symmetric.
const SYMMETRY_TOL: f64 = 1e-12;

/// Lower-triangular Cholesky factor `L` with `A = L L^T`, stored row-major.
pub struct CholeskyFactor {
    l: DenseMatrix,
}

impl CholeskyFactor {
    /// Factors a symmetric positive definite matrix. Fails with `NotSpd` on a
    /// non-positive pivot and `NotSymmetric` when the input is asymmetric
    /// beyond `1e-12` relative.
    pub fn new(a: &DenseMatrix) -> Result<Self, NumericsError> {
        let n = a.rows();
        if a.cols() != n {
            return Err(NumericsError::DimensionMismatch(format!(
                "cholesky needs a square matrix, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        let asym = a.asymmetry();
        if asym > SYMMETRY_TOL {
            return Err(NumericsError::NotSymmetric { asymmetry: asym });
        }
        Self::new_unchecked(a)
    }

    /// Same as [`CholeskyFactor::new`] but skips the symmetry scan. For
    /// matrices assembled symmetric by construction.
    pub fn new_unchecked(a: &DenseMatrix) -> Result<Self, NumericsError> {
        let n = a.rows();
        let mut l = DenseMatrix::zeros(n, n);
        // Cholesky-Crout, row by row; the inner sums run over contiguous row
        // prefixes, which is what makes the row-major layout worthwhile.
        for i in 0..n {
            for j in 0..=i {
                let s = {
                    let (li, lj) = (l.row(i), l.row(j));
                    dot(&li[..j], &lj[..j])
                };
                let v = a.get(i, j) - s;
                if i == j {
                    if v <= 0.0 || !v.is_finite() {
                        return Err(NumericsError::NotSpd { index: i, pivot: v });
                    }
                    l.set(i, i, v.sqrt());
                } else {
                    l.set(i, j, v / l.get(j, j));
                }
            }
        }
        Ok(CholeskyFactor { l })
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    /// Solves `A x = rhs` by forward and backward substitution.
    pub fn solve(&self, rhs: &[f64]) -> DenseVector {
        let n = self.dim();
        debug_assert_eq!(rhs.len(), n);
        let mut x = rhs.to_vec();
        // L z = rhs
        for i in 0..n {
            let row = self.l.row(i);
            let s = dot(&row[..i], &x[..i]);
            x[i] = (x[i] - s) / row[i];
        }
        // L^T x = z; iterate columns of L^T as rows of L from the bottom.
        for i in (0..n).rev() {
            let xi = x[i] / self.l.get(i, i);
            x[i] = xi;
            if xi != 0.0 {
                let row = self.l.row(i);
                for (xk, lik) in x[..i].iter_mut().zip(&row[..i]) {
                    *xk -= lik * xi;
                }
            }
        }
        DenseVector(x)
    }

    /// Solve followed by refinement passes against the original matrix until
    /// the relative residual drops below `tol` (or `max_refine` passes).
    pub fn solve_refined(
        &self,
        a: &DenseMatrix,
        rhs: &[f64],
        tol: f64,
        max_refine: usize,
    ) -> DenseVector {
        let mut x = self.solve(rhs);
        let rhs_norm = norm2(rhs).max(f64::MIN_POSITIVE);
        for _ in 0..max_refine {
            let mut r = a.matvec(&x);
            for (ri, bi) in r.iter_mut().zip(rhs) {
                *ri = bi - *ri;
            }
            if norm2(&r) <= tol * rhs_norm {
                break;
            }
            let corr = self.solve(&r);
            x.add_scaled(1.0, &corr);
        }
        x
    }
}

/// Direct SPD solve: factors `a` and returns `x` with
/// `||A x - rhs|| <= 1e-10 ||rhs||`.
pub fn cholesky_solve(a: &DenseMatrix, rhs: &DenseVector) -> Result<DenseVector, NumericsError> {
    let factor = CholeskyFactor::new(a)?;
    Ok(factor.solve_refined(a, rhs, 1e-12, 2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_case() {
        let a = DenseMatrix::identity(3);
        let x = cholesky_solve(&a, &DenseVector(vec![1.0, 2.0, 3.0])).unwrap();
        assert_eq!(&x.0, &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn diagonal_case() {
        let a = DenseMatrix::from_vec(2, 2, vec![2.0, 0.0, 0.0, 4.0]);
        let x = cholesky_solve(&a, &DenseVector(vec![2.0, 8.0])).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn random_spd_residual_within_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = DenseMatrix::from_fn(5, 5, |_, _| rng.gen_range(-1.0..1.0));
        let mut a = m.gram_rows();
        a.add_diagonal(1.0);
        let rhs = DenseVector((0..5).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let x = cholesky_solve(&a, &rhs).unwrap();
        let r = a.matvec(&x).minus(&rhs);
        assert!(r.norm2() <= 1e-10 * rhs.norm2());
    }

    #[test]
    fn rejects_indefinite() {
        let a = DenseMatrix::from_vec(2, 2, vec![1.0, 2.0, 2.0, 1.0]);
        match cholesky_solve(&a, &DenseVector(vec![1.0, 1.0])) {
            Err(NumericsError::NotSpd { .. }) => {}
            other => panic!("expected NotSpd, got {other:?}"),
        }
    }

    #[test]
    fn rejects_asymmetric() {
        let a = DenseMatrix::from_vec(2, 2, vec![1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(
            CholeskyFactor::new(&a),
            Err(NumericsError::NotSymmetric { .. })
        ));
    }
}
