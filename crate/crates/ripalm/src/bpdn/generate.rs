//! Synthetic BPDN instance generator.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::numerics::{DenseMatrix, DenseVector};

use super::{BpdnError, BpdnInstance};

/// Floor on the noise bound so the degenerate noiseless case keeps a valid
/// (measure-nonzero) ball.
const KAPPA_FLOOR: f64 = 1e-12;

/// Generates a Gaussian dictionary `D`, an `s_count`-sparse Gaussian signal
/// `s_true` on a uniformly drawn support, and the measurement
/// `b = D s_true + delta zeta` with `kappa_hat = max(delta ||zeta||, 1e-12)`.
/// Returns the instance and the ground-truth signal.
pub fn gen_synthetic_bpdn(
    m: usize,
    n: usize,
    s_count: usize,
    delta: f64,
    seed: u64,
) -> Result<(BpdnInstance, DenseVector), BpdnError> {
    if s_count > n {
        return Err(BpdnError::SparsityTooLarge {
            sparsity: s_count,
            n,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dict = DenseMatrix::from_fn(m, n, |_, _| rng.sample::<f64, _>(StandardNormal));

    let mut support: Vec<usize> = (0..n).collect();
    support.shuffle(&mut rng);
    support.truncate(s_count);
    let mut s_true = vec![0.0; n];
    for &j in &support {
        s_true[j] = rng.sample::<f64, _>(StandardNormal);
    }
    let s_true = DenseVector(s_true);

    let noise: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let mut b = dict.matvec(&s_true);
    for (bi, zi) in b.iter_mut().zip(&noise) {
        *bi += delta * zi;
    }
    let kappa_hat = (delta * crate::numerics::norm2(&noise)).max(KAPPA_FLOOR);

    let inst = BpdnInstance::new(dict, b, kappa_hat)?;
    Ok((inst, s_true))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_noiseless_empty_signal() {
        // s_count = 0 and delta = 0: b = 0, kappa clamped to the floor, and
        // s* = 0 is optimal.
        let (inst, s_true) = gen_synthetic_bpdn(4, 10, 0, 0.0, 3).unwrap();
        assert!(inst.rhs().iter().all(|&x| x == 0.0));
        assert_eq!(inst.kappa_hat(), KAPPA_FLOOR);
        assert!(s_true.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn sparsity_is_exact() {
        let (_, s_true) = gen_synthetic_bpdn(20, 50, 7, 0.1, 11).unwrap();
        let nnz = s_true.iter().filter(|&&x| x != 0.0).count();
        assert_eq!(nnz, 7);
    }

    #[test]
    fn kappa_matches_noise_norm() {
        let delta = 0.1;
        let (inst, s_true) = gen_synthetic_bpdn(15, 40, 5, delta, 21).unwrap();
        // Reconstruct ||zeta|| from b - D s_true = delta zeta.
        let resid = inst.dict().matvec(&s_true).minus(inst.rhs());
        assert!((inst.kappa_hat() - resid.norm2()).abs() <= 1e-12);
    }

    #[test]
    fn fixed_seed_reproducibility() {
        let (a, sa) = gen_synthetic_bpdn(10, 30, 4, 0.05, 99).unwrap();
        let (b, sb) = gen_synthetic_bpdn(10, 30, 4, 0.05, 99).unwrap();
        assert_eq!(a.dict().data(), b.dict().data());
        assert_eq!(&a.rhs()[..], &b.rhs()[..]);
        assert_eq!(a.kappa_hat(), b.kappa_hat());
        assert_eq!(&sa[..], &sb[..]);
    }

    #[test]
    fn oversparse_request_rejected() {
        assert!(matches!(
            gen_synthetic_bpdn(5, 10, 11, 0.1, 1),
            Err(BpdnError::SparsityTooLarge { .. })
        ));
    }
}
