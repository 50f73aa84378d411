//! QROT instance generators: grayscale image pairs on a shared pixel grid,
//! and random instances with Gaussian-mixture support points.

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use crate::numerics::{DenseMatrix, DenseVector};

use super::{QrotError, QrotInstance};

/// Builds an instance from two grayscale grids of the same resolution:
/// marginals are the normalized pixel intensities, the cost is the squared
/// Euclidean distance between pixel coordinates (row-major flattening, pixel
/// `(r, c)` at grid coordinate `(r, c)` with unit spacing).
pub fn gen_image_instance(
    image_a: &DenseMatrix,
    image_b: &DenseMatrix,
    lambda: f64,
) -> Result<QrotInstance, QrotError> {
    if image_a.rows() != image_b.rows() || image_a.cols() != image_b.cols() {
        return Err(QrotError::ResolutionMismatch {
            a_rows: image_a.rows(),
            a_cols: image_a.cols(),
            b_rows: image_b.rows(),
            b_cols: image_b.cols(),
        });
    }
    let alpha = normalize_mass(image_a)?;
    let beta = normalize_mass(image_b)?;

    let (rows, cols) = (image_a.rows(), image_a.cols());
    let npix = rows * cols;
    let coord = |p: usize| ((p / cols) as f64, (p % cols) as f64);
    let cost = DenseMatrix::from_fn(npix, npix, |i, j| {
        let (ri, ci) = coord(i);
        let (rj, cj) = coord(j);
        (ri - rj) * (ri - rj) + (ci - cj) * (ci - cj)
    });
    QrotInstance::new(cost, alpha, beta, lambda)
}

fn normalize_mass(image: &DenseMatrix) -> Result<DenseVector, QrotError> {
    let total: f64 = image.data().iter().sum();
    if total <= 0.0 {
        return Err(QrotError::ZeroMass);
    }
    Ok(DenseVector(
        image.data().iter().map(|&p| p / total).collect(),
    ))
}

/// Means of the five mixture components the support-point coordinates are
/// drawn from; every component has variance 5.
const MIXTURE_MEANS: [f64; 5] = [-20.0, 10.0, 0.0, 10.0, 20.0];
const MIXTURE_VARIANCE: f64 = 5.0;
/// Support points live in R^3.
const SUPPORT_DIM: usize = 3;

/// Random instance: uniform(0,1) weights normalized to probability vectors,
/// 3-d support points with coordinates drawn from the five-component
/// Gaussian mixture (random component weights per side), and
/// `C_ij = ||p_i - q_j||^2` normalized by its maximum entry.
pub fn gen_gaussian_mixture_instance(
    m: usize,
    n: usize,
    lambda: f64,
    seed: u64,
) -> QrotInstance {
    assert!(m >= 1 && n >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let alpha = random_simplex(m, &mut rng);
    let beta = random_simplex(n, &mut rng);
    let p = mixture_points(m, &mut rng);
    let q = mixture_points(n, &mut rng);

    let mut cost = DenseMatrix::zeros(m, n);
    let mut max_entry = 0.0f64;
    for i in 0..m {
        let row = cost.row_mut(i);
        let pi = &p[i * SUPPORT_DIM..(i + 1) * SUPPORT_DIM];
        for (j, c) in row.iter_mut().enumerate() {
            let qj = &q[j * SUPPORT_DIM..(j + 1) * SUPPORT_DIM];
            let d: f64 = pi
                .iter()
                .zip(qj)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            *c = d;
            max_entry = max_entry.max(d);
        }
    }
    if max_entry > 0.0 {
        for c in cost.data_mut() {
            *c /= max_entry;
        }
    }

    QrotInstance::new(cost, alpha, beta, lambda)
        .expect("generator produces valid marginals and costs")
}

fn random_simplex<R: Rng>(len: usize, rng: &mut R) -> DenseVector {
    let mut w: Vec<f64> = (0..len)
        .map(|_| loop {
            let x: f64 = rng.gen_range(0.0..1.0);
            if x > 0.0 {
                break x;
            }
        })
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    DenseVector(w)
}

fn mixture_points<R: Rng>(count: usize, rng: &mut R) -> Vec<f64> {
    let weights: Vec<f64> = (0..MIXTURE_MEANS.len())
        .map(|_| rng.gen_range(0.0..1.0) + f64::MIN_POSITIVE)
        .collect();
    let component = WeightedIndex::new(&weights).expect("positive weights");
    let sd = MIXTURE_VARIANCE.sqrt();
    (0..count * SUPPORT_DIM)
        .map(|_| {
            let c = component.sample(rng);
            let normal = Normal::new(MIXTURE_MEANS[c], sd).unwrap();
            normal.sample(rng)
        })
        .collect()
}
