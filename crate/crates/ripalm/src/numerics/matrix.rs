//! Dense matrix in row-major layout with the level-2/3 kernels the solvers
//! need. Row-major is the one documented storage order used everywhere,
//! including the on-disk format, so runs are bit-for-bit reproducible.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::vector::{dot, DenseVector};
use super::NumericsError;

/// Dense `rows x cols` matrix, row-major: entry `(i, j)` lives at
/// `data[i * cols + j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            data: vec![0.0; rows * cols],
            rows,
            cols,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        DenseMatrix { data, rows, cols }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            rows * cols,
            data.len(),
            "rows*cols must equal the data length"
        );
        DenseMatrix { data, rows, cols }
    }

    /// Checked constructor for data arriving from files or generators.
    pub fn from_checked(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NumericsError> {
        if rows * cols != data.len() {
            return Err(NumericsError::DimensionMismatch(format!(
                "{rows}x{cols} header does not match {} values",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(NumericsError::NonFinite(i));
        }
        Ok(DenseMatrix { data, rows, cols })
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// `out = A x`
    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), x);
        }
    }

    pub fn matvec(&self, x: &[f64]) -> DenseVector {
        let mut out = vec![0.0; self.rows];
        self.matvec_into(x, &mut out);
        DenseVector(out)
    }

    /// `out = A^T x`
    pub fn matvec_t_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        out.fill(0.0);
        for i in 0..self.rows {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += xi * a;
            }
        }
    }

    pub fn matvec_t(&self, x: &[f64]) -> DenseVector {
        let mut out = vec![0.0; self.cols];
        self.matvec_t_into(x, &mut out);
        DenseVector(out)
    }

    pub fn frob_norm(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Row sums, i.e. `A 1`.
    pub fn row_sums(&self) -> DenseVector {
        DenseVector((0..self.rows).map(|i| self.row(i).iter().sum()).collect())
    }

    /// Column sums, i.e. `A^T 1`.
    pub fn col_sums(&self) -> DenseVector {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a;
            }
        }
        DenseVector(out)
    }

    /// Gram matrix `A A^T` (`rows x rows`), parallelized over row blocks.
    pub fn gram_rows(&self) -> DenseMatrix {
        let n = self.rows;
        let mut out = DenseMatrix::zeros(n, n);
        {
            let cols = self.cols;
            let src = &self.data;
            out.data
                .par_chunks_mut(n)
                .enumerate()
                .for_each(|(i, out_row)| {
                    let a_i = &src[i * cols..(i + 1) * cols];
                    for j in i..n {
                        out_row[j] = dot(a_i, &src[j * cols..(j + 1) * cols]);
                    }
                });
        }
        mirror_upper_to_lower(&mut out);
        out
    }

    /// Gram matrix `A^T A` (`cols x cols`), parallelized over output rows.
    pub fn gram_cols(&self) -> DenseMatrix {
        let n = self.cols;
        let m = self.rows;
        let mut out = DenseMatrix::zeros(n, n);
        {
            let src = &self.data;
            out.data
                .par_chunks_mut(n)
                .enumerate()
                .for_each(|(i, out_row)| {
                    // out_row[j] = sum_k A[k,i] * A[k,j]; accumulate along rows
                    // of A so the inner access stays contiguous.
                    for k in 0..m {
                        let row = &src[k * n..(k + 1) * n];
                        let aki = row[i];
                        if aki == 0.0 {
                            continue;
                        }
                        for j in i..n {
                            out_row[j] += aki * row[j];
                        }
                    }
                });
        }
        mirror_upper_to_lower(&mut out);
        out
    }

    /// Extracts the submatrix formed by the given columns.
    pub fn select_columns(&self, idx: &[usize]) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, idx.len());
        for i in 0..self.rows {
            let src = self.row(i);
            let dst = out.row_mut(i);
            for (d, &j) in dst.iter_mut().zip(idx) {
                *d = src[j];
            }
        }
        out
    }

    pub fn add_diagonal(&mut self, alpha: f64) {
        debug_assert_eq!(self.rows, self.cols);
        for i in 0..self.rows {
            self.data[i * self.cols + i] += alpha;
        }
    }

    /// Maximum relative asymmetry `|a_ij - a_ji| / max(1, |a_ij|)`.
    pub fn asymmetry(&self) -> f64 {
        debug_assert_eq!(self.rows, self.cols);
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let d = (self.get(i, j) - self.get(j, i)).abs();
                worst = worst.max(d / self.get(i, j).abs().max(1.0));
            }
        }
        worst
    }
}

fn mirror_upper_to_lower(a: &mut DenseMatrix) {
    let n = a.rows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = a.get(i, j);
            a.set(j, i, v);
        }
    }
}
