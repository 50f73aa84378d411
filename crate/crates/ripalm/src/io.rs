//! Plain-text file formats for vectors, matrices, and grayscale grids.
//!
//! A vector file is a `<len>` header line followed by one value per line; a
//! matrix file is a `<rows> <cols>` header followed by one space-separated
//! row per line, in the same row-major order the in-memory layout uses.
//! Values are written with Rust's shortest round-trip formatting, so a
//! write/read cycle is bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::numerics::{DenseMatrix, DenseVector, NumericsError};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: expected {expected}")]
    Parse {
        path: String,
        line: usize,
        expected: &'static str,
    },
    #[error("{path}: {source}")]
    Numeric {
        path: String,
        source: NumericsError,
    },
}

fn file_err(path: &Path, source: std::io::Error) -> IoError {
    IoError::File {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, expected: &'static str) -> IoError {
    IoError::Parse {
        path: path.display().to_string(),
        line,
        expected,
    }
}

pub fn write_vector(path: &Path, v: &DenseVector) -> Result<(), IoError> {
    let mut out = String::with_capacity(v.len() * 20 + 16);
    let _ = writeln!(out, "{}", v.len());
    for x in v.iter() {
        let _ = writeln!(out, "{x}");
    }
    fs::write(path, out).map_err(|e| file_err(path, e))
}

pub fn read_vector(path: &Path) -> Result<DenseVector, IoError> {
    let text = fs::read_to_string(path).map_err(|e| file_err(path, e))?;
    let mut lines = text.lines();
    let len: usize = lines
        .next()
        .and_then(|l| l.trim().parse().ok())
        .ok_or_else(|| parse_err(path, 1, "vector length header"))?;
    let mut data = Vec::with_capacity(len);
    for (i, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let x: f64 = line
            .parse()
            .map_err(|_| parse_err(path, i + 2, "floating-point value"))?;
        data.push(x);
    }
    if data.len() != len {
        return Err(parse_err(path, 1, "as many values as the header declares"));
    }
    DenseVector::from_checked(data).map_err(|source| IoError::Numeric {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_matrix(path: &Path, m: &DenseMatrix) -> Result<(), IoError> {
    let mut out = String::with_capacity(m.rows() * m.cols() * 20 + 16);
    let _ = writeln!(out, "{} {}", m.rows(), m.cols());
    for i in 0..m.rows() {
        let row = m.row(i);
        for (j, x) in row.iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{x}");
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| file_err(path, e))
}

pub fn read_matrix(path: &Path) -> Result<DenseMatrix, IoError> {
    let text = fs::read_to_string(path).map_err(|e| file_err(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "rows/cols header"))?;
    let mut parts = header.split_whitespace();
    let rows: usize = parts
        .next()
        .and_then(|p| p.parse().ok())
        .ok_or_else(|| parse_err(path, 1, "row count"))?;
    let cols: usize = parts
        .next()
        .and_then(|p| p.parse().ok())
        .ok_or_else(|| parse_err(path, 1, "column count"))?;
    let mut data = Vec::with_capacity(rows * cols);
    for (i, line) in lines.enumerate() {
        for tok in line.split_whitespace() {
            let x: f64 = tok
                .parse()
                .map_err(|_| parse_err(path, i + 2, "floating-point value"))?;
            data.push(x);
        }
    }
    DenseMatrix::from_checked(rows, cols, data).map_err(|source| IoError::Numeric {
        path: path.display().to_string(),
        source,
    })
}

/// Grayscale grids use the matrix format; entries must be nonnegative.
pub fn read_image_grid(path: &Path) -> Result<DenseMatrix, IoError> {
    let img = read_matrix(path)?;
    if let Some(i) = img.data().iter().position(|&x| x < 0.0) {
        return Err(IoError::Numeric {
            path: path.display().to_string(),
            source: NumericsError::NonFinite(i),
        });
    }
    Ok(img)
}
