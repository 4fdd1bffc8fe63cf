//! Dense row-major `f64` matrices and the homogeneous-coordinate data form.
//!
//! All constructors and products reject NaN/Inf entries, so downstream code
//! can rely on every [`Matrix`] being finite.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Dense matrix of 64-bit reals, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data, validating length and finiteness.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                op: "from_vec",
                left_rows: rows,
                left_cols: cols,
                right_rows: data.len(),
                right_cols: 1,
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("matrix constructor"));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from a slice of rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch {
                op: "from_rows",
                left_rows: r,
                left_cols: c,
                right_rows: r,
                right_cols: 0,
            });
        }
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            data.extend_from_slice(row);
        }
        Self::from_vec(r, c, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    /// Row `i` as a slice.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Column `j`, copied out.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Row-major backing slice.
    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Matrix product `self * rhs`; output is checked to stay finite.
    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch {
                op: "matmul",
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: rhs.rows,
                right_cols: rhs.cols,
            });
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let lrow = self.row(i);
            for (k, &lv) in lrow.iter().enumerate() {
                if lv == 0.0 {
                    continue;
                }
                let rrow = rhs.row(k);
                let orow = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &rv) in orow.iter_mut().zip(rrow) {
                    *o += lv * rv;
                }
            }
        }
        if !out.data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("matrix product"));
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// Largest absolute entry-wise difference; shapes must match.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| libm::fabs(a - b))
            .fold(0.0, f64::max)
    }

    /// `max |self - I|` over all entries; the matrix must be square.
    pub fn max_abs_diff_identity(&self) -> f64 {
        debug_assert_eq!(self.rows, self.cols);
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max(libm::fabs(self.get(i, j) - target));
            }
        }
        worst
    }
}

/// A dataset in homogeneous column form: `(n+1) x m`, last row all ones.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousData {
    inner: Matrix,
}

impl HomogeneousData {
    /// Converts an `m x n` data matrix (rows are records) into homogeneous
    /// column form by transposing and appending a row of ones.
    pub fn from_records(data: &Matrix) -> Result<Self> {
        let (m, n) = (data.rows(), data.cols());
        if n < 2 {
            return Err(Error::InvalidDimension { got: n, min: 2 });
        }
        let mut inner = Matrix::zeros(n + 1, m);
        for i in 0..m {
            for j in 0..n {
                inner.set(j, i, data.get(i, j));
            }
        }
        for i in 0..m {
            inner.set(n, i, 1.0);
        }
        Ok(Self { inner })
    }

    #[inline]
    pub fn as_matrix(&self) -> &Matrix {
        &self.inner
    }

    /// Number of data attributes (`n`), excluding the homogeneous row.
    #[inline]
    pub fn attrs(&self) -> usize {
        self.inner.rows() - 1
    }

    /// Number of records (`m`).
    #[inline]
    pub fn records(&self) -> usize {
        self.inner.cols()
    }
}
