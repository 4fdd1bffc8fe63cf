//! Labeled numeric datasets: the unit of perturbation.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;

/// An `m x n` feature matrix with optional per-row class labels.
///
/// Labels are carried verbatim and never perturbed; shuffling moves them
/// together with their rows.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    features: Matrix,
    labels: Option<Vec<String>>,
}

impl DataMatrix {
    pub fn new(features: Matrix, labels: Option<Vec<String>>) -> Result<Self> {
        if let Some(ref l) = labels {
            if l.len() != features.rows() {
                return Err(Error::DimensionMismatch {
                    op: "labels",
                    left_rows: features.rows(),
                    left_cols: features.cols(),
                    right_rows: l.len(),
                    right_cols: 1,
                });
            }
        }
        Ok(Self { features, labels })
    }

    pub fn unlabeled(features: Matrix) -> Self {
        Self {
            features,
            labels: None,
        }
    }

    #[inline]
    pub fn features(&self) -> &Matrix {
        &self.features
    }

    #[inline]
    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.features.rows()
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.features.cols()
    }

    /// Replaces the feature matrix, keeping labels (shapes must agree).
    pub fn with_features(&self, features: Matrix) -> Result<Self> {
        Self::new(features, self.labels.clone())
    }

    /// Seeded Fisher-Yates row shuffle; labels move with their rows.
    pub fn shuffle_rows<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let m = self.rows();
        let mut order: Vec<usize> = (0..m).collect();
        rng::shuffle(rng, &mut order);
        let n = self.cols();
        let mut data = Vec::with_capacity(m * n);
        for &src in &order {
            data.extend_from_slice(self.features.row(src));
        }
        self.features = Matrix::from_vec(m, n, data).expect("shuffle preserves shape");
        if let Some(ref mut labels) = self.labels {
            let moved: Vec<String> = order.iter().map(|&src| labels[src].clone()).collect();
            *labels = moved;
        }
    }

    /// Splits rows contiguously into `k` near-equal partitions (the first
    /// `m mod k` partitions get one extra row).
    pub fn split_contiguous(&self, k: usize) -> Result<Vec<DataMatrix>> {
        if k == 0 || k > self.rows() {
            return Err(Error::InvalidConfig(alloc::format!(
                "cannot split {} rows into {k} partitions",
                self.rows()
            )));
        }
        let m = self.rows();
        let base = m / k;
        let extra = m % k;
        let mut parts = Vec::with_capacity(k);
        let mut start = 0;
        for p in 0..k {
            let len = base + usize::from(p < extra);
            let mut data = Vec::with_capacity(len * self.cols());
            for i in start..start + len {
                data.extend_from_slice(self.features.row(i));
            }
            let features = Matrix::from_vec(len, self.cols(), data)?;
            let labels = self.labels.as_ref().map(|l| l[start..start + len].to_vec());
            parts.push(DataMatrix { features, labels });
            start += len;
        }
        Ok(parts)
    }

    /// Concatenates partitions in order; attribute counts must agree.
    pub fn concat(parts: &[DataMatrix]) -> Result<DataMatrix> {
        let first = parts.first().ok_or_else(|| {
            Error::InvalidConfig(String::from("cannot concatenate zero partitions"))
        })?;
        let n = first.cols();
        let labeled = first.labels.is_some();
        let mut data = Vec::new();
        let mut labels: Option<Vec<String>> = labeled.then(Vec::new);
        for p in parts {
            if p.cols() != n || p.labels.is_some() != labeled {
                return Err(Error::DimensionMismatch {
                    op: "concat",
                    left_rows: first.rows(),
                    left_cols: n,
                    right_rows: p.rows(),
                    right_cols: p.cols(),
                });
            }
            data.extend_from_slice(p.features.as_slice());
            if let (Some(acc), Some(l)) = (labels.as_mut(), p.labels.as_ref()) {
                acc.extend_from_slice(l);
            }
        }
        let rows = data.len() / n;
        Ok(DataMatrix {
            features: Matrix::from_vec(rows, n, data)?,
            labels,
        })
    }
}
