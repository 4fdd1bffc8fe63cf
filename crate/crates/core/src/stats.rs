//! Normalization, covariance, and the pairwise merge that reconstructs
//! global statistics from per-partition summaries.
//!
//! Variance convention is the unbiased sample form (denominator `m - 1`)
//! throughout; partition merging works on co-moments `C = cov * (m - 1)`,
//! which add across partitions up to a mean-shift correction.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Standard deviations below this are treated as a constant attribute.
pub const STD_FLOOR: f64 = 1e-12;

/// Phase-1 payload of one node: raw-partition statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSummary {
    pub cov: Matrix,
    pub mean: Vec<f64>,
    pub row_count: u64,
}

impl PartitionSummary {
    /// Summarizes a raw data partition (needs at least two rows).
    pub fn from_data(data: &Matrix) -> Result<Self> {
        Ok(Self {
            cov: sample_covariance(data)?,
            mean: column_means(data),
            row_count: data.rows() as u64,
        })
    }

    #[inline]
    pub fn attr_count(&self) -> usize {
        self.cov.rows()
    }

    /// Shape/symmetry/count checks for summaries arriving off the wire.
    pub fn validate(&self) -> Result<()> {
        let n = self.cov.rows();
        if self.cov.cols() != n || self.mean.len() != n {
            return Err(Error::DimensionMismatch {
                op: "summary",
                left_rows: n,
                left_cols: self.cov.cols(),
                right_rows: self.mean.len(),
                right_cols: 1,
            });
        }
        if self.row_count < 2 {
            return Err(Error::InsufficientRows {
                got: self.row_count as usize,
                min: 2,
            });
        }
        for i in 0..n {
            if self.cov.get(i, i) < 0.0 {
                return Err(Error::NonFinite("negative covariance diagonal"));
            }
            for j in (i + 1)..n {
                if libm::fabs(self.cov.get(i, j) - self.cov.get(j, i)) > 1e-12 {
                    return Err(Error::MalformedPayload("asymmetric covariance"));
                }
            }
        }
        Ok(())
    }
}

/// Merged statistics of the full (virtual) dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalStats {
    /// Covariance of the merged raw dataset.
    pub cov: Matrix,
    /// Correlation matrix; equals the covariance of the z-score normalized
    /// dataset, which is what the parameter search consumes.
    pub corr: Matrix,
    pub stdvec: Vec<f64>,
    pub meanvec: Vec<f64>,
    pub total_rows: u64,
}

impl GlobalStats {
    #[inline]
    pub fn attr_count(&self) -> usize {
        self.cov.rows()
    }
}

/// Per-column means.
pub fn column_means(data: &Matrix) -> Vec<f64> {
    let (m, n) = (data.rows(), data.cols());
    let mut means = vec![0.0; n];
    for i in 0..m {
        for (j, v) in data.row(i).iter().enumerate() {
            means[j] += v;
        }
    }
    for v in &mut means {
        *v /= m as f64;
    }
    means
}

/// Per-column sample standard deviations (`m - 1` denominator).
pub fn column_stds(data: &Matrix) -> Vec<f64> {
    let (m, n) = (data.rows(), data.cols());
    let means = column_means(data);
    let mut acc = vec![0.0; n];
    for i in 0..m {
        for (j, v) in data.row(i).iter().enumerate() {
            let d = v - means[j];
            acc[j] += d * d;
        }
    }
    acc.iter()
        .map(|s| libm::sqrt(s / (m as f64 - 1.0)))
        .collect()
}

/// Unbiased sample covariance (two-pass).
pub fn sample_covariance(data: &Matrix) -> Result<Matrix> {
    let (m, n) = (data.rows(), data.cols());
    if m < 2 {
        return Err(Error::InsufficientRows { got: m, min: 2 });
    }
    let means = column_means(data);
    let mut cov = Matrix::zeros(n, n);
    for i in 0..m {
        let row = data.row(i);
        for j in 0..n {
            let dj = row[j] - means[j];
            for k in j..n {
                let v = cov.get(j, k) + dj * (row[k] - means[k]);
                cov.set(j, k, v);
            }
        }
    }
    let denom = m as f64 - 1.0;
    for j in 0..n {
        for k in j..n {
            let v = cov.get(j, k) / denom;
            cov.set(j, k, v);
            cov.set(k, j, v);
        }
    }
    Ok(cov)
}

/// Z-score normalizes each column with its own sample statistics.
///
/// Returns the normalized matrix together with the mean and std vectors used.
/// A column whose std is below [`STD_FLOOR`] yields
/// [`Error::ConstantAttribute`] naming that column.
pub fn zscore_normalize(data: &Matrix) -> Result<(Matrix, Vec<f64>, Vec<f64>)> {
    let means = column_means(data);
    let stds = column_stds(data);
    if let Some(col) = stds.iter().position(|&s| s < STD_FLOOR) {
        return Err(Error::ConstantAttribute { column: col });
    }
    let normalized = zscore_with(data, &means, &stds)?;
    Ok((normalized, means, stds))
}

/// Z-score normalizes with externally supplied statistics: `(x - mean) / std`.
pub fn zscore_with(data: &Matrix, means: &[f64], stds: &[f64]) -> Result<Matrix> {
    let n = data.cols();
    if means.len() != n || stds.len() != n {
        return Err(Error::DimensionMismatch {
            op: "zscore_with",
            left_rows: data.rows(),
            left_cols: n,
            right_rows: means.len(),
            right_cols: stds.len(),
        });
    }
    if let Some(col) = stds.iter().position(|&s| s < STD_FLOOR) {
        return Err(Error::ConstantAttribute { column: col });
    }
    let mut out = data.clone();
    let slice = out.as_mut_slice();
    for i in 0..data.rows() {
        for j in 0..n {
            slice[i * n + j] = (slice[i * n + j] - means[j]) / stds[j];
        }
    }
    Ok(out)
}

/// Undoes z-score normalization: `x * std + mean` columnwise.
pub fn reverse_zscore(data: &Matrix, stdvec: &[f64], meanvec: &[f64]) -> Result<Matrix> {
    let n = data.cols();
    if stdvec.len() != n || meanvec.len() != n {
        return Err(Error::DimensionMismatch {
            op: "reverse_zscore",
            left_rows: data.rows(),
            left_cols: n,
            right_rows: stdvec.len(),
            right_cols: meanvec.len(),
        });
    }
    let mut out = data.clone();
    let slice = out.as_mut_slice();
    for i in 0..data.rows() {
        for j in 0..n {
            slice[i * n + j] = slice[i * n + j] * stdvec[j] + meanvec[j];
        }
    }
    Ok(out)
}

/// Merges two partition summaries into the summary of their concatenation.
///
/// Covariances are combined through co-moments plus the mean-shift term
/// `(mu_a - mu_b)(mu_a - mu_b)^T * m_a * m_b / m`, the pairwise update that
/// makes the fold exact regardless of how rows were partitioned.
pub fn merge_summaries(a: &PartitionSummary, b: &PartitionSummary) -> Result<PartitionSummary> {
    let n = a.attr_count();
    if b.attr_count() != n {
        return Err(Error::DimensionMismatch {
            op: "merge_summaries",
            left_rows: n,
            left_cols: n,
            right_rows: b.attr_count(),
            right_cols: b.attr_count(),
        });
    }
    let (ma, mb) = (a.row_count as f64, b.row_count as f64);
    let m = ma + mb;
    let shift_weight = ma * mb / m;
    let mut cov = Matrix::zeros(n, n);
    for j in 0..n {
        let dj = a.mean[j] - b.mean[j];
        for k in 0..n {
            let dk = a.mean[k] - b.mean[k];
            let comoment = a.cov.get(j, k) * (ma - 1.0)
                + b.cov.get(j, k) * (mb - 1.0)
                + dj * dk * shift_weight;
            cov.set(j, k, comoment / (m - 1.0));
        }
    }
    let mean = (0..n)
        .map(|j| (ma * a.mean[j] + mb * b.mean[j]) / m)
        .collect();
    Ok(PartitionSummary {
        cov,
        mean,
        row_count: a.row_count + b.row_count,
    })
}

/// Folds partition summaries in list order and derives the global statistics
/// the parameter search needs.
pub fn finalize_global(summaries: &[PartitionSummary]) -> Result<GlobalStats> {
    let first = summaries
        .first()
        .ok_or_else(|| Error::InvalidConfig(alloc::string::String::from("no summaries")))?;
    let mut merged = first.clone();
    for s in &summaries[1..] {
        merged = merge_summaries(&merged, s)?;
    }
    let n = merged.attr_count();
    let stdvec: Vec<f64> = (0..n).map(|j| libm::sqrt(merged.cov.get(j, j))).collect();
    if let Some(col) = stdvec.iter().position(|&s| s < STD_FLOOR) {
        return Err(Error::ConstantAttribute { column: col });
    }
    let mut corr = Matrix::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            let v = if j == k {
                1.0
            } else {
                merged.cov.get(j, k) / (stdvec[j] * stdvec[k])
            };
            corr.set(j, k, v);
        }
    }
    Ok(GlobalStats {
        cov: merged.cov,
        corr,
        stdvec,
        meanvec: merged.mean,
        total_rows: merged.row_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{open_unit, stream, Purpose};

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = stream(seed, 0, Purpose::Sampling);
        let data: Vec<f64> = (0..rows * cols)
            .map(|_| open_unit(&mut rng) * 20.0 - 10.0)
            .collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    // Independent oracle: naive per-pair covariance, no shared code with
    // `sample_covariance`'s accumulation loop.
    fn naive_cov(data: &Matrix) -> Matrix {
        let (m, n) = (data.rows(), data.cols());
        let mut out = Matrix::zeros(n, n);
        for j in 0..n {
            for k in 0..n {
                let mu_j: f64 = (0..m).map(|i| data.get(i, j)).sum::<f64>() / m as f64;
                let mu_k: f64 = (0..m).map(|i| data.get(i, k)).sum::<f64>() / m as f64;
                let s: f64 = (0..m)
                    .map(|i| (data.get(i, j) - mu_j) * (data.get(i, k) - mu_k))
                    .sum();
                out.set(j, k, s / (m as f64 - 1.0));
            }
        }
        out
    }

    #[test]
    fn zscore_simple_column() {
        let d = Matrix::from_vec(3, 1, vec![1.0, 2.0, 3.0]).unwrap();
        // n = 1 is fine for normalization itself.
        let (z, mean, std) = zscore_normalize(&d).unwrap();
        assert_eq!(mean, vec![2.0]);
        assert_eq!(std, vec![1.0]);
        assert_eq!(z.as_slice(), &[-1.0, 0.0, 1.0]);
    }

    #[test]
    fn zscore_is_idempotent_with_own_stats() {
        let d = random_matrix(40, 3, 77);
        let (z, _, _) = zscore_normalize(&d).unwrap();
        let (zz, mean, std) = zscore_normalize(&z).unwrap();
        assert!(mean.iter().all(|v| libm::fabs(*v) < 1e-12));
        assert!(std.iter().all(|v| libm::fabs(v - 1.0) < 1e-12));
        assert!(z.max_abs_diff(&zz) < 1e-12);
    }

    #[test]
    fn zscore_rejects_constant_column() {
        let d = Matrix::from_vec(3, 2, vec![5.0, 1.0, 5.0, 2.0, 5.0, 3.0]).unwrap();
        assert!(matches!(
            zscore_normalize(&d),
            Err(Error::ConstantAttribute { column: 0 })
        ));
    }

    #[test]
    fn reverse_zscore_examples() {
        let d = Matrix::from_vec(3, 1, vec![-1.0, 0.0, 1.0]).unwrap();
        let out = reverse_zscore(&d, &[2.0], &[10.0]).unwrap();
        assert_eq!(out.as_slice(), &[8.0, 10.0, 12.0]);

        let id = reverse_zscore(&d, &[1.0], &[0.0]).unwrap();
        assert_eq!(id, d);
    }

    #[test]
    fn reverse_undoes_normalize() {
        let d = random_matrix(25, 4, 3);
        let (z, mean, std) = zscore_normalize(&d).unwrap();
        let back = reverse_zscore(&z, &std, &mean).unwrap();
        assert!(back.max_abs_diff(&d) < 1e-9);
    }

    #[test]
    fn covariance_small_cases() {
        let same = Matrix::from_vec(2, 2, vec![1.0, 7.0, 1.0, 7.0]).unwrap();
        assert_eq!(sample_covariance(&same).unwrap().as_slice(), &[0.0; 4]);

        let d = Matrix::from_vec(2, 1, vec![0.0, 2.0]).unwrap();
        assert_eq!(sample_covariance(&d).unwrap().as_slice(), &[2.0]);

        let single = Matrix::from_vec(1, 2, vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            sample_covariance(&single),
            Err(Error::InsufficientRows { got: 1, min: 2 })
        ));
    }

    #[test]
    fn covariance_matches_naive_oracle() {
        let d = random_matrix(50, 4, 123);
        let fast = sample_covariance(&d).unwrap();
        let slow = naive_cov(&d);
        assert!(fast.max_abs_diff(&slow) < 1e-12);
    }

    #[test]
    fn merge_two_shifted_copies() {
        let a = Matrix::from_vec(2, 2, vec![0.0, 0.0, 2.0, 2.0]).unwrap();
        let b = Matrix::from_vec(2, 2, vec![4.0, 4.0, 6.0, 6.0]).unwrap();
        let merged = merge_summaries(
            &PartitionSummary::from_data(&a).unwrap(),
            &PartitionSummary::from_data(&b).unwrap(),
        )
        .unwrap();
        // Direct covariance of the 4-row concatenation: every entry 20/3.
        for j in 0..2 {
            for k in 0..2 {
                assert!(libm::fabs(merged.cov.get(j, k) - 20.0 / 3.0) < 1e-12);
            }
        }
        assert_eq!(merged.mean, vec![3.0, 3.0]);
        assert_eq!(merged.row_count, 4);
    }

    #[test]
    fn merge_mean_is_count_weighted() {
        let a = PartitionSummary {
            cov: Matrix::zeros(2, 2),
            mean: vec![1.0, 1.0],
            row_count: 2,
        };
        let b = PartitionSummary {
            cov: Matrix::zeros(2, 2),
            mean: vec![3.0, 3.0],
            row_count: 2,
        };
        assert_eq!(merge_summaries(&a, &b).unwrap().mean, vec![2.0, 2.0]);
    }

    #[test]
    fn merge_rejects_attr_mismatch() {
        let a = PartitionSummary {
            cov: Matrix::zeros(2, 2),
            mean: vec![0.0; 2],
            row_count: 2,
        };
        let b = PartitionSummary {
            cov: Matrix::zeros(3, 3),
            mean: vec![0.0; 3],
            row_count: 2,
        };
        assert!(merge_summaries(&a, &b).is_err());
    }

    #[test]
    fn fold_matches_concatenation_oracle() {
        let full = random_matrix(59, 3, 9);
        // Partition into pieces of uneven sizes 2, 50, 7.
        let sizes = [2usize, 50, 7];
        let mut start = 0;
        let mut summaries = Vec::new();
        for &len in &sizes {
            let mut rows = Vec::new();
            for i in start..start + len {
                rows.extend_from_slice(full.row(i));
            }
            let part = Matrix::from_vec(len, 3, rows).unwrap();
            summaries.push(PartitionSummary::from_data(&part).unwrap());
            start += len;
        }
        let global = finalize_global(&summaries).unwrap();
        let direct_cov = sample_covariance(&full).unwrap();
        let direct_mean = column_means(&full);
        let direct_std = column_stds(&full);
        for j in 0..3 {
            assert!(libm::fabs(global.meanvec[j] - direct_mean[j]) < 1e-9);
            assert!(libm::fabs(global.stdvec[j] - direct_std[j]) / direct_std[j] < 1e-9);
            for k in 0..3 {
                let rel = libm::fabs(global.cov.get(j, k) - direct_cov.get(j, k))
                    / libm::fabs(direct_cov.get(j, k)).max(1.0);
                assert!(rel < 1e-9);
            }
        }
        assert_eq!(global.total_rows, 59);
    }

    #[test]
    fn single_summary_yields_own_stats() {
        let d = random_matrix(30, 4, 17);
        let s = PartitionSummary::from_data(&d).unwrap();
        let g = finalize_global(core::slice::from_ref(&s)).unwrap();
        assert_eq!(g.cov, s.cov);
        assert_eq!(g.meanvec, s.mean);
        for j in 0..4 {
            assert_eq!(g.corr.get(j, j), 1.0);
        }
    }

    #[test]
    fn corr_equals_cov_of_normalized_data() {
        let d = random_matrix(80, 5, 21);
        let g = finalize_global(&[PartitionSummary::from_data(&d).unwrap()]).unwrap();
        let (z, _, _) = zscore_normalize(&d).unwrap();
        let cov_norm = sample_covariance(&z).unwrap();
        assert!(g.corr.max_abs_diff(&cov_norm) < 1e-9);
    }

    #[test]
    fn finalize_rejects_constant_attribute() {
        let d = Matrix::from_vec(3, 2, vec![7.0, 1.0, 7.0, 2.0, 7.0, 5.0]).unwrap();
        let s = PartitionSummary::from_data(&d).unwrap();
        assert!(matches!(
            finalize_global(&[s]),
            Err(Error::ConstantAttribute { column: 0 })
        ));
    }

    #[test]
    fn fold_order_is_nearly_associative() {
        let full = random_matrix(90, 4, 31);
        let parts = DataMatrix::unlabeled(full).split_contiguous(5).unwrap();
        let summaries: Vec<PartitionSummary> = parts
            .iter()
            .map(|p| PartitionSummary::from_data(p.features()).unwrap())
            .collect();
        let left = finalize_global(&summaries).unwrap();

        // Balanced-tree fold.
        let ab = merge_summaries(&summaries[0], &summaries[1]).unwrap();
        let cd = merge_summaries(&summaries[2], &summaries[3]).unwrap();
        let abcd = merge_summaries(&ab, &cd).unwrap();
        let tree = merge_summaries(&abcd, &summaries[4]).unwrap();
        let right = finalize_global(&[tree]).unwrap();

        for j in 0..4 {
            for k in 0..4 {
                let l = left.cov.get(j, k);
                let r = right.cov.get(j, k);
                assert!(libm::fabs(l - r) / libm::fabs(l).max(1.0) < 1e-8);
            }
        }
    }

    use crate::data::DataMatrix;
}
