//! Small dense solvers used by the attack battery: Cholesky for
//! ridge-regularized normal equations and cyclic Jacobi for symmetric
//! eigendecompositions (whitening, symmetric decorrelation).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Solves `a * x = b` for symmetric positive-definite `a` via Cholesky.
/// `b` may have multiple right-hand-side columns.
pub fn solve_spd(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    if a.cols() != n || b.rows() != n {
        return Err(Error::DimensionMismatch {
            op: "solve_spd",
            left_rows: a.rows(),
            left_cols: a.cols(),
            right_rows: b.rows(),
            right_cols: b.cols(),
        });
    }
    // Lower-triangular factor, row-major.
    let mut l = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a.get(i, j);
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return Err(Error::SingularFit);
                }
                l[i * n + i] = libm::sqrt(sum);
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    let k = b.cols();
    let mut x = b.clone();
    // Forward substitution: L y = b.
    for c in 0..k {
        for i in 0..n {
            let mut sum = x.get(i, c);
            for j in 0..i {
                sum -= l[i * n + j] * x.get(j, c);
            }
            x.set(i, c, sum / l[i * n + i]);
        }
        // Back substitution: L^T x = y.
        for i in (0..n).rev() {
            let mut sum = x.get(i, c);
            for j in (i + 1)..n {
                sum -= l[j * n + i] * x.get(j, c);
            }
            x.set(i, c, sum / l[i * n + i]);
        }
    }
    Ok(x)
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in ascending order with matching eigenvector columns,
/// so `a = v * diag(values) * v^T`.
pub fn jacobi_eigh(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::DimensionMismatch {
            op: "jacobi_eigh",
            left_rows: a.rows(),
            left_cols: a.cols(),
            right_rows: n,
            right_cols: n,
        });
    }
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    let scale: f64 = (0..n)
        .map(|i| libm::fabs(m.get(i, i)))
        .fold(1e-300, f64::max);

    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(libm::fabs(m.get(i, j)));
            }
        }
        if off < 1e-13 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if libm::fabs(apq) < 1e-300 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + libm::sqrt(1.0 + tau * tau))
                } else {
                    -1.0 / (-tau + libm::sqrt(1.0 + tau * tau))
                };
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = t * c;
                // Rotate rows/columns p and q of m.
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| {
        m.get(x, x)
            .partial_cmp(&m.get(y, y))
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let values: Vec<f64> = order.iter().map(|&i| m.get(i, i)).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for row in 0..n {
            vectors.set(row, new_col, v.get(row, old_col));
        }
    }
    Ok((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_small_system() {
        let a = Matrix::from_vec(2, 2, vec![4.0, 1.0, 1.0, 3.0]).unwrap();
        let b = Matrix::from_vec(2, 1, vec![1.0, 2.0]).unwrap();
        let x = solve_spd(&a, &b).unwrap();
        let back = a.matmul(&x).unwrap();
        assert!(back.max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Matrix::from_vec(2, 2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        let b = Matrix::from_vec(2, 1, vec![1.0, 1.0]).unwrap();
        assert!(matches!(solve_spd(&a, &b), Err(Error::SingularFit)));
    }

    #[test]
    fn jacobi_reconstructs_symmetric_matrix() {
        let a =
            Matrix::from_vec(3, 3, vec![2.0, -1.0, 0.5, -1.0, 3.0, 0.25, 0.5, 0.25, 1.5]).unwrap();
        let (values, v) = jacobi_eigh(&a).unwrap();
        assert!(values.windows(2).all(|w| w[0] <= w[1]));

        let mut lam = Matrix::zeros(3, 3);
        for i in 0..3 {
            lam.set(i, i, values[i]);
        }
        let rebuilt = v.matmul(&lam).unwrap().matmul(&v.transpose()).unwrap();
        assert!(rebuilt.max_abs_diff(&a) < 1e-10);

        let orth = v.matmul(&v.transpose()).unwrap();
        assert!(orth.max_abs_diff_identity() < 1e-10);
    }

    #[test]
    fn jacobi_handles_diagonal_input() {
        let a = Matrix::from_vec(2, 2, vec![5.0, 0.0, 0.0, 2.0]).unwrap();
        let (values, _) = jacobi_eigh(&a).unwrap();
        assert_eq!(values, vec![2.0, 5.0]);
    }
}
