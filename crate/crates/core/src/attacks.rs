//! Reconstruction-attack battery for quantifying the privacy of an
//! (original, perturbed) dataset pair.
//!
//! Three attacks, each reported as the per-attribute standard deviation of
//! `original - reconstructed` and its minimum (the most exposed attribute):
//!
//! * naive inference: the perturbed data itself is the estimate;
//! * known I/O: an adversary holding a fraction of aligned original/perturbed
//!   rows fits an affine least-squares map and applies it to the rest;
//! * ICA: FastICA estimates independent components of the perturbed data and
//!   the attacker maps each component onto the attribute it correlates with,
//!   rescaled against the perturbed data's own marginals (the true data is
//!   never consulted by the attack, only by the metric).
//!
//! Rows must be aligned, so the battery is run with shuffling disabled or
//! with the permutation undone.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::linalg::{jacobi_eigh, solve_spd};
use crate::matrix::Matrix;
use crate::rng::{normal, salted_stream, shuffle, Purpose};

/// Ridge term for the known-I/O normal equations.
const IO_RIDGE: f64 = 1e-8;
/// FastICA fixed-point tolerance and iteration cap.
const ICA_TOL: f64 = 1e-6;
const ICA_MAX_ITER: usize = 500;

/// Attack metrics for one dataset pair.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackReport {
    pub ni: Vec<f64>,
    pub ica: Vec<f64>,
    pub io: Vec<f64>,
    pub ni_min: f64,
    pub ica_min: f64,
    pub io_min: f64,
    pub known_fraction: f64,
    pub seed: u64,
    pub ica_converged: bool,
}

fn min_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Per-attribute sample std of `original - perturbed`.
pub fn ni_metric(original: &Matrix, perturbed: &Matrix) -> Result<Vec<f64>> {
    let (m, n) = (original.rows(), original.cols());
    if perturbed.rows() != m || perturbed.cols() != n {
        return Err(Error::DimensionMismatch {
            op: "ni_metric",
            left_rows: m,
            left_cols: n,
            right_rows: perturbed.rows(),
            right_cols: perturbed.cols(),
        });
    }
    if m < 2 {
        return Err(Error::InsufficientRows { got: m, min: 2 });
    }
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let mut sum = 0.0;
        for i in 0..m {
            sum += original.get(i, j) - perturbed.get(i, j);
        }
        let mean = sum / m as f64;
        let mut acc = 0.0;
        for i in 0..m {
            let d = (original.get(i, j) - perturbed.get(i, j)) - mean;
            acc += d * d;
        }
        out.push(libm::sqrt(acc / (m as f64 - 1.0)));
    }
    Ok(out)
}

/// Known input/output attack: fits `original ~ [perturbed | 1]` on the known
/// pairs by ridge-regularized least squares and reconstructs the rest.
pub fn io_attack(
    original_known: &Matrix,
    perturbed_known: &Matrix,
    perturbed_rest: &Matrix,
) -> Result<Matrix> {
    let (mk, n) = (original_known.rows(), original_known.cols());
    if perturbed_known.rows() != mk || perturbed_known.cols() != n || perturbed_rest.cols() != n {
        return Err(Error::DimensionMismatch {
            op: "io_attack",
            left_rows: mk,
            left_cols: n,
            right_rows: perturbed_known.rows(),
            right_cols: perturbed_rest.cols(),
        });
    }
    if mk < n + 1 {
        return Err(Error::InsufficientRows {
            got: mk,
            min: n + 1,
        });
    }

    // Design matrix with a bias column.
    let d = n + 1;
    let mut design = Matrix::zeros(mk, d);
    for i in 0..mk {
        for j in 0..n {
            design.set(i, j, perturbed_known.get(i, j));
        }
        design.set(i, n, 1.0);
    }
    let dt = design.transpose();
    let mut gram = dt.matmul(&design)?;
    for i in 0..d {
        gram.set(i, i, gram.get(i, i) + IO_RIDGE);
    }
    let rhs = dt.matmul(original_known)?;
    let weights = solve_spd(&gram, &rhs)?;

    let rest = perturbed_rest.rows();
    let mut extended = Matrix::zeros(rest, d);
    for i in 0..rest {
        for j in 0..n {
            extended.set(i, j, perturbed_rest.get(i, j));
        }
        extended.set(i, n, 1.0);
    }
    extended.matmul(&weights)
}

/// FastICA reconstruction of the original attributes from perturbed data.
#[derive(Debug, Clone)]
pub struct IcaReconstruction {
    pub data: Matrix,
    pub converged: bool,
    /// Estimated sources, one row per component (useful for source-recovery
    /// checks).
    pub sources: Matrix,
}

/// Runs FastICA on the perturbed data and reconstructs one estimate per
/// attribute: components are greedily matched to the perturbed columns by
/// absolute correlation, then each matched component is mapped through an
/// ordinary least-squares fit against that column.
pub fn ica_attack(perturbed: &Matrix, seed: u64) -> Result<IcaReconstruction> {
    let (m, n) = (perturbed.rows(), perturbed.cols());
    if m < 10 * n {
        return Err(Error::InsufficientRows {
            got: m,
            min: 10 * n,
        });
    }

    // Center.
    let means = crate::stats::column_means(perturbed);
    let mut centered = perturbed.clone();
    {
        let slice = centered.as_mut_slice();
        for i in 0..m {
            for j in 0..n {
                slice[i * n + j] -= means[j];
            }
        }
    }

    // Whiten through the covariance eigendecomposition.
    let cov = crate::stats::sample_covariance(&centered)?;
    let (eigvals, eigvecs) = jacobi_eigh(&cov)?;
    let max_ev = eigvals.iter().copied().fold(0.0, f64::max);
    if eigvals.iter().any(|&l| l < 1e-12 * max_ev.max(1e-300)) {
        return Err(Error::SingularFit);
    }
    // whitener = diag(1/sqrt(eigvals)) * eigvecs^T
    let mut whitener = eigvecs.transpose();
    for i in 0..n {
        let scale = 1.0 / libm::sqrt(eigvals[i]);
        for j in 0..n {
            let v = whitener.get(i, j) * scale;
            whitener.set(i, j, v);
        }
    }
    let z = whitener.matmul(&centered.transpose())?; // n x m, identity covariance

    // Symmetric fixed-point iteration with tanh nonlinearity.
    let mut rng = salted_stream(seed, 0, Purpose::Sampling, 0x1ca);
    let mut w_data = Vec::with_capacity(n * n);
    for _ in 0..n * n {
        w_data.push(normal(&mut rng, 1.0));
    }
    let mut w = symmetric_decorrelate(&Matrix::from_vec(n, n, w_data)?)?;
    let mut converged = false;
    for _ in 0..ICA_MAX_ITER {
        let prev = w.clone();
        let projected = w.matmul(&z)?; // n x m
        let mut next = Matrix::zeros(n, n);
        for i in 0..n {
            let mut g_mean = 0.0;
            let mut gprime_mean = 0.0;
            let mut acc = vec![0.0f64; n];
            for t in 0..m {
                let y = projected.get(i, t);
                let g = libm::tanh(y);
                g_mean += g;
                gprime_mean += 1.0 - g * g;
                for (j, a) in acc.iter_mut().enumerate() {
                    *a += z.get(j, t) * g;
                }
            }
            let _ = g_mean;
            gprime_mean /= m as f64;
            for j in 0..n {
                next.set(i, j, acc[j] / m as f64 - gprime_mean * w.get(i, j));
            }
        }
        w = symmetric_decorrelate(&next)?;
        // Largest row movement, insensitive to the sign ambiguity of the
        // decorrelation step.
        let mut delta = 0.0f64;
        for i in 0..n {
            let mut same = 0.0;
            let mut flipped = 0.0;
            for j in 0..n {
                let (a, b) = (w.get(i, j), prev.get(i, j));
                same += (a - b) * (a - b);
                flipped += (a + b) * (a + b);
            }
            delta = delta.max(libm::sqrt(same.min(flipped)));
        }
        if delta < ICA_TOL {
            converged = true;
            break;
        }
    }

    let sources = w.matmul(&z)?; // n x m, unit-variance rows

    // Attacker-side alignment: greedy max |corr(source, perturbed column)|.
    let assignment = greedy_match(&sources, &centered)?;

    // Scale each matched component onto its column by least squares against
    // the perturbed (attacker-visible) values.
    let mut rec = Matrix::zeros(m, n);
    for (col, &comp) in assignment.iter().enumerate() {
        let mut s_mean = 0.0;
        for t in 0..m {
            s_mean += sources.get(comp, t);
        }
        s_mean /= m as f64;
        let mut cov_sp = 0.0;
        let mut var_s = 0.0;
        for t in 0..m {
            let s = sources.get(comp, t) - s_mean;
            cov_sp += s * centered.get(t, col);
            var_s += s * s;
        }
        let slope = if var_s > 0.0 { cov_sp / var_s } else { 0.0 };
        let intercept = means[col] - slope * s_mean;
        for t in 0..m {
            rec.set(t, col, slope * sources.get(comp, t) + intercept);
        }
    }

    Ok(IcaReconstruction {
        data: rec,
        converged,
        sources,
    })
}

/// `(W W^T)^{-1/2} W` via the eigendecomposition of `W W^T`.
fn symmetric_decorrelate(w: &Matrix) -> Result<Matrix> {
    let n = w.rows();
    let wwt = w.matmul(&w.transpose())?;
    let (eigvals, eigvecs) = jacobi_eigh(&wwt)?;
    if eigvals.iter().any(|&l| l <= 0.0) {
        return Err(Error::SingularFit);
    }
    let mut inv_sqrt = Matrix::zeros(n, n);
    for i in 0..n {
        inv_sqrt.set(i, i, 1.0 / libm::sqrt(eigvals[i]));
    }
    eigvecs
        .matmul(&inv_sqrt)?
        .matmul(&eigvecs.transpose())?
        .matmul(w)
}

/// Greedy assignment of components (rows of `sources`) to data columns by
/// absolute correlation, strongest pairs first. Returns `assignment[col] =
/// component index`.
fn greedy_match(sources: &Matrix, centered: &Matrix) -> Result<Vec<usize>> {
    let n = centered.cols();
    let m = centered.rows();
    let mut corr = Matrix::zeros(n, n); // [component][column]
    for c in 0..n {
        let mut s_mean = 0.0;
        for t in 0..m {
            s_mean += sources.get(c, t);
        }
        s_mean /= m as f64;
        let mut s_var = 0.0;
        for t in 0..m {
            let d = sources.get(c, t) - s_mean;
            s_var += d * d;
        }
        for col in 0..n {
            let mut col_var = 0.0;
            let mut cov = 0.0;
            for t in 0..m {
                let p = centered.get(t, col);
                cov += (sources.get(c, t) - s_mean) * p;
                col_var += p * p;
            }
            let denom = libm::sqrt(s_var * col_var);
            corr.set(
                c,
                col,
                if denom > 0.0 {
                    libm::fabs(cov / denom)
                } else {
                    0.0
                },
            );
        }
    }
    let mut assignment = vec![usize::MAX; n];
    let mut comp_used = vec![false; n];
    let mut col_used = vec![false; n];
    for _ in 0..n {
        let mut best = (0usize, 0usize, -1.0f64);
        for c in 0..n {
            if comp_used[c] {
                continue;
            }
            for col in 0..n {
                if col_used[col] {
                    continue;
                }
                if corr.get(c, col) > best.2 {
                    best = (c, col, corr.get(c, col));
                }
            }
        }
        assignment[best.1] = best.0;
        comp_used[best.0] = true;
        col_used[best.1] = true;
    }
    Ok(assignment)
}

fn std_of_diff(original: &Matrix, reconstructed: &Matrix) -> Result<Vec<f64>> {
    ni_metric(original, reconstructed)
}

/// Runs all three attacks and assembles the report. The known subset for the
/// I/O attack is a seeded sample of `ceil(known_fraction * m)` rows.
pub fn evaluate(
    original: &DataMatrix,
    perturbed: &DataMatrix,
    known_fraction: f64,
    seed: u64,
) -> Result<AttackReport> {
    let orig = original.features();
    let pert = perturbed.features();
    let (m, n) = (orig.rows(), orig.cols());
    if pert.rows() != m || pert.cols() != n {
        return Err(Error::DimensionMismatch {
            op: "evaluate",
            left_rows: m,
            left_cols: n,
            right_rows: pert.rows(),
            right_cols: pert.cols(),
        });
    }
    if !(0.0..1.0).contains(&known_fraction) || known_fraction == 0.0 {
        return Err(Error::InvalidConfig(alloc::format!(
            "known fraction must lie in (0, 1), got {known_fraction}"
        )));
    }

    let ni = ni_metric(orig, pert)?;

    // Seeded known-row sample for the I/O attack.
    let known_count = libm::ceil(known_fraction * m as f64) as usize;
    if known_count < n + 1 {
        return Err(Error::InsufficientRows {
            got: known_count,
            min: n + 1,
        });
    }
    let mut indices: Vec<usize> = (0..m).collect();
    let mut rng = salted_stream(seed, 0, Purpose::Sampling, 0x10);
    shuffle(&mut rng, &mut indices);
    let mut known_idx = indices[..known_count].to_vec();
    let mut rest_idx = indices[known_count..].to_vec();
    known_idx.sort_unstable();
    rest_idx.sort_unstable();

    let select = |mat: &Matrix, idx: &[usize]| -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * n);
        for &i in idx {
            data.extend_from_slice(mat.row(i));
        }
        Matrix::from_vec(idx.len(), n, data).expect("selection preserves finiteness")
    };
    let rec_rest = io_attack(
        &select(orig, &known_idx),
        &select(pert, &known_idx),
        &select(pert, &rest_idx),
    )?;
    let io = std_of_diff(&select(orig, &rest_idx), &rec_rest)?;

    let ica_rec = ica_attack(pert, seed)?;
    let ica = std_of_diff(orig, &ica_rec.data)?;

    Ok(AttackReport {
        ni_min: min_of(&ni),
        ica_min: min_of(&ica),
        io_min: min_of(&io),
        ni,
        ica,
        io,
        known_fraction,
        seed,
        ica_converged: ica_rec.converged,
    })
}

/// Correlation helper for source-recovery checks in tests and demos.
pub fn abs_correlation(a: &[f64], b: &[f64]) -> f64 {
    let m = a.len() as f64;
    let ma = a.iter().sum::<f64>() / m;
    let mb = b.iter().sum::<f64>() / m;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    libm::fabs(cov / libm::sqrt(va * vb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{open_unit, stream};

    fn uniform_matrix(m: usize, n: usize, seed: u64) -> Matrix {
        let mut rng = stream(seed, 0, Purpose::Sampling);
        let data: Vec<f64> = (0..m * n)
            .map(|_| open_unit(&mut rng) * 4.0 - 2.0)
            .collect();
        Matrix::from_vec(m, n, data).unwrap()
    }

    #[test]
    fn ni_zero_for_identical_and_for_constant_shift() {
        let d = uniform_matrix(50, 3, 1);
        let same = ni_metric(&d, &d).unwrap();
        assert!(same.iter().all(|&v| v == 0.0));

        let mut shifted = d.clone();
        for (i, v) in shifted.as_mut_slice().iter_mut().enumerate() {
            *v += [10.0, -3.0, 0.5][i % 3];
        }
        let stds = ni_metric(&d, &shifted).unwrap();
        assert!(stds.iter().all(|&v| v < 1e-12));
    }

    #[test]
    fn ni_estimates_unit_noise() {
        let m = 10_000;
        let d = uniform_matrix(m, 2, 2);
        let mut noisy = d.clone();
        let mut rng = stream(3, 0, Purpose::Expansion);
        for v in noisy.as_mut_slice() {
            *v += normal(&mut rng, 1.0);
        }
        let stds = ni_metric(&d, &noisy).unwrap();
        for s in stds {
            assert!(libm::fabs(s - 1.0) < 0.05, "std {s}");
        }
    }

    #[test]
    fn io_attack_inverts_identity_and_linear_maps() {
        let d = uniform_matrix(120, 3, 4);
        let known = 40;
        let take = |m: &Matrix, range: core::ops::Range<usize>| {
            let mut data = Vec::new();
            for i in range.clone() {
                data.extend_from_slice(m.row(i));
            }
            Matrix::from_vec(range.len(), m.cols(), data).unwrap()
        };

        // Identity perturbation.
        let rec = io_attack(
            &take(&d, 0..known),
            &take(&d, 0..known),
            &take(&d, known..120),
        )
        .unwrap();
        let err = std_of_diff(&take(&d, known..120), &rec).unwrap();
        assert!(err.iter().all(|&v| v < 1e-9), "{err:?}");

        // Invertible linear map plus offset.
        let a =
            Matrix::from_vec(3, 3, vec![0.8, -0.6, 0.0, 0.6, 0.8, 0.0, 0.1, -0.2, 1.0]).unwrap();
        let mut mapped = d.matmul(&a.transpose()).unwrap();
        for v in mapped.as_mut_slice() {
            *v += 2.5;
        }
        let rec = io_attack(
            &take(&d, 0..known),
            &take(&mapped, 0..known),
            &take(&mapped, known..120),
        )
        .unwrap();
        let err = std_of_diff(&take(&d, known..120), &rec).unwrap();
        assert!(err.iter().all(|&v| v < 1e-6), "{err:?}");
    }

    #[test]
    fn io_attack_needs_enough_known_rows() {
        let d = uniform_matrix(10, 3, 5);
        let few = Matrix::from_vec(3, 3, d.as_slice()[..9].to_vec()).unwrap();
        assert!(matches!(
            io_attack(&few, &few, &d),
            Err(Error::InsufficientRows { .. })
        ));
    }

    #[test]
    fn fastica_separates_two_uniform_sources() {
        // Two independent uniform sources, mixed by a rotation-ish matrix.
        let m = 4000;
        let mut rng = stream(6, 0, Purpose::Sampling);
        let mut sources = Matrix::zeros(m, 2);
        for i in 0..m {
            sources.set(i, 0, open_unit(&mut rng) * 2.0 - 1.0);
            sources.set(i, 1, open_unit(&mut rng) * 2.0 - 1.0);
        }
        let mix = Matrix::from_vec(2, 2, vec![0.9, 0.4, -0.3, 0.8]).unwrap();
        let observed = sources.matmul(&mix.transpose()).unwrap();

        let rec = ica_attack(&observed, 7).unwrap();
        assert!(rec.converged);
        for s in 0..2 {
            let source_col = sources.column(s);
            let best = (0..2)
                .map(|c| abs_correlation(&source_col, rec.sources.row(c)))
                .fold(0.0, f64::max);
            assert!(best > 0.9, "source {s} best |r| = {best}");
        }
    }

    #[test]
    fn whitened_data_has_identity_covariance() {
        // Sources are an orthonormal mix of the whitened data, so their
        // covariance inherits the whitening accuracy.
        let d = uniform_matrix(900, 3, 8);
        let rec = ica_attack(&d, 3).unwrap();
        let s_t = rec.sources.transpose();
        let cov = crate::stats::sample_covariance(&s_t).unwrap();
        assert!(cov.max_abs_diff_identity() < 1e-6, "{cov:?}");
    }

    #[test]
    fn gaussian_sources_are_an_accepted_outcome() {
        // Mixed Gaussians are not identifiable by ICA; the attack must still
        // return a finite reconstruction, converged or not.
        let m = 600;
        let mut rng = stream(21, 0, Purpose::Sampling);
        let mut data = Matrix::zeros(m, 2);
        for i in 0..m {
            let a = normal(&mut rng, 1.0);
            let b = normal(&mut rng, 1.0);
            data.set(i, 0, 0.8 * a + 0.3 * b);
            data.set(i, 1, -0.2 * a + 0.9 * b);
        }
        let rec = ica_attack(&data, 4).unwrap();
        assert!(rec.data.as_slice().iter().all(|v| v.is_finite()));
        let report = evaluate(
            &DataMatrix::unlabeled(data.clone()),
            &DataMatrix::unlabeled(data),
            0.1,
            4,
        )
        .unwrap();
        assert!(report.ica_min.is_finite());
    }

    #[test]
    fn evaluate_identity_pair_reports_small_ni_io() {
        let d = DataMatrix::unlabeled(uniform_matrix(300, 2, 9));
        let report = evaluate(&d, &d, 0.1, 11).unwrap();
        assert!(report.ni_min < 1e-9);
        assert!(report.io_min < 1e-6);
        assert_eq!(report.ni.len(), 2);
        assert_eq!(report.io.len(), 2);
        assert_eq!(report.ica.len(), 2);
        assert!(report.known_fraction == 0.1);
    }

    #[test]
    fn evaluate_rejects_shape_mismatch_and_bad_fraction() {
        let a = DataMatrix::unlabeled(uniform_matrix(40, 2, 10));
        let b = DataMatrix::unlabeled(uniform_matrix(40, 3, 10));
        assert!(evaluate(&a, &b, 0.1, 0).is_err());
        assert!(evaluate(&a, &a, 0.0, 0).is_err());
        assert!(evaluate(&a, &a, 1.0, 0).is_err());
    }

    #[test]
    fn attribute_permutation_permutes_report() {
        let d = uniform_matrix(400, 3, 12);
        let mut pert = d.clone();
        let mut rng = stream(13, 0, Purpose::Expansion);
        for v in pert.as_mut_slice() {
            *v += normal(&mut rng, 0.5);
        }
        let base = evaluate(
            &DataMatrix::unlabeled(d.clone()),
            &DataMatrix::unlabeled(pert.clone()),
            0.1,
            5,
        )
        .unwrap();

        // Swap columns 0 and 2 in both datasets.
        let swap = |m: &Matrix| {
            let mut out = m.clone();
            for i in 0..m.rows() {
                out.set(i, 0, m.get(i, 2));
                out.set(i, 2, m.get(i, 0));
            }
            out
        };
        let swapped = evaluate(
            &DataMatrix::unlabeled(swap(&d)),
            &DataMatrix::unlabeled(swap(&pert)),
            0.1,
            5,
        )
        .unwrap();
        assert!(libm::fabs(base.ni[0] - swapped.ni[2]) < 1e-12);
        assert!(libm::fabs(base.ni[2] - swapped.ni[0]) < 1e-12);
        assert!(libm::fabs(base.ni[1] - swapped.ni[1]) < 1e-12);
        assert!(libm::fabs(base.io_min - swapped.io_min) < 1e-6);
        assert!(base.ni.iter().all(|&v| v >= 0.0));
        assert!(base.io.iter().all(|&v| v >= 0.0));
        assert!(base.ica.iter().all(|&v| v >= 0.0));
    }
}
