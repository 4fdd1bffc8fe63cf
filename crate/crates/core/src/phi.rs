//! Optimal perturbation-parameter search under the Φ-separation privacy
//! model.
//!
//! For every candidate `(reflection axis, rotation angle)` the search scores
//! the *local minimum privacy guarantee* φ: the smallest per-attribute sample
//! variance of `original - perturbed` over the normalized data. The winning
//! candidate maximizes that minimum (largest guarantee for the most
//! vulnerable attribute).
//!
//! Two routes compute φ:
//!
//! * [`phi_direct`] actually perturbs the normalized data and measures the
//!   difference variances. It is the authoritative definition, and the test
//!   oracle for the fast route.
//! * [`phi_shortcut`] evaluates the same quantity from the correlation matrix
//!   alone, in O(n^3) per candidate instead of O(n^2 m), via the variance
//!   identity `Var(x - p) = Var(x) + Var(p) - 2 Cov(x, p)`. With `A = M x RF`
//!   and `C` the homogeneous-augmented correlation matrix this is
//!   `phi_j = 1 + diag(A C A^T)_j - 2 (A C)_j,j`; the cross term enters with
//!   coefficient -2 (a plain `+` would not reproduce the difference
//!   variance, which the oracle equivalence tests pin down). Translation
//!   shifts every value of an attribute equally, so it never affects φ.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::{HomogeneousData, Matrix};
use crate::stats::GlobalStats;
use crate::transform::{
    apply_transform, make_reflection, make_rotation, make_translation, ReflectionMode,
};

/// Angles excluded from the search grid, in integer degrees.
pub const EXCLUDED_DEGREES: [u32; 7] = [30, 45, 60, 90, 120, 135, 150];

/// The local-minimum-privacy-guarantee grid over all candidates.
#[derive(Debug, Clone)]
pub struct PhiGrid {
    /// `n x T` matrix; `values[ax-1][t]` is φ for reflection axis `ax` at
    /// angle `angles[t]`.
    pub values: Matrix,
    /// Candidate angles in radians.
    pub angles: Vec<f64>,
    /// Per-angle minimum over axes.
    pub per_theta_min: Vec<f64>,
}

/// Result of the parameter search.
#[derive(Debug, Clone)]
pub struct OptimalParams {
    /// Achieved optimal privacy guarantee Φ.
    pub phi: f64,
    /// Winning rotation angle, radians.
    pub theta: f64,
    /// Winning reflection axis, 1-based.
    pub axis: usize,
    pub rotation: Matrix,
    pub reflection: Matrix,
    pub translation: Matrix,
}

/// The candidate rotation angles: integer degrees `1..=179` minus
/// [`EXCLUDED_DEGREES`], converted to radians (172 candidates).
pub fn angle_grid() -> Vec<f64> {
    (1u32..=179)
        .filter(|d| !EXCLUDED_DEGREES.contains(d))
        .map(|d| d as f64 * core::f64::consts::PI / 180.0)
        .collect()
}

/// Augments an `n x n` correlation matrix to `(n+1) x (n+1)` homogeneous form
/// with a zero row/column (the constant coordinate has zero variance).
pub fn homogeneous_corr(corr: &Matrix) -> Matrix {
    let n = corr.rows();
    let mut out = Matrix::zeros(n + 1, n + 1);
    for i in 0..n {
        for j in 0..n {
            out.set(i, j, corr.get(i, j));
        }
    }
    out
}

/// Covariance-shortcut evaluation of φ for one `(rotation, reflection)`
/// candidate. `corr_hom` is the homogeneous-augmented correlation matrix;
/// the homogeneous entry is excluded from the minimum.
pub fn phi_shortcut(corr_hom: &Matrix, rotation: &Matrix, reflection: &Matrix) -> Result<f64> {
    let dim = corr_hom.rows();
    if corr_hom.cols() != dim || rotation.rows() != dim || reflection.rows() != dim {
        return Err(Error::DimensionMismatch {
            op: "phi_shortcut",
            left_rows: corr_hom.rows(),
            left_cols: corr_hom.cols(),
            right_rows: rotation.rows(),
            right_cols: reflection.rows(),
        });
    }
    let a = rotation.matmul(reflection)?;
    let ac = a.matmul(corr_hom)?;
    let n = dim - 1;
    let mut min = f64::INFINITY;
    for j in 0..n {
        let var_p: f64 = ac.row(j).iter().zip(a.row(j)).map(|(x, y)| x * y).sum();
        let cross = ac.get(j, j);
        let v = 1.0 + var_p - 2.0 * cross;
        if v < min {
            min = v;
        }
    }
    Ok(min)
}

/// Direct evaluation of φ: perturb the normalized data with
/// `rotation x translation x reflection` and return the minimum per-attribute
/// sample variance of the difference. Authoritative oracle for
/// [`phi_shortcut`].
pub fn phi_direct(
    normalized: &Matrix,
    rotation: &Matrix,
    translation: &Matrix,
    reflection: &Matrix,
) -> Result<f64> {
    let (m, n) = (normalized.rows(), normalized.cols());
    if m < 2 {
        return Err(Error::InsufficientRows { got: m, min: 2 });
    }
    let composite = rotation.matmul(translation)?.matmul(reflection)?;
    let homog = HomogeneousData::from_records(normalized)?;
    let transformed = apply_transform(&composite, &homog)?;
    let mut min = f64::INFINITY;
    for j in 0..n {
        let mut sum = 0.0;
        for i in 0..m {
            sum += normalized.get(i, j) - transformed.get(j, i);
        }
        let mean = sum / m as f64;
        let mut acc = 0.0;
        for i in 0..m {
            let d = (normalized.get(i, j) - transformed.get(j, i)) - mean;
            acc += d * d;
        }
        let var = acc / (m as f64 - 1.0);
        if var < min {
            min = var;
        }
    }
    Ok(min)
}

/// Evaluates the full φ grid (every axis at every grid angle) from the
/// correlation matrix.
pub fn compute_phi_grid(corr: &Matrix, mode: ReflectionMode) -> Result<PhiGrid> {
    let n = corr.rows();
    if n < 2 {
        return Err(Error::InvalidDimension { got: n, min: 2 });
    }
    let corr_hom = homogeneous_corr(corr);
    let angles = angle_grid();
    let reflections: Vec<Matrix> = (1..=n)
        .map(|ax| make_reflection(n, ax, mode))
        .collect::<Result<_>>()?;
    let mut values = Matrix::zeros(n, angles.len());
    let mut per_theta_min = vec![f64::INFINITY; angles.len()];
    for (t, &theta) in angles.iter().enumerate() {
        let rotation = make_rotation(n, theta)?;
        for (ax_idx, reflection) in reflections.iter().enumerate() {
            let phi = phi_shortcut(&corr_hom, &rotation, reflection)?;
            values.set(ax_idx, t, phi);
            if phi < per_theta_min[t] {
                per_theta_min[t] = phi;
            }
        }
    }
    Ok(PhiGrid {
        values,
        angles,
        per_theta_min,
    })
}

/// Searches the grid for the globally optimal parameters and draws a fresh
/// translation matrix from `rng`.
///
/// Ties in Φ break toward the smallest angle, then the smallest axis, so for
/// a fixed seed the result is fully deterministic.
pub fn search_optimal<R: Rng + ?Sized>(
    stats: &GlobalStats,
    mode: ReflectionMode,
    rng: &mut R,
) -> Result<OptimalParams> {
    let n = stats.attr_count();
    let translation = make_translation(n, rng)?;
    let grid = compute_phi_grid(&stats.corr, mode)?;

    let mut best_t = 0;
    for (t, &phi) in grid.per_theta_min.iter().enumerate() {
        if phi > grid.per_theta_min[best_t] {
            best_t = t;
        }
    }
    let mut best_ax = 0;
    for ax in 0..n {
        if grid.values.get(ax, best_t) < grid.values.get(best_ax, best_t) {
            best_ax = ax;
        }
    }

    let theta = grid.angles[best_t];
    let axis = best_ax + 1;
    Ok(OptimalParams {
        phi: grid.per_theta_min[best_t],
        theta,
        axis,
        rotation: make_rotation(n, theta)?,
        reflection: make_reflection(n, axis, mode)?,
        translation,
    })
}
