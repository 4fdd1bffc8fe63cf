//! Homogeneous `(n+1) x (n+1)` transformation generators and application.
//!
//! Translation coefficients are uniform in the open interval `(0, 1)`
//! (the data is z-score normalized, so unit-bounded shifts are on the scale
//! of one standard deviation). Reflections are diagonal sign matrices.
//! Rotation is the product of all `C(n,2)` subplane rotations sharing one
//! angle, concatenated over index pairs `(i, j)`, `i < j`, in ascending
//! lexicographic order; the result is orthonormal.

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::{HomogeneousData, Matrix};
use crate::rng::open_unit;

/// How the reflection matrix treats the chosen axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReflectionMode {
    /// `+1` on the chosen axis, `-1` on every other data axis.
    #[default]
    AllButAxis,
    /// `-1` only on the chosen axis, `+1` elsewhere.
    SingleAxis,
}

/// Homogeneous translation with i.i.d. coefficients in `(0, 1)`.
pub fn make_translation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Matrix> {
    if n < 2 {
        return Err(Error::InvalidDimension { got: n, min: 2 });
    }
    let mut t = Matrix::identity(n + 1);
    for i in 0..n {
        t.set(i, n, open_unit(rng));
    }
    Ok(t)
}

/// Homogeneous reflection about data axis `ax` (1-based, `1 <= ax <= n`).
pub fn make_reflection(n: usize, ax: usize, mode: ReflectionMode) -> Result<Matrix> {
    if n < 2 {
        return Err(Error::InvalidDimension { got: n, min: 2 });
    }
    if ax < 1 || ax > n {
        return Err(Error::InvalidAxis { axis: ax, attrs: n });
    }
    let mut r = Matrix::identity(n + 1);
    for j in 0..n {
        let on_axis = j == ax - 1;
        let sign = match mode {
            ReflectionMode::AllButAxis => {
                if on_axis {
                    1.0
                } else {
                    -1.0
                }
            }
            ReflectionMode::SingleAxis => {
                if on_axis {
                    -1.0
                } else {
                    1.0
                }
            }
        };
        r.set(j, j, sign);
    }
    Ok(r)
}

/// Concatenated-subplane rotation by `theta` in homogeneous form.
pub fn make_rotation(n: usize, theta: f64) -> Result<Matrix> {
    if n < 2 {
        return Err(Error::InvalidDimension { got: n, min: 2 });
    }
    if !theta.is_finite() {
        return Err(Error::NonFinite("rotation angle"));
    }
    let (sin, cos) = (libm::sin(theta), libm::cos(theta));
    let mut m = Matrix::identity(n + 1);
    for i in 0..n {
        for j in (i + 1)..n {
            let mut r = Matrix::identity(n + 1);
            r.set(i, i, cos);
            r.set(j, i, sin);
            r.set(i, j, -sin);
            r.set(j, j, cos);
            m = m.matmul(&r)?;
        }
    }
    Ok(m)
}

/// Applies an `(n+1) x (n+1)` transform to homogeneous data and drops the
/// homogeneous row, returning the transformed `n x m` coordinates.
pub fn apply_transform(m: &Matrix, data: &HomogeneousData) -> Result<Matrix> {
    let dim = data.attrs() + 1;
    if m.rows() != dim || m.cols() != dim {
        return Err(Error::DimensionMismatch {
            op: "apply_transform",
            left_rows: m.rows(),
            left_cols: m.cols(),
            right_rows: dim,
            right_cols: data.records(),
        });
    }
    let product = m.matmul(data.as_matrix())?;
    let n = data.attrs();
    let records = data.records();
    let mut out = Matrix::zeros(n, records);
    for i in 0..n {
        for c in 0..records {
            out.set(i, c, product.get(i, c));
        }
    }
    Ok(out)
}
