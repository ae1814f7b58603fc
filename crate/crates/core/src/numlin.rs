//! Dense linear-algebra substrate: sample statistics, thin and truncated SVD,
//! numerical rank and pseudoinverse application.
//!
//! Data matrices are stored one sample per column (`d × n`), matching the
//! column-major layout of [`nalgebra::DMatrix`].

use nalgebra::{DMatrix, DVector};

use crate::error::{McaError, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative threshold on singular values below which they are treated as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Thin singular value decomposition `m = U diag(sigma) V^T` keeping only the
/// numerically nonzero singular values.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: Matrix,
    pub sigma: Vector,
    pub v: Matrix,
}

impl ThinSvd {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn reconstruct(&self) -> Matrix {
        &self.u * Matrix::from_diagonal(&self.sigma) * self.v.transpose()
    }
}

/// Per-coordinate average of the columns.
pub fn sample_mean(data: &Matrix) -> Result<Vector> {
    if data.ncols() == 0 || data.nrows() == 0 {
        return Err(McaError::EmptySample);
    }
    Ok(data.column_mean())
}

/// Biased sample covariance `(1/n) Σ (x_j - mean)(x_j - mean)^T`.
///
/// The result is symmetrized as `(C + C^T) / 2`, which makes it exactly
/// symmetric in floating point.
pub fn sample_covariance(data: &Matrix, mean: &Vector) -> Result<Matrix> {
    if data.ncols() == 0 {
        return Err(McaError::EmptySample);
    }
    if mean.len() != data.nrows() {
        return Err(McaError::DimensionMismatch {
            context: "sample_covariance mean",
            expected: data.nrows(),
            found: mean.len(),
        });
    }
    let centered = center_columns(data, mean);
    let n = data.ncols() as f64;
    let mut cov = &centered * centered.transpose();
    cov /= n;
    let sym = (&cov + cov.transpose()) * 0.5;
    Ok(sym)
}

/// Subtracts `mean` from every column.
pub fn center_columns(data: &Matrix, mean: &Vector) -> Matrix {
    let mut out = data.clone();
    for mut col in out.column_iter_mut() {
        col -= mean;
    }
    out
}

/// Full SVD with singular values sorted nonincreasing.
fn sorted_svd(m: &Matrix) -> (Matrix, Vector, Matrix) {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let s = svd.singular_values;

    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));

    let u = Matrix::from_fn(u.nrows(), order.len(), |i, j| u[(i, order[j])]);
    let v = Matrix::from_fn(v_t.ncols(), order.len(), |i, j| v_t[(order[j], i)]);
    let s = Vector::from_iterator(order.len(), order.iter().map(|&j| s[j]));
    (u, s, v)
}

fn check_finite(m: &Matrix, context: &'static str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(McaError::InvalidArgument(format!(
            "{context}: non-finite entry"
        )))
    }
}

/// Thin SVD retaining the singular values `σ_l > rank_tol · σ_1`.
pub fn thin_svd(m: &Matrix, rank_tol: f64) -> Result<ThinSvd> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(McaError::EmptySample);
    }
    check_finite(m, "thin_svd")?;
    let (u, s, v) = sorted_svd(m);
    let top = s[0];
    if top <= 0.0 {
        return Err(McaError::RankZero);
    }
    let r = s.iter().take_while(|&&x| x > rank_tol * top).count();
    Ok(ThinSvd {
        u: u.columns(0, r).into_owned(),
        sigma: s.rows(0, r).into_owned(),
        v: v.columns(0, r).into_owned(),
    })
}

/// Number of singular values above `rank_tol · σ_1`; zero for the zero matrix.
pub fn numerical_rank(m: &Matrix, rank_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let s = m.singular_values();
    let top = s.max();
    if top <= 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > rank_tol * top).count()
}

/// Orthonormal basis (as columns) of the null space of `m`, using the same
/// relative rank threshold as [`numerical_rank`].
pub fn null_space(m: &Matrix, rank_tol: f64) -> Matrix {
    let cols = m.ncols();
    // Pad to at least `cols` rows so the SVD returns a full right basis.
    let padded = if m.nrows() < cols {
        let mut p = Matrix::zeros(cols, cols);
        p.rows_mut(0, m.nrows()).copy_from(m);
        p
    } else {
        m.clone()
    };
    let (_, s, v) = sorted_svd(&padded);
    let top = s[0];
    let r = if top <= 0.0 {
        0
    } else {
        s.iter().take_while(|&&x| x > rank_tol * top).count()
    };
    v.columns(r, cols - r).into_owned()
}

/// The `k` leading singular triplets of `m`.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    pub left: Matrix,
    pub sigma: Vector,
    pub right: Matrix,
    /// All singular values of `m`, nonincreasing. Kept so callers can inspect
    /// the spectrum around the truncation point.
    pub spectrum: Vector,
}

pub fn truncated_svd(m: &Matrix, k: usize) -> Result<TruncatedSvd> {
    let min_dim = m.nrows().min(m.ncols());
    if k == 0 || k > min_dim {
        return Err(McaError::InvalidArgument(format!(
            "truncation rank {k} must lie in 1..={min_dim}"
        )));
    }
    check_finite(m, "truncated_svd")?;
    let (u, s, v) = sorted_svd(m);
    Ok(TruncatedSvd {
        left: u.columns(0, k).into_owned(),
        sigma: s.rows(0, k).into_owned(),
        right: v.columns(0, k).into_owned(),
        spectrum: s,
    })
}

/// Applies the Moore–Penrose pseudoinverse `V diag(1/σ) U^T` to `y`.
pub fn pinv_apply(svd: &ThinSvd, y: &Vector) -> Result<Vector> {
    if y.len() != svd.u.nrows() {
        return Err(McaError::DimensionMismatch {
            context: "pinv_apply",
            expected: svd.u.nrows(),
            found: y.len(),
        });
    }
    let mut coeffs = svd.u.transpose() * y;
    coeffs.component_div_assign(&svd.sigma);
    Ok(&svd.v * coeffs)
}

/// Largest absolute entry of `m^T m - I`.
pub fn orthonormality_defect(m: &Matrix) -> f64 {
    let g = m.transpose() * m;
    max_abs_diff_identity(&g)
}

/// Largest absolute entry of `m - I` for a square `m`.
pub fn max_abs_diff_identity(m: &Matrix) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((m[(i, j)] - target).abs());
        }
    }
    worst
}
