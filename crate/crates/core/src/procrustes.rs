//! The projection Procrustes problem
//!
//! ```text
//! minimize (1/n) ||B1 Z1 - B2 Z2||_F^2   subject to  B_i B_i^T = I_k
//! ```
//!
//! for whitened inputs (`Z_i Z_i^T = n I`). The minimizer is read off the
//! `k`-truncated SVD `W1 Σ W2^T` of `Z1 Z2^T` as `B_i = W_i^T`, and the
//! optimal value is `2k - (2/n) Σ_{l ≤ k} σ_l(Z1 Z2^T)`.

use crate::error::{McaError, Result};
use crate::numlin::{max_abs_diff_identity, truncated_svd, Matrix, Vector};

/// Maximum allowed deviation of `(1/n) Z Z^T` from the identity.
pub const WHITENING_TOL: f64 = 1e-6;

/// Relative gap `|σ_k - σ_{k+1}| ≤ TIE_TOL · σ_1` flagged as a truncation tie.
pub const TIE_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct ProcrustesSolution {
    /// `k × r1`, orthonormal rows.
    pub b1: Matrix,
    /// `k × r2`, orthonormal rows.
    pub b2: Matrix,
    pub objective: f64,
    /// The `k` leading singular values of `(1/n) Z1 Z2^T`.
    pub top_singular_values: Vector,
    /// Set when the `k`-th and `(k+1)`-th singular values coincide, in which
    /// case the optimal subspace is not unique.
    pub tie: bool,
}

/// Largest entry of `|(1/n) Z Z^T - I|`.
pub fn whitening_deviation(z: &Matrix) -> f64 {
    let n = z.ncols() as f64;
    let gram = z * z.transpose() / n;
    max_abs_diff_identity(&gram)
}

fn check_whitened(z: &Matrix) -> Result<()> {
    let deviation = whitening_deviation(z);
    if deviation > WHITENING_TOL || !deviation.is_finite() {
        return Err(McaError::NotWhitened { deviation });
    }
    Ok(())
}

fn check_pair(z1: &Matrix, z2: &Matrix) -> Result<()> {
    if z1.ncols() != z2.ncols() {
        return Err(McaError::DimensionMismatch {
            context: "matched sample size",
            expected: z1.ncols(),
            found: z2.ncols(),
        });
    }
    if z1.ncols() == 0 {
        return Err(McaError::EmptySample);
    }
    Ok(())
}

/// Solves the projection Procrustes problem for whitened `Z1` (`r1 × n`) and
/// `Z2` (`r2 × n`).
pub fn projection_procrustes(z1: &Matrix, z2: &Matrix, k: usize) -> Result<ProcrustesSolution> {
    check_pair(z1, z2)?;
    if k == 0 {
        return Err(McaError::InvalidArgument(
            "common dimension k must be at least 1".into(),
        ));
    }
    check_whitened(z1)?;
    check_whitened(z2)?;
    let (r1, r2) = (z1.nrows(), z2.nrows());
    if k > r1.min(r2) {
        return Err(McaError::Infeasible { k, r1, r2 });
    }

    let n = z1.ncols() as f64;
    let cross = z1 * z2.transpose();
    let svd = truncated_svd(&cross, k)?;
    let b1 = svd.left.transpose();
    let b2 = svd.right.transpose();

    let spectrum = &svd.spectrum;
    let tie = k < spectrum.len() && (spectrum[k - 1] - spectrum[k]).abs() <= TIE_TOL * spectrum[0];

    let objective = procrustes_objective(&b1, &b2, z1, z2)?;
    Ok(ProcrustesSolution {
        b1,
        b2,
        objective,
        top_singular_values: svd.sigma / n,
        tie,
    })
}

/// Evaluates `(1/n) ||B1 Z1 - B2 Z2||_F^2`.
pub fn procrustes_objective(b1: &Matrix, b2: &Matrix, z1: &Matrix, z2: &Matrix) -> Result<f64> {
    check_pair(z1, z2)?;
    if b1.ncols() != z1.nrows() {
        return Err(McaError::DimensionMismatch {
            context: "B1 columns vs Z1 rows",
            expected: z1.nrows(),
            found: b1.ncols(),
        });
    }
    if b2.ncols() != z2.nrows() {
        return Err(McaError::DimensionMismatch {
            context: "B2 columns vs Z2 rows",
            expected: z2.nrows(),
            found: b2.ncols(),
        });
    }
    if b1.nrows() != b2.nrows() {
        return Err(McaError::DimensionMismatch {
            context: "B1 rows vs B2 rows",
            expected: b1.nrows(),
            found: b2.nrows(),
        });
    }
    let diff = b1 * z1 - b2 * z2;
    Ok(diff.norm_squared() / z1.ncols() as f64)
}

/// Singular values of `(1/n) Z1 Z2^T`, nonincreasing. For whitened inputs
/// these are the cosines of the principal angles between the row spaces of
/// `Z1` and `Z2`.
pub fn cross_singular_values(z1: &Matrix, z2: &Matrix) -> Result<Vector> {
    check_pair(z1, z2)?;
    let n = z1.ncols() as f64;
    let mut s: Vec<f64> = (z1 * z2.transpose() / n)
        .singular_values()
        .iter()
        .copied()
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(Vector::from_vec(s))
}

/// Optimal objective value for every feasible `k = 1..=min(r1, r2)`:
/// entry `k-1` is `Σ_{l ≤ k} (2 - 2 σ_l)` with `σ_l` the singular values of
/// `(1/n) Z1 Z2^T`.
pub fn optimal_objective_by_k(z1: &Matrix, z2: &Matrix) -> Result<Vec<f64>> {
    let s = cross_singular_values(z1, z2)?;
    let mut acc = 0.0;
    Ok(s.iter()
        .map(|&sigma| {
            acc += 2.0 - 2.0 * sigma;
            acc
        })
        .collect())
}
