//! Matching component analysis.
//!
//! Step 1 whitens each domain: with sample mean `x̄`, covariance
//! `Σ = V Λ V^T` (thin SVD), column `j` of `Z` is `Λ^{-1/2} V^T (x_j - x̄)`.
//! Step 2 solves the projection Procrustes problem on `(Z1, Z2)` and folds the
//! result back into affine maps `A_i = W_i^T Λ_i^{-1/2} V_i^T`,
//! `b_i = -A_i x̄_i`.

use serde::{Deserialize, Serialize};

use crate::error::{McaError, Result};
use crate::numlin::{
    center_columns, pinv_apply, sample_covariance, sample_mean, thin_svd, Matrix, Vector,
    DEFAULT_RANK_TOL,
};
use crate::procrustes::{cross_singular_values, projection_procrustes};

/// Principal-angle cosines at or above `1 - DEFAULT_MATCH_TOL` count as an
/// exact intersection in [`auto_k`]. Genuine intersections sit at roundoff
/// level (about 1e-13 for the 4/5/9 phase study), while non-intersecting row
/// spaces of near-square samples fall below 1e-6 in several percent of
/// draws, so the threshold stays close to roundoff.
pub const DEFAULT_MATCH_TOL: f64 = 1e-12;

/// The whitening transform of one domain.
#[derive(Debug, Clone)]
pub struct Whitening {
    pub mean: Vector,
    /// `d × r`, orthonormal columns spanning the image of the covariance.
    pub basis: Matrix,
    /// Positive covariance eigenvalues, nonincreasing.
    pub eigenvalues: Vector,
}

impl Whitening {
    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `Λ^{-1/2} V^T`, the linear part of the whitening map.
    pub fn operator(&self) -> Matrix {
        let mut op = self.basis.transpose();
        for (mut row, &lambda) in op.row_iter_mut().zip(self.eigenvalues.iter()) {
            row /= lambda.sqrt();
        }
        op
    }

    pub fn apply(&self, data: &Matrix) -> Result<Matrix> {
        check_width(data, self.dim(), "whitening input")?;
        Ok(self.operator() * center_columns(data, &self.mean))
    }
}

/// `g(x) = A x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub a: Matrix,
    pub b: Vector,
}

impl AffineMap {
    pub fn new(a: Matrix, b: Vector) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(McaError::DimensionMismatch {
                context: "affine offset",
                expected: a.nrows(),
                found: b.len(),
            });
        }
        if a.iter().chain(b.iter()).any(|x| !x.is_finite()) {
            return Err(McaError::InvalidArgument(
                "affine map has non-finite entries".into(),
            ));
        }
        Ok(Self { a, b })
    }

    /// The zero map `R^d -> R^1`.
    pub fn zero(d: usize) -> Self {
        Self {
            a: Matrix::zeros(1, d),
            b: Vector::zeros(1),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        &self.a * x + &self.b
    }
}

fn check_width(data: &Matrix, expected: usize, context: &'static str) -> Result<()> {
    if data.nrows() != expected {
        return Err(McaError::DimensionMismatch {
            context,
            expected,
            found: data.nrows(),
        });
    }
    Ok(())
}

/// Applies `map` to every column of `data`.
pub fn transform(map: &AffineMap, data: &Matrix) -> Result<Matrix> {
    check_width(data, map.input_dim(), "transform input")?;
    let mut out = &map.a * data;
    for mut col in out.column_iter_mut() {
        col += &map.b;
    }
    Ok(out)
}

/// Algorithm step 1: whitening of one domain.
pub fn normalize(data: &Matrix, rank_tol: f64) -> Result<(Whitening, Matrix)> {
    if data.ncols() < 2 {
        return Err(McaError::InvalidArgument(format!(
            "at least 2 samples required, got {}",
            data.ncols()
        )));
    }
    let mean = sample_mean(data)?;
    let cov = sample_covariance(data, &mean)?;
    let svd = thin_svd(&cov, rank_tol)?;
    let whitening = Whitening {
        mean,
        basis: svd.u,
        eigenvalues: svd.sigma,
    };
    let z = whitening.apply(data)?;
    Ok((whitening, z))
}

/// Which of the two domains a map belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    One,
    Two,
}

impl TryFrom<u8> for Side {
    type Error = McaError;

    fn try_from(value: u8) -> Result<Self> {
        match value {
            1 => Ok(Side::One),
            2 => Ok(Side::Two),
            other => Err(McaError::InvalidArgument(format!(
                "side must be 1 or 2, got {other}"
            ))),
        }
    }
}

/// A fitted MCA model: two affine maps into a common `k`-dimensional domain.
#[derive(Debug, Clone)]
pub struct McaModel {
    pub map1: AffineMap,
    pub map2: AffineMap,
    pub k: usize,
    /// `(1/n) ||B1 Z1 - B2 Z2||_F^2` on the matched sample.
    pub objective: f64,
    /// The `k` leading singular values of `(1/n) Z1 Z2^T`.
    pub top_singular_values: Vector,
    pub tie: bool,
    pub whitening1: Whitening,
    pub whitening2: Whitening,
}

impl McaModel {
    pub fn map(&self, side: Side) -> &AffineMap {
        match side {
            Side::One => &self.map1,
            Side::Two => &self.map2,
        }
    }

    pub fn whitening(&self, side: Side) -> &Whitening {
        match side {
            Side::One => &self.whitening1,
            Side::Two => &self.whitening2,
        }
    }
}

fn check_matched(x1: &Matrix, x2: &Matrix) -> Result<()> {
    if x1.ncols() != x2.ncols() {
        return Err(McaError::DimensionMismatch {
            context: "matched sample size",
            expected: x1.ncols(),
            found: x2.ncols(),
        });
    }
    Ok(())
}

fn assemble_map(whitening: &Whitening, b: &Matrix) -> AffineMap {
    let a = b * whitening.operator();
    let offset = -(&a * &whitening.mean);
    AffineMap { a, b: offset }
}

/// Fits MCA on matched samples `x1` (`d1 × n`) and `x2` (`d2 × n`).
pub fn mca_fit(x1: &Matrix, x2: &Matrix, k: usize, rank_tol: f64) -> Result<McaModel> {
    check_matched(x1, x2)?;
    if k == 0 {
        return Err(McaError::InvalidArgument(
            "common dimension k must be at least 1".into(),
        ));
    }
    let (w1, z1) = normalize(x1, rank_tol)?;
    let (w2, z2) = normalize(x2, rank_tol)?;
    let (r1, r2) = (w1.rank(), w2.rank());
    if k > r1.min(r2) {
        return Err(McaError::Infeasible { k, r1, r2 });
    }
    let sol = projection_procrustes(&z1, &z2, k)?;
    Ok(McaModel {
        map1: assemble_map(&w1, &sol.b1),
        map2: assemble_map(&w2, &sol.b2),
        k,
        objective: sol.objective,
        top_singular_values: sol.top_singular_values,
        tie: sol.tie,
        whitening1: w1,
        whitening2: w2,
    })
}

/// Number of principal angles between the row spaces of `Z1` and `Z2` whose
/// cosine is at least `1 - match_tol`, i.e. `dim(im Z1^T ∩ im Z2^T)`.
pub fn auto_k(x1: &Matrix, x2: &Matrix, rank_tol: f64, match_tol: f64) -> Result<usize> {
    check_matched(x1, x2)?;
    let (_, z1) = normalize(x1, rank_tol)?;
    let (_, z2) = normalize(x2, rank_tol)?;
    count_matched_directions(&z1, &z2, match_tol)
}

fn count_matched_directions(z1: &Matrix, z2: &Matrix, match_tol: f64) -> Result<usize> {
    let cosines = cross_singular_values(z1, z2)?;
    Ok(cosines.iter().filter(|&&c| c >= 1.0 - match_tol).count())
}

/// Output of the exact-matching decoder.
#[derive(Debug, Clone)]
pub struct ExactDecoding {
    pub map1: AffineMap,
    pub map2: AffineMap,
    /// Data-dependent common dimension; zero when the row spaces of the
    /// whitened samples intersect trivially.
    pub k: usize,
    pub model: Option<McaModel>,
}

/// MCA with the data-dependent choice `k = dim(im Z1^T ∩ im Z2^T)`.
///
/// When `k = 0` both maps are the zero map into `R^1`.
pub fn exact_decoder(
    x1: &Matrix,
    x2: &Matrix,
    rank_tol: f64,
    match_tol: f64,
) -> Result<ExactDecoding> {
    check_matched(x1, x2)?;
    let (_, z1) = normalize(x1, rank_tol)?;
    let (_, z2) = normalize(x2, rank_tol)?;
    let k = count_matched_directions(&z1, &z2, match_tol)?;
    if k == 0 {
        return Ok(ExactDecoding {
            map1: AffineMap::zero(x1.nrows()),
            map2: AffineMap::zero(x2.nrows()),
            k: 0,
            model: None,
        });
    }
    let model = mca_fit(x1, x2, k, rank_tol)?;
    Ok(ExactDecoding {
        map1: model.map1.clone(),
        map2: model.map2.clone(),
        k,
        model: Some(model),
    })
}

/// Pseudoinverse of the affine map of `side` applied to common-domain points:
/// `x = x̄ + A^+ (z - A x̄ - b)`.
pub fn reconstruct(model: &McaModel, side: Side, common_points: &Matrix) -> Result<Matrix> {
    let map = model.map(side);
    check_width(common_points, map.output_dim(), "common-domain points")?;
    let mean = &model.whitening(side).mean;
    let svd = thin_svd(&map.a, DEFAULT_RANK_TOL)?;
    let anchor = map.apply(mean);
    let mut out = Matrix::zeros(map.input_dim(), common_points.ncols());
    for (j, z) in common_points.column_iter().enumerate() {
        let x = pinv_apply(&svd, &(z - &anchor))? + mean;
        out.set_column(j, &x);
    }
    Ok(out)
}

/// Flat serialized form of a fitted model. Matrices are stored row-major as
/// nested arrays; fields appear in the order `d1, d2, k, a1, b1, a2, b2,
/// objective`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub d1: usize,
    pub d2: usize,
    pub k: usize,
    pub a1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub a2: Vec<Vec<f64>>,
    pub b2: Vec<f64>,
    pub objective: f64,
}

fn rows_of(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix_from_rows(rows: &[Vec<f64>], cols: usize) -> Result<Matrix> {
    if rows.iter().any(|r| r.len() != cols) {
        return Err(McaError::InvalidArgument(
            "ragged matrix in model record".into(),
        ));
    }
    Ok(Matrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

impl ModelRecord {
    pub fn new(map1: &AffineMap, map2: &AffineMap, objective: f64) -> Self {
        Self {
            d1: map1.input_dim(),
            d2: map2.input_dim(),
            k: map1.output_dim(),
            a1: rows_of(&map1.a),
            b1: map1.b.iter().copied().collect(),
            a2: rows_of(&map2.a),
            b2: map2.b.iter().copied().collect(),
            objective,
        }
    }

    pub fn from_model(model: &McaModel) -> Self {
        Self::new(&model.map1, &model.map2, model.objective)
    }

    pub fn maps(&self) -> Result<(AffineMap, AffineMap)> {
        let a1 = matrix_from_rows(&self.a1, self.d1)?;
        let a2 = matrix_from_rows(&self.a2, self.d2)?;
        if a1.nrows() != self.k || a2.nrows() != self.k {
            return Err(McaError::InvalidArgument(format!(
                "model record declares k = {} but stores {} and {} rows",
                self.k,
                a1.nrows(),
                a2.nrows()
            )));
        }
        Ok((
            AffineMap::new(a1, Vector::from_vec(self.b1.clone()))?,
            AffineMap::new(a2, Vector::from_vec(self.b2.clone()))?,
        ))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numlin::{max_abs_diff_identity, sample_covariance, sample_mean};
    use crate::rng::{gaussian_matrix, random_orthogonal, seeded};
    use proptest::prelude::*;

    fn covariance(z: &Matrix) -> Matrix {
        let mu = sample_mean(z).unwrap();
        sample_covariance(z, &mu).unwrap()
    }

    #[test]
    fn normalize_square_corners() {
        let x = Matrix::from_row_slice(2, 4, &[0.0, 2.0, 0.0, 2.0, 0.0, 0.0, 2.0, 2.0]);
        let (w, z) = normalize(&x, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(w.rank(), 2);
        assert!(max_abs_diff_identity(&(&z * z.transpose() / 4.0)) < 1e-12);
        // Every column is a (±1, ±1) pattern up to rotation: unit-variance
        // coordinates on a square of side 2 give columns of norm sqrt(2).
        for col in z.column_iter() {
            assert!((col.norm() - 2f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn normalize_points_on_a_line() {
        let dir = Vector::from_vec(vec![1.0, -2.0, 0.5]);
        let offset = Vector::from_vec(vec![3.0, 1.0, -1.0]);
        let cols: Vec<Vector> = (0..7).map(|t| &offset + &dir * (t as f64 * 0.7)).collect();
        let x = Matrix::from_columns(&cols);
        let (w, z) = normalize(&x, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(w.rank(), 1);
        assert_eq!(z.nrows(), 1);
        assert!(z.row(0).sum().abs() < 1e-12);
        assert!((z.row(0).norm_squared() / 7.0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalize_random_sample_is_white() {
        let mut rng = seeded(31, 0);
        let x = gaussian_matrix(&mut rng, 6, 6) * gaussian_matrix(&mut rng, 6, 40);
        let (_, z) = normalize(&x, DEFAULT_RANK_TOL).unwrap();
        assert!(max_abs_diff_identity(&covariance(&z)) < 1e-8);
        assert!(z.column_sum().amax() < 1e-8);
    }

    #[test]
    fn normalize_identical_points_is_rank_zero() {
        let x = Matrix::from_element(3, 5, 2.5);
        assert!(matches!(
            normalize(&x, DEFAULT_RANK_TOL),
            Err(McaError::RankZero)
        ));
    }

    #[test]
    fn normalize_needs_two_points() {
        assert!(normalize(&Matrix::zeros(3, 1), DEFAULT_RANK_TOL).is_err());
    }

    #[test]
    fn fit_identical_domains() {
        let mut rng = seeded(32, 0);
        let x = gaussian_matrix(&mut rng, 4, 25);
        let model = mca_fit(&x, &x, 4, DEFAULT_RANK_TOL).unwrap();
        assert!(model.objective.abs() < 1e-8);
        let y1 = transform(&model.map1, &x).unwrap();
        let y2 = transform(&model.map2, &x).unwrap();
        assert!((y1 - y2).abs().max() < 1e-8);
    }

    #[test]
    fn fit_affine_bijection_has_zero_objective() {
        let mut rng = seeded(33, 0);
        let x1 = gaussian_matrix(&mut rng, 5, 30);
        let m = gaussian_matrix(&mut rng, 5, 5);
        let c = gaussian_matrix(&mut rng, 5, 1).column(0).into_owned();
        let mut x2 = &m * &x1;
        for mut col in x2.column_iter_mut() {
            col += &c;
        }
        let model = mca_fit(&x1, &x2, 5, DEFAULT_RANK_TOL).unwrap();
        assert!(model.objective.abs() < 1e-8);
    }

    #[test]
    fn fit_reports_infeasible() {
        let mut rng = seeded(34, 0);
        let x1 = gaussian_matrix(&mut rng, 3, 10);
        let x2 = gaussian_matrix(&mut rng, 2, 10);
        assert!(matches!(
            mca_fit(&x1, &x2, 3, DEFAULT_RANK_TOL),
            Err(McaError::Infeasible { k: 3, r1: 3, r2: 2 })
        ));
        assert!(mca_fit(&x1, &x2, 2, DEFAULT_RANK_TOL).is_ok());
    }

    #[test]
    fn fit_rejects_mismatched_samples() {
        let x1 = Matrix::zeros(2, 5);
        let x2 = Matrix::zeros(2, 6);
        assert!(matches!(
            mca_fit(&x1, &x2, 1, DEFAULT_RANK_TOL),
            Err(McaError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn fit_on_shared_latent_model_is_exact() {
        // d1 = 4, d2 = 5 observations of a 6-dimensional latent: the row
        // spaces share 4 + 5 - 6 = 3 directions.
        let mut rng = seeded(35, 0);
        let s1 = gaussian_matrix(&mut rng, 4, 6);
        let s2 = gaussian_matrix(&mut rng, 5, 6);
        let omega = gaussian_matrix(&mut rng, 6, 10);
        let x1 = &s1 * &omega;
        let x2 = &s2 * &omega;
        let k = auto_k(&x1, &x2, DEFAULT_RANK_TOL, DEFAULT_MATCH_TOL).unwrap();
        assert_eq!(k, 3);
        let model = mca_fit(&x1, &x2, k, DEFAULT_RANK_TOL).unwrap();
        assert!(model.objective <= 1e-8);
    }

    #[test]
    fn contract_and_objective_identity() {
        let mut rng = seeded(36, 0);
        for trial in 0..20 {
            let (d1, d2, n) = (3 + trial % 4, 2 + trial % 5, 15 + trial);
            let x1 = gaussian_matrix(&mut rng, d1, n);
            let x2 =
                gaussian_matrix(&mut rng, d2, n) + 0.5 * gaussian_matrix(&mut rng, d2, d1) * &x1;
            let k = d1.min(d2);
            let model = mca_fit(&x1, &x2, k, DEFAULT_RANK_TOL).unwrap();
            for (map, x) in [(&model.map1, &x1), (&model.map2, &x2)] {
                let y = transform(map, x).unwrap();
                assert!(sample_mean(&y).unwrap().amax() <= 1e-8);
                assert!(max_abs_diff_identity(&covariance(&y)) <= 1e-6);
            }
            let analytic = 2.0 * k as f64 - 2.0 * model.top_singular_values.sum();
            assert!((model.objective - analytic).abs() < 1e-8);
        }
    }

    #[test]
    fn objective_invariant_under_affine_change_and_permutation() {
        let mut rng = seeded(37, 0);
        for _ in 0..10 {
            let x1 = gaussian_matrix(&mut rng, 4, 20);
            let x2 = gaussian_matrix(&mut rng, 3, 20) + 0.3 * gaussian_matrix(&mut rng, 3, 4) * &x1;
            let base = mca_fit(&x1, &x2, 2, DEFAULT_RANK_TOL).unwrap().objective;

            let m = gaussian_matrix(&mut rng, 4, 4) + 3.0 * Matrix::identity(4, 4);
            let mut moved = &m * &x1;
            moved.add_scalar_mut(1.7);
            let after = mca_fit(&moved, &x2, 2, DEFAULT_RANK_TOL).unwrap().objective;
            assert!((base - after).abs() < 1e-8);

            let perm: Vec<usize> = (0..20).rev().collect();
            let p1 = x1.select_columns(&perm);
            let p2 = x2.select_columns(&perm);
            let permuted = mca_fit(&p1, &p2, 2, DEFAULT_RANK_TOL).unwrap().objective;
            assert!((base - permuted).abs() < 1e-8);
        }
    }

    #[test]
    fn transform_trivial_maps() {
        let mut rng = seeded(38, 0);
        let x = gaussian_matrix(&mut rng, 3, 4);
        let id = AffineMap::new(Matrix::identity(3, 3), Vector::zeros(3)).unwrap();
        assert_eq!(transform(&id, &x).unwrap(), x);
        let zero = AffineMap::new(Matrix::zeros(2, 3), Vector::zeros(2)).unwrap();
        assert!(transform(&zero, &x).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn transform_matches_column_loop() {
        let mut rng = seeded(39, 0);
        let a = gaussian_matrix(&mut rng, 2, 3);
        let b = gaussian_matrix(&mut rng, 2, 1).column(0).into_owned();
        let x = gaussian_matrix(&mut rng, 3, 6);
        let map = AffineMap::new(a.clone(), b.clone()).unwrap();
        let y = transform(&map, &x).unwrap();
        for j in 0..6 {
            for i in 0..2 {
                let mut acc = b[i];
                for t in 0..3 {
                    acc += a[(i, t)] * x[(t, j)];
                }
                assert!((y[(i, j)] - acc).abs() < 1e-14);
            }
        }
        assert!(transform(&map, &Matrix::zeros(4, 2)).is_err());
    }

    #[test]
    fn auto_k_of_identical_domains_is_full_rank() {
        let mut rng = seeded(40, 0);
        let x = gaussian_matrix(&mut rng, 4, 20);
        assert_eq!(
            auto_k(&x, &x, DEFAULT_RANK_TOL, DEFAULT_MATCH_TOL).unwrap(),
            4
        );
    }

    #[test]
    fn auto_k_of_independent_domains_is_zero() {
        let mut rng = seeded(41, 0);
        for _ in 0..20 {
            let x1 = gaussian_matrix(&mut rng, 3, 12);
            let x2 = gaussian_matrix(&mut rng, 4, 12);
            let k = auto_k(&x1, &x2, DEFAULT_RANK_TOL, DEFAULT_MATCH_TOL).unwrap();
            assert_eq!(k, 0);
        }
    }

    #[test]
    fn decoder_falls_back_to_zero_maps() {
        let mut rng = seeded(42, 0);
        let x1 = gaussian_matrix(&mut rng, 3, 12);
        let x2 = gaussian_matrix(&mut rng, 4, 12);
        let dec = exact_decoder(&x1, &x2, DEFAULT_RANK_TOL, DEFAULT_MATCH_TOL).unwrap();
        assert_eq!(dec.k, 0);
        assert!(dec.model.is_none());
        assert_eq!(dec.map1, AffineMap::zero(3));
        assert_eq!(dec.map2, AffineMap::zero(4));
    }

    #[test]
    fn reconstruct_round_trips_training_columns() {
        let mut rng = seeded(43, 0);
        let x1 = gaussian_matrix(&mut rng, 6, 30);
        let x2 = gaussian_matrix(&mut rng, 5, 30) + gaussian_matrix(&mut rng, 5, 6) * &x1;
        let model = mca_fit(&x1, &x2, 3, DEFAULT_RANK_TOL).unwrap();
        let z = transform(&model.map1, &x1).unwrap();
        let back = reconstruct(&model, Side::One, &z).unwrap();
        assert_eq!(back.shape(), (6, 30));
        let again = transform(&model.map1, &back).unwrap();
        assert!((again - &z).abs().max() < 1e-6);
        // The reconstruction lies in x̄ + im(A^T).
        let svd = thin_svd(&model.map1.a, DEFAULT_RANK_TOL).unwrap();
        let offset = center_columns(&back, &model.whitening1.mean);
        let residual = &offset - &svd.v * (svd.v.transpose() * &offset);
        assert!(residual.abs().max() < 1e-8);
    }

    #[test]
    fn reconstruct_inverts_full_dimensional_map() {
        let mut rng = seeded(44, 0);
        let x1 = gaussian_matrix(&mut rng, 3, 20);
        let q = random_orthogonal(&mut rng, 3);
        let x2 = &q * &x1;
        let model = mca_fit(&x1, &x2, 3, DEFAULT_RANK_TOL).unwrap();
        let probe = gaussian_matrix(&mut rng, 3, 5);
        let z = transform(&model.map2, &probe).unwrap();
        let back = reconstruct(&model, Side::Two, &z).unwrap();
        assert!((back - probe).abs().max() < 1e-8);
    }

    #[test]
    fn side_from_integer() {
        assert_eq!(Side::try_from(1).unwrap(), Side::One);
        assert_eq!(Side::try_from(2).unwrap(), Side::Two);
        assert!(Side::try_from(3).is_err());
    }

    proptest! {
        #[test]
        fn model_record_json_round_trip_is_exact(
            seed in any::<u64>(),
            k in 1usize..4,
            d1 in 1usize..5,
            d2 in 1usize..5,
        ) {
            let mut rng = seeded(seed, 0);
            let map1 = AffineMap::new(gaussian_matrix(&mut rng, k, d1) * 1e3, Vector::from_fn(k, |i, _| i as f64 / 3.0)).unwrap();
            let map2 = AffineMap::new(gaussian_matrix(&mut rng, k, d2) * 1e-7, gaussian_matrix(&mut rng, k, 1).column(0).into_owned()).unwrap();
            let record = ModelRecord::new(&map1, &map2, 0.1 + seed as f64 * 1e-20);
            let text = record.to_json().unwrap();
            let back = ModelRecord::from_json(&text).unwrap();
            prop_assert_eq!(&back, &record);
            let (m1, m2) = back.maps().unwrap();
            prop_assert_eq!(m1, map1);
            prop_assert_eq!(m2, map2);
        }
    }
}
