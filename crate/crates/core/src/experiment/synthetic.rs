//! Synthetic studies: Mickey alignment and the finite-sample convergence of
//! the optimal matched objective.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::datasets::{mickey_pair, MickeyConfig};
use crate::error::{McaError, Result};
use crate::mca::normalize;
use crate::numlin::{Matrix, Vector, DEFAULT_RANK_TOL};
use crate::procrustes::{optimal_objective_by_k, projection_procrustes};
use crate::rng::{gaussian_matrix, seeded, StreamRng};

fn rms_pair_distance(a: &Matrix, b: &Matrix) -> f64 {
    ((a - b).norm_squared() / a.ncols() as f64).sqrt()
}

#[derive(Debug, Clone)]
pub struct MickeyAlignment {
    /// RMS distance between matched points of the two whitened copies.
    pub pre_rms: f64,
    /// The same after projecting both copies into the common domain.
    pub post_rms: f64,
    pub objective: f64,
    pub aligned1: Matrix,
    pub aligned2: Matrix,
}

impl MickeyAlignment {
    pub fn ratio(&self) -> f64 {
        self.post_rms / self.pre_rms
    }
}

pub fn mickey_alignment(cfg: &MickeyConfig, k: usize) -> Result<MickeyAlignment> {
    let pair = mickey_pair(cfg)?;
    if pair.z1.nrows() != pair.z2.nrows() {
        return Err(McaError::DimensionMismatch {
            context: "whitened Mickey copies",
            expected: pair.z1.nrows(),
            found: pair.z2.nrows(),
        });
    }
    let sol = projection_procrustes(&pair.z1, &pair.z2, k)?;
    let aligned1 = &sol.b1 * &pair.z1;
    let aligned2 = &sol.b2 * &pair.z2;
    Ok(MickeyAlignment {
        pre_rms: rms_pair_distance(&pair.z1, &pair.z2),
        post_rms: rms_pair_distance(&aligned1, &aligned2),
        objective: sol.objective,
        aligned1,
        aligned2,
    })
}

/// Plot-ready aligned coordinates: `index,side,c0,c1,...`.
pub fn write_alignment_csv<W: Write>(al: &MickeyAlignment, mut out: W) -> Result<()> {
    let k = al.aligned1.nrows();
    let cols: Vec<String> = (0..k).map(|c| format!("c{c}")).collect();
    writeln!(out, "index,side,{}", cols.join(","))?;
    for (side, m) in [(1, &al.aligned1), (2, &al.aligned2)] {
        for (j, col) in m.column_iter().enumerate() {
            let cells: Vec<String> = col.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{j},{side},{}", cells.join(","))?;
        }
    }
    Ok(())
}

/// Bounded noisy affine model `x_i = S_i ω + μ_i + ε_i`: the latent is a
/// standard Gaussian truncated to `|ω|_∞ ≤ LATENT_BOUND`, and `ε_i` is
/// uniform on `[-noise, noise]^{d_i}`.
#[derive(Debug, Clone)]
pub struct BoundedModel {
    pub s1: Matrix,
    pub mu1: Vector,
    pub s2: Matrix,
    pub mu2: Vector,
    pub noise: f64,
}

pub const LATENT_BOUND: f64 = 3.0;

fn truncated_gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let v: f64 = rng.sample(StandardNormal);
        if v.abs() <= LATENT_BOUND {
            return v;
        }
    }
}

impl BoundedModel {
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        d1: usize,
        d2: usize,
        latent: usize,
        noise: f64,
    ) -> Self {
        Self {
            s1: gaussian_matrix(rng, d1, latent),
            mu1: Vector::from_fn(d1, |_, _| rng.sample(StandardNormal)),
            s2: gaussian_matrix(rng, d2, latent),
            mu2: Vector::from_fn(d2, |_, _| rng.sample(StandardNormal)),
            noise,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> (Matrix, Matrix) {
        let latent = self.s1.ncols();
        let omegas = Matrix::from_fn(latent, n, |_, _| truncated_gaussian(rng));
        let mut side = |s: &Matrix, mu: &Vector| {
            let mut x = s * &omegas;
            for mut col in x.column_iter_mut() {
                col += mu;
            }
            if self.noise > 0.0 {
                x.apply(|v| *v += rng.random_range(-self.noise..=self.noise));
            }
            x
        };
        let x1 = side(&self.s1, &self.mu1);
        let x2 = side(&self.s2, &self.mu2);
        (x1, x2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceConfig {
    pub d1: usize,
    pub d2: usize,
    pub latent: usize,
    pub k: usize,
    pub noise: f64,
    pub n_values: Vec<usize>,
    pub n_ref: usize,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub trials: usize,
    pub median_gap: f64,
    pub median_objective: f64,
}

fn optimal_objective(x1: &Matrix, x2: &Matrix, k: usize) -> Result<f64> {
    let (_, z1) = normalize(x1, DEFAULT_RANK_TOL)?;
    let (_, z2) = normalize(x2, DEFAULT_RANK_TOL)?;
    let by_k = optimal_objective_by_k(&z1, &z2)?;
    by_k.get(k - 1).copied().ok_or(McaError::Infeasible {
        k,
        r1: z1.nrows(),
        r2: z2.nrows(),
    })
}

pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty list");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Gap between the optimal objective on the first `n` samples and on all
/// `n_ref` samples, per trial, summarized by its median for each `n`. One
/// model is fixed for the whole study; each trial draws its own sample.
pub fn convergence_diagnostic(cfg: &ConvergenceConfig) -> Result<Vec<ConvergenceRow>> {
    if cfg.k == 0 || cfg.k > cfg.d1.min(cfg.d2) || cfg.trials == 0 || cfg.latent == 0 {
        return Err(McaError::InvalidArgument(format!(
            "need 1 <= k <= min(d1, d2) and positive trials/latent, got k = {}",
            cfg.k
        )));
    }
    if let Some(&bad) = cfg.n_values.iter().find(|&&n| n < 2 || n > cfg.n_ref) {
        return Err(McaError::InvalidArgument(format!(
            "sample size {bad} outside 2..={}",
            cfg.n_ref
        )));
    }
    let model = BoundedModel::random(
        &mut seeded(cfg.seed, u64::MAX),
        cfg.d1,
        cfg.d2,
        cfg.latent,
        cfg.noise,
    );
    let per_trial: Vec<Vec<(f64, f64)>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| -> Result<Vec<(f64, f64)>> {
            let mut rng: StreamRng = seeded(cfg.seed, t as u64);
            let (x1, x2) = model.sample(&mut rng, cfg.n_ref);
            let reference = optimal_objective(&x1, &x2, cfg.k)?;
            cfg.n_values
                .iter()
                .map(|&n| {
                    let obj = optimal_objective(
                        &x1.columns(0, n).into_owned(),
                        &x2.columns(0, n).into_owned(),
                        cfg.k,
                    )?;
                    Ok(((obj - reference).abs(), obj))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(cfg
        .n_values
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let gaps: Vec<f64> = per_trial.iter().map(|t| t[i].0).collect();
            let objs: Vec<f64> = per_trial.iter().map(|t| t[i].1).collect();
            ConvergenceRow {
                n,
                trials: cfg.trials,
                median_gap: median(&gaps),
                median_objective: median(&objs),
            }
        })
        .collect())
}

/// CSV with header `n,trials,median_gap,median_objective`.
pub fn write_convergence_csv<W: Write>(rows: &[ConvergenceRow], mut out: W) -> Result<()> {
    writeln!(out, "n,trials,median_gap,median_objective")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{}",
            row.n, row.trials, row.median_gap, row.median_objective
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_odd_and_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn noiseless_shared_rotation_aligns_perfectly() {
        let cfg = MickeyConfig {
            noise_sigma: 0.0,
            shared_rotation: true,
            ..MickeyConfig::default()
        };
        let al = mickey_alignment(&cfg, 2).unwrap();
        assert!(al.post_rms < 1e-6);
        assert!(al.pre_rms < 1e-6);
    }

    #[test]
    fn post_rms_squared_is_objective() {
        let al = mickey_alignment(&MickeyConfig::default(), 2).unwrap();
        assert!((al.post_rms.powi(2) - al.objective).abs() < 1e-10);
        assert!(al.ratio() < 0.35);
    }

    #[test]
    fn latent_stays_bounded() {
        let mut rng = seeded(1, 0);
        assert!((0..10_000).all(|_| truncated_gaussian(&mut rng).abs() <= LATENT_BOUND));
    }

    #[test]
    fn noiseless_bounded_model_is_affine_in_the_latent() {
        let model = BoundedModel::random(&mut seeded(2, 0), 3, 3, 3, 0.0);
        let (x1, x2) = model.sample(&mut seeded(2, 1), 50);
        // Same latent, invertible S: the maps are related exactly.
        let obj = optimal_objective(&x1, &x2, 3).unwrap();
        assert!(obj.abs() < 1e-8);
    }

    fn small_cfg() -> ConvergenceConfig {
        ConvergenceConfig {
            d1: 3,
            d2: 4,
            latent: 2,
            k: 2,
            noise: 0.5,
            n_values: vec![20, 200, 2000],
            n_ref: 2000,
            trials: 8,
            seed: 5,
        }
    }

    #[test]
    fn gap_vanishes_at_reference_size_and_shrinks() {
        let rows = convergence_diagnostic(&small_cfg()).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[2].median_gap, 0.0);
        assert!(rows[1].median_gap < rows[0].median_gap);
        assert_eq!(rows, convergence_diagnostic(&small_cfg()).unwrap());
    }

    #[test]
    fn rejects_bad_convergence_config() {
        let mut cfg = small_cfg();
        cfg.k = 4;
        assert!(convergence_diagnostic(&cfg).is_err());
        let mut cfg = small_cfg();
        cfg.n_values = vec![1];
        assert!(convergence_diagnostic(&cfg).is_err());
    }
}
