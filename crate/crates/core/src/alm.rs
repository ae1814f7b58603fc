//! Affine linear model: two observations `x_i = S_i ω + μ_i` of a shared
//! latent `ω ∈ R^D`, together with a verifier for exact matching and the
//! phase-transition study built on top of it.
//!
//! A pair of affine maps `(A_i, b_i)` matches the model exactly when
//!
//! 1. `A1 (S1 ω + μ1) + b1 = A2 (S2 ω + μ2) + b2` for every `ω`, and
//! 2. `ker A_i S_i = ker S1 + ker S2` for both `i`.
//!
//! With Gaussian latents, MCA run at the data-dependent `k` achieves both
//! almost surely once `n ≥ d1 + d2 + 1`, and no decoder can for smaller `n`.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{McaError, Result};
use crate::mca::{exact_decoder, AffineMap, DEFAULT_MATCH_TOL};
use crate::numlin::{null_space, numerical_rank, Matrix, Vector, DEFAULT_RANK_TOL};
use crate::rng::{gaussian_matrix, seeded};

/// Number of fresh latents used for the sampled check of condition (1).
pub const VERIFY_SAMPLES: usize = 100;
const VERIFY_SEED: u64 = 0x05ee_da11;

/// Smallest relative singular value accepted for a random `S_i`; draws below
/// it are treated as rank deficient and redrawn.
const MIN_RELATIVE_SINGULAR_VALUE: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct AlmInstance {
    pub s1: Matrix,
    pub mu1: Vector,
    pub s2: Matrix,
    pub mu2: Vector,
}

impl AlmInstance {
    pub fn new(s1: Matrix, mu1: Vector, s2: Matrix, mu2: Vector) -> Result<Self> {
        if s1.ncols() == 0 {
            return Err(McaError::InvalidArgument(
                "latent dimension must be at least 1".into(),
            ));
        }
        if s1.ncols() != s2.ncols() {
            return Err(McaError::DimensionMismatch {
                context: "latent dimension",
                expected: s1.ncols(),
                found: s2.ncols(),
            });
        }
        if mu1.len() != s1.nrows() {
            return Err(McaError::DimensionMismatch {
                context: "mu1",
                expected: s1.nrows(),
                found: mu1.len(),
            });
        }
        if mu2.len() != s2.nrows() {
            return Err(McaError::DimensionMismatch {
                context: "mu2",
                expected: s2.nrows(),
                found: mu2.len(),
            });
        }
        let finite = s1
            .iter()
            .chain(s2.iter())
            .chain(mu1.iter())
            .chain(mu2.iter());
        if finite.into_iter().any(|x| !x.is_finite()) {
            return Err(McaError::InvalidArgument(
                "non-finite ALM parameters".into(),
            ));
        }
        Ok(Self { s1, mu1, s2, mu2 })
    }

    /// Gaussian `S_i` and `μ_i`, redrawn until both `S_i` have full rank
    /// `min(d_i, D)` with a comfortable margin.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, d1: usize, d2: usize, latent: usize) -> Self {
        loop {
            let s1 = gaussian_matrix(rng, d1, latent);
            let s2 = gaussian_matrix(rng, d2, latent);
            let mu1 = gaussian_matrix(rng, d1, 1).column(0).into_owned();
            let mu2 = gaussian_matrix(rng, d2, 1).column(0).into_owned();
            if well_conditioned(&s1) && well_conditioned(&s2) {
                return Self { s1, mu1, s2, mu2 };
            }
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.s1.ncols()
    }

    pub fn d1(&self) -> usize {
        self.s1.nrows()
    }

    pub fn d2(&self) -> usize {
        self.s2.nrows()
    }

    fn observe(&self, omegas: &Matrix) -> (Matrix, Matrix) {
        let mut x1 = &self.s1 * omegas;
        for mut col in x1.column_iter_mut() {
            col += &self.mu1;
        }
        let mut x2 = &self.s2 * omegas;
        for mut col in x2.column_iter_mut() {
            col += &self.mu2;
        }
        (x1, x2)
    }
}

fn well_conditioned(s: &Matrix) -> bool {
    let sv = s.singular_values();
    let top = sv.max();
    top > 0.0 && sv.min() > MIN_RELATIVE_SINGULAR_VALUE * top
}

#[derive(Debug, Clone)]
pub struct AlmSample {
    pub x1: Matrix,
    pub x2: Matrix,
    /// `D × n` latent draws.
    pub omegas: Matrix,
}

/// Draws `n` i.i.d. standard Gaussian latents and observes them in both domains.
pub fn alm_sample(inst: &AlmInstance, n: usize, seed: u64) -> Result<AlmSample> {
    let mut rng = seeded(seed, 0);
    sample_with(inst, n, &mut rng)
}

fn sample_with<R: Rng + ?Sized>(inst: &AlmInstance, n: usize, rng: &mut R) -> Result<AlmSample> {
    if n == 0 {
        return Err(McaError::EmptySample);
    }
    let omegas = Matrix::from_fn(inst.latent_dim(), n, |_, _| rng.sample(StandardNormal));
    let (x1, x2) = inst.observe(&omegas);
    Ok(AlmSample { x1, x2, omegas })
}

/// Ranks and kernel dimensions behind condition (2).
#[derive(Debug, Clone, Serialize)]
pub struct DimensionAudit {
    pub rank_s1: usize,
    pub rank_s2: usize,
    pub rank_stacked: usize,
    /// `dim(ker S1 + ker S2) = (D - r1) + (D - r2) - (D - rank [S1; S2])`.
    pub kernel_sum_dim: usize,
    /// `dim ker A_i S_i` for both sides.
    pub kernel_dim_t1: usize,
    pub kernel_dim_t2: usize,
    /// `max ||A_i S_i v||` over an orthonormal basis `v` of `ker S1 ∪ ker S2`,
    /// relative to the scale of the maps.
    pub containment_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExactMatchReport {
    pub cond_i_holds: bool,
    /// Max relative residual of `g1(x1) - g2(x2)` over fresh latents.
    pub sampled_residual: f64,
    /// `||A1 S1 - A2 S2||_F`, relative to the scale of the maps.
    pub equal_maps_residual: f64,
    /// `||(A1 μ1 + b1) - (A2 μ2 + b2)||`, relative to the scale of the maps.
    pub offset_residual: f64,
    pub cond_ii_holds: bool,
    pub audit: DimensionAudit,
}

impl ExactMatchReport {
    pub fn success(&self) -> bool {
        self.cond_i_holds && self.cond_ii_holds
    }
}

/// Checks both exact-matching conditions for `maps` against the ground-truth
/// instance. All residuals are divided by
/// `max(1, ||A1 S1||_F, ||A2 S2||_F, ||A1 μ1 + b1||, ||A2 μ2 + b2||)`; the
/// sampled residual is further divided by `1 + ||ω||`.
pub fn verify_exact_match(
    inst: &AlmInstance,
    maps: (&AffineMap, &AffineMap),
    tol: f64,
) -> Result<ExactMatchReport> {
    let (g1, g2) = maps;
    if g1.input_dim() != inst.d1() || g2.input_dim() != inst.d2() {
        return Err(McaError::DimensionMismatch {
            context: "map input dimension",
            expected: inst.d1(),
            found: g1.input_dim(),
        });
    }
    if g1.output_dim() != g2.output_dim() {
        return Err(McaError::DimensionMismatch {
            context: "common dimension",
            expected: g1.output_dim(),
            found: g2.output_dim(),
        });
    }
    let latent = inst.latent_dim();
    let t1 = &g1.a * &inst.s1;
    let t2 = &g2.a * &inst.s2;
    let c1 = g1.apply(&inst.mu1);
    let c2 = g2.apply(&inst.mu2);
    let scale = 1f64
        .max(t1.norm())
        .max(t2.norm())
        .max(c1.norm())
        .max(c2.norm());

    let equal_maps_residual = (&t1 - &t2).norm() / scale;
    let offset_residual = (&c1 - &c2).norm() / scale;

    let mut rng = seeded(VERIFY_SEED, 0);
    let mut sampled_residual = 0f64;
    for _ in 0..VERIFY_SAMPLES {
        let omega = Vector::from_fn(latent, |_, _| rng.sample(StandardNormal));
        let y1 = g1.apply(&(&inst.s1 * &omega + &inst.mu1));
        let y2 = g2.apply(&(&inst.s2 * &omega + &inst.mu2));
        let r = (y1 - y2).norm() / (scale * (1.0 + omega.norm()));
        sampled_residual = sampled_residual.max(r);
    }
    let cond_i_holds =
        sampled_residual <= tol && equal_maps_residual <= tol && offset_residual <= tol;

    let rank_s1 = numerical_rank(&inst.s1, DEFAULT_RANK_TOL);
    let rank_s2 = numerical_rank(&inst.s2, DEFAULT_RANK_TOL);
    let stacked = stack_rows(&inst.s1, &inst.s2);
    let rank_stacked = numerical_rank(&stacked, DEFAULT_RANK_TOL);
    let kernel_sum_dim = (latent - rank_s1) + (latent - rank_s2) - (latent - rank_stacked);

    let ker1 = null_space(&inst.s1, DEFAULT_RANK_TOL);
    let ker2 = null_space(&inst.s2, DEFAULT_RANK_TOL);
    let mut containment_residual = 0f64;
    for t in [&t1, &t2] {
        for ker in [&ker1, &ker2] {
            if ker.ncols() > 0 {
                let images = t * ker;
                for col in images.column_iter() {
                    containment_residual = containment_residual.max(col.norm() / scale);
                }
            }
        }
    }
    let kernel_dim_t1 = latent - numerical_rank(&t1, DEFAULT_RANK_TOL);
    let kernel_dim_t2 = latent - numerical_rank(&t2, DEFAULT_RANK_TOL);
    let cond_ii_holds = containment_residual <= tol
        && kernel_dim_t1 == kernel_sum_dim
        && kernel_dim_t2 == kernel_sum_dim;

    Ok(ExactMatchReport {
        cond_i_holds,
        sampled_residual,
        equal_maps_residual,
        offset_residual,
        cond_ii_holds,
        audit: DimensionAudit {
            rank_s1,
            rank_s2,
            rank_stacked,
            kernel_sum_dim,
            kernel_dim_t1,
            kernel_dim_t2,
            containment_residual,
        },
    })
}

fn stack_rows(top: &Matrix, bottom: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.rows_mut(0, top.nrows()).copy_from(top);
    out.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    out
}

/// One trial of the phase-transition study.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub k: usize,
    pub report: Option<ExactMatchReport>,
}

impl TrialOutcome {
    pub fn success(&self) -> bool {
        self.report.as_ref().is_some_and(ExactMatchReport::success)
    }
}

/// Fresh random instance, `n` Gaussian latents, exact decoder, verification.
pub fn exact_match_trial<R: Rng + ?Sized>(
    rng: &mut R,
    d1: usize,
    d2: usize,
    latent: usize,
    n: usize,
    tol: f64,
) -> TrialOutcome {
    let inst = AlmInstance::random(rng, d1, d2, latent);
    let outcome = sample_with(&inst, n, rng).and_then(|sample| {
        let dec = exact_decoder(&sample.x1, &sample.x2, DEFAULT_RANK_TOL, DEFAULT_MATCH_TOL)?;
        let report = verify_exact_match(&inst, (&dec.map1, &dec.map2), tol)?;
        Ok((dec.k, report))
    });
    match outcome {
        Ok((k, report)) => TrialOutcome {
            k,
            report: Some(report),
        },
        Err(_) => TrialOutcome { k: 0, report: None },
    }
}

/// Residual tolerance used to declare a phase-transition trial successful.
pub const PHASE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseRow {
    pub n: usize,
    pub trials: usize,
    pub successes: usize,
    pub rate: f64,
}

/// Success rate of the exact decoder for each sample size in `n_values`.
pub fn phase_transition(
    d1: usize,
    d2: usize,
    latent: usize,
    n_values: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<PhaseRow>> {
    if latent == 0 || trials == 0 || d1 == 0 || d2 == 0 {
        return Err(McaError::InvalidArgument(
            "dimensions and trial count must be positive".into(),
        ));
    }
    Ok(n_values
        .iter()
        .map(|&n| {
            let successes = (0..trials)
                .into_par_iter()
                .filter(|&t| {
                    let mut rng = seeded(seed, ((n as u64) << 32) | t as u64);
                    exact_match_trial(&mut rng, d1, d2, latent, n, PHASE_TOL).success()
                })
                .count();
            PhaseRow {
                n,
                trials,
                successes,
                rate: successes as f64 / trials as f64,
            }
        })
        .collect())
}

/// Writes the table as CSV with header `n,trials,successes,rate`.
pub fn write_phase_csv<W: Write>(rows: &[PhaseRow], mut out: W) -> Result<()> {
    writeln!(out, "n,trials,successes,rate")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{}",
            row.n, row.trials, row.successes, row.rate
        )?;
    }
    Ok(())
}
