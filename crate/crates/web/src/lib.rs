//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Build with `wasm-pack build crates/web --target web --out-dir www/pkg`
//! and serve `crates/web/www/` statically.

use mca_core::alm::{alm_sample, exact_match_trial, AlmInstance, PHASE_TOL};
use mca_core::datasets::MickeyConfig;
use mca_core::experiment::mickey_alignment;
use mca_core::mca::normalize;
use mca_core::numlin::DEFAULT_RANK_TOL;
use mca_core::procrustes::cross_singular_values;
use mca_core::rng::seeded;
use mca_core::McaError;
use wasm_bindgen::prelude::*;

/// Both Mickey copies after alignment into the plane.
#[wasm_bindgen]
pub struct MickeyView {
    pre_rms: f64,
    post_rms: f64,
    objective: f64,
    points: Vec<f64>,
}

#[wasm_bindgen]
impl MickeyView {
    #[wasm_bindgen(getter)]
    pub fn pre_rms(&self) -> f64 {
        self.pre_rms
    }

    #[wasm_bindgen(getter)]
    pub fn post_rms(&self) -> f64 {
        self.post_rms
    }

    #[wasm_bindgen(getter)]
    pub fn objective(&self) -> f64 {
        self.objective
    }

    /// `[x1, y1, x2, y2]` for every point, flattened.
    #[wasm_bindgen(getter)]
    pub fn points(&self) -> Vec<f64> {
        self.points.clone()
    }
}

pub fn mickey_view(
    n_points: usize,
    sigma: f64,
    seed: u64,
    shared_rotation: bool,
) -> Result<MickeyView, McaError> {
    let cfg = MickeyConfig {
        n_points,
        noise_sigma: sigma,
        seed,
        shared_rotation,
        ..MickeyConfig::default()
    };
    let al = mickey_alignment(&cfg, 2)?;
    let mut points = Vec::with_capacity(4 * n_points);
    for (a, b) in al.aligned1.column_iter().zip(al.aligned2.column_iter()) {
        points.extend_from_slice(&[a[0], a[1], b[0], b[1]]);
    }
    Ok(MickeyView {
        pre_rms: al.pre_rms,
        post_rms: al.post_rms,
        objective: al.objective,
        points,
    })
}

/// Exact-matching success rate for every `n` in `n_from..=n_to`. Runs on
/// the calling thread with the same random streams as the CLI's phase study.
pub fn phase_rates(
    d1: usize,
    d2: usize,
    latent: usize,
    n_from: usize,
    n_to: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>, McaError> {
    if d1 == 0 || d2 == 0 || latent == 0 || trials == 0 || n_from == 0 || n_from > n_to {
        return Err(McaError::InvalidArgument(
            "need positive sizes and n_from <= n_to".into(),
        ));
    }
    Ok((n_from..=n_to)
        .map(|n| {
            let hits = (0..trials)
                .filter(|&t| {
                    let mut rng = seeded(seed, ((n as u64) << 32) | t as u64);
                    exact_match_trial(&mut rng, d1, d2, latent, n, PHASE_TOL).success()
                })
                .count();
            hits as f64 / trials as f64
        })
        .collect())
}

/// Principal-angle cosines between the whitened samples of one random
/// affine-linear instance.
pub fn principal_cosines(
    d1: usize,
    d2: usize,
    latent: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>, McaError> {
    if d1 == 0 || d2 == 0 || latent == 0 {
        return Err(McaError::InvalidArgument(
            "dimensions must be positive".into(),
        ));
    }
    let inst = AlmInstance::random(&mut seeded(seed, 1), d1, d2, latent);
    let sample = alm_sample(&inst, n, seed)?;
    let (_, z1) = normalize(&sample.x1, DEFAULT_RANK_TOL)?;
    let (_, z2) = normalize(&sample.x2, DEFAULT_RANK_TOL)?;
    Ok(cross_singular_values(&z1, &z2)?.iter().copied().collect())
}

fn js(err: McaError) -> JsError {
    JsError::new(&err.to_string())
}

#[wasm_bindgen(js_name = alignMickey)]
pub fn align_mickey(
    n_points: usize,
    sigma: f64,
    seed: u64,
    shared_rotation: bool,
) -> Result<MickeyView, JsError> {
    mickey_view(n_points, sigma, seed, shared_rotation).map_err(js)
}

#[wasm_bindgen(js_name = phaseRates)]
pub fn phase_rates_js(
    d1: usize,
    d2: usize,
    latent: usize,
    n_from: usize,
    n_to: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>, JsError> {
    phase_rates(d1, d2, latent, n_from, n_to, trials, seed).map_err(js)
}

#[wasm_bindgen(js_name = principalCosines)]
pub fn principal_cosines_js(
    d1: usize,
    d2: usize,
    latent: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>, JsError> {
    principal_cosines(d1, d2, latent, n, seed).map_err(js)
}
