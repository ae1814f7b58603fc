//! Experiment runner: transfer-learning runs with baselines, accuracy
//! curves, the exact-matching phase study, the convergence diagnostic and
//! the Mickey demo. Each entry point writes its files into an output
//! directory.

pub mod config;
pub mod synthetic;
pub mod transfer;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use image::{GrayImage, Luma};
use serde::Serialize;

use crate::alm::{phase_transition, write_phase_csv, PhaseRow};
use crate::classify::EvalReport;
use crate::datasets::{MickeyConfig, Mnist, View, HALF};
use crate::error::{McaError, Result};
use crate::mca::{reconstruct, transform, McaModel, ModelRecord, Side};
use crate::numlin::Matrix;

pub use config::{ExperimentConfig, KChoice, Kind, MatchStrategy};
pub use synthetic::{
    convergence_diagnostic, median, mickey_alignment, ConvergenceConfig, ConvergenceRow,
    MickeyAlignment,
};
pub use transfer::{run_seed, SeedResult, TransferSetup};

pub const LIBRARY_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Common envelope of every `report.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Report<T: Serialize> {
    pub library: &'static str,
    pub version: &'static str,
    pub config: ExperimentConfig,
    pub results: T,
}

impl<T: Serialize> Report<T> {
    pub fn new(config: &ExperimentConfig, results: T) -> Self {
        Self {
            library: env!("CARGO_PKG_NAME"),
            version: LIBRARY_VERSION,
            config: config.clone(),
            results,
        }
    }

    pub fn write(&self, out_dir: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(out_dir.join("report.json"), text)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MethodAccuracies {
    pub bl1: f64,
    pub bl2: f64,
    pub mca: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransferResults {
    pub per_seed: Vec<SeedResult>,
    pub median: MethodAccuracies,
}

/// Everything a transfer run produces, before it is written out.
#[derive(Debug, Clone)]
pub struct TransferRun {
    pub results: TransferResults,
    pub bl1: EvalReport,
    pub bl2: EvalReport,
    pub mca: EvalReport,
    /// Outcome of the first seed, kept for the matching/model artifacts.
    pub first: transfer::SeedOutcome,
}

pub fn run_transfer(cfg: &ExperimentConfig, setup: &TransferSetup) -> Result<TransferRun> {
    let bl2 = transfer::baseline_cross_domain(&setup.train, &setup.test, cfg.neighbors)?;
    let mut outcomes = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        outcomes.push(run_seed(setup, cfg, &bl2, seed)?);
    }
    let per_seed: Vec<SeedResult> = outcomes.iter().map(|o| o.result.clone()).collect();
    let pick = |f: fn(&SeedResult) -> f64| median(&per_seed.iter().map(f).collect::<Vec<_>>());
    let median = MethodAccuracies {
        bl1: pick(|s| s.bl1),
        bl2: pick(|s| s.bl2),
        mca: pick(|s| s.mca),
    };
    let bl1 = EvalReport::pooled(outcomes.iter().map(|o| &o.bl1)).expect("at least one seed");
    let mca = EvalReport::pooled(outcomes.iter().map(|o| &o.mca)).expect("at least one seed");
    let first = outcomes.swap_remove(0);
    Ok(TransferRun {
        results: TransferResults { per_seed, median },
        bl1,
        bl2,
        mca,
        first,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_timing(out_dir: &Path, start: Instant) -> Result<f64> {
    let secs = start.elapsed().as_secs_f64();
    fs::write(
        out_dir.join("timing.json"),
        format!("{{\n  \"wall_seconds\": {secs}\n}}\n"),
    )?;
    Ok(secs)
}

/// Upscaled grayscale tiles of `14 × 14` images, one row per matrix.
/// Values are clamped to `[0, 1]`.
pub fn image_strip(rows: &[&Matrix], scale: u32) -> GrayImage {
    let side = HALF as u32 * scale;
    let cols = rows.iter().map(|m| m.ncols()).max().unwrap_or(0) as u32;
    let mut img = GrayImage::new(cols * side, rows.len() as u32 * side);
    for (r, m) in rows.iter().enumerate() {
        for (c, col) in m.column_iter().enumerate() {
            for y in 0..side {
                for x in 0..side {
                    let v = col[(y / scale) as usize * HALF + (x / scale) as usize];
                    let px = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
                    img.put_pixel(c as u32 * side + x, r as u32 * side + y, Luma([px]));
                }
            }
        }
    }
    img
}

/// Cross-domain reconstructions of the first `count` training crops: each
/// crop is mapped with `g1` and pulled back with the pseudoinverse of `g2`.
/// Rows: crops, reconstructions, true pixelations.
pub fn reconstruction_strip(
    model: &McaModel,
    setup: &TransferSetup,
    count: usize,
) -> Result<GrayImage> {
    let count = count.min(setup.train.len());
    let crops = setup.train.data.columns(0, count).into_owned();
    let common = transform(&model.map1, &crops)?;
    let recon = reconstruct(model, Side::Two, &common)?;
    let picks: Vec<usize> = (0..count).collect();
    let truth = crate::datasets::images_matrix(setup.pool(), &picks, View::Pixelate);
    Ok(image_strip(&[&crops, &recon, &truth], 4))
}

fn write_transfer_outputs(
    run: &TransferRun,
    cfg: &ExperimentConfig,
    setup: &TransferSetup,
    out: &Path,
) -> Result<()> {
    Report::new(cfg, &run.results).write(out)?;
    run.bl1
        .write_confusion_csv(create(&out.join("confusion_bl1.csv"))?)?;
    run.bl2
        .write_confusion_csv(create(&out.join("confusion_bl2.csv"))?)?;
    run.mca
        .write_confusion_csv(create(&out.join("confusion_mca.csv"))?)?;
    run.first
        .matching
        .write_csv(create(&out.join("matching.csv"))?)?;
    let maps = &run.first.maps;
    let record = ModelRecord::new(&maps.map1, &maps.map2, maps.objective);
    fs::write(out.join("model.json"), record.to_json()? + "\n")?;
    if cfg.kind == Kind::CropPixelate {
        if let Some(model) = &maps.model {
            reconstruction_strip(model, setup, 8)?.save(out.join("reconstruction.png"))?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct MickeySeed {
    pub seed: u64,
    pub pre_rms: f64,
    pub post_rms: f64,
    pub ratio: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MickeyResults {
    pub per_seed: Vec<MickeySeed>,
    pub median_ratio: f64,
}

pub fn mickey_config(cfg: &ExperimentConfig, seed: u64) -> MickeyConfig {
    MickeyConfig {
        n_points: cfg.n,
        noise_sigma: cfg.sigma,
        seed,
        ..MickeyConfig::default()
    }
}

fn fixed_k(cfg: &ExperimentConfig) -> Result<usize> {
    match cfg.k {
        KChoice::Fixed(k) => Ok(k),
        KChoice::Auto => Err(McaError::Config(format!(
            "`k = auto` is only available for transfer runs, not {:?}",
            cfg.kind
        ))),
    }
}

pub fn run_mickey(cfg: &ExperimentConfig, out: &Path) -> Result<MickeyResults> {
    let k = fixed_k(cfg)?;
    let mut per_seed = Vec::with_capacity(cfg.seeds.len());
    for (i, &seed) in cfg.seeds.iter().enumerate() {
        let al = mickey_alignment(&mickey_config(cfg, seed), k)?;
        if i == 0 {
            synthetic::write_alignment_csv(&al, create(&out.join("mickey.csv"))?)?;
        }
        per_seed.push(MickeySeed {
            seed,
            pre_rms: al.pre_rms,
            post_rms: al.post_rms,
            ratio: al.ratio(),
            objective: al.objective,
        });
    }
    let ratios: Vec<f64> = per_seed.iter().map(|s| s.ratio).collect();
    Ok(MickeyResults {
        median_ratio: median(&ratios),
        per_seed,
    })
}

pub fn convergence_config(cfg: &ExperimentConfig) -> Result<ConvergenceConfig> {
    Ok(ConvergenceConfig {
        d1: cfg.d1,
        d2: cfg.d2,
        latent: cfg.latent,
        k: fixed_k(cfg)?,
        noise: cfg.noise,
        n_values: cfg.n_values.clone(),
        n_ref: cfg.n_ref,
        trials: cfg.trials,
        seed: cfg.seeds[0],
    })
}

pub fn run_phase(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PhaseRow>> {
    let rows = phase_transition(
        cfg.d1,
        cfg.d2,
        cfg.latent,
        &cfg.n_values,
        cfg.trials,
        cfg.seeds[0],
    )?;
    write_phase_csv(&rows, create(&out.join("phase.csv"))?)?;
    Ok(rows)
}

pub fn run_convergence(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<ConvergenceRow>> {
    let rows = convergence_diagnostic(&convergence_config(cfg)?)?;
    synthetic::write_convergence_csv(&rows, create(&out.join("convergence.csv"))?)?;
    Ok(rows)
}

pub fn load_mnist(cfg: &ExperimentConfig) -> Result<Mnist> {
    Mnist::load(&cfg.resolved_mnist_dir())
}

/// Runs the experiment described by `cfg`, writes `report.json` and the
/// kind-specific files into `out`, and returns a one-line summary.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<String> {
    fs::create_dir_all(out)?;
    let start = Instant::now();
    let summary = match cfg.kind {
        Kind::CropPixelate | Kind::MnistMnist => {
            let setup = TransferSetup::for_kind(cfg.kind, &load_mnist(cfg)?)?;
            let run = run_transfer(cfg, &setup)?;
            write_transfer_outputs(&run, cfg, &setup, out)?;
            let m = run.results.median;
            format!(
                "median accuracy: BL1 {:.4}  BL2 {:.4}  MCA {:.4}",
                m.bl1, m.bl2, m.mca
            )
        }
        Kind::Mickey => {
            let results = run_mickey(cfg, out)?;
            Report::new(cfg, &results).write(out)?;
            format!("median post/pre RMS ratio: {:.4}", results.median_ratio)
        }
        Kind::PhaseTransition => {
            let rows = run_phase(cfg, out)?;
            Report::new(cfg, &rows).write(out)?;
            let rates: Vec<String> = rows
                .iter()
                .map(|r| format!("n={}:{}", r.n, r.rate))
                .collect();
            format!("success rates {}", rates.join(" "))
        }
        Kind::Convergence => {
            let rows = run_convergence(cfg, out)?;
            Report::new(cfg, &rows).write(out)?;
            let gaps: Vec<String> = rows
                .iter()
                .map(|r| format!("n={}:{:.3e}", r.n, r.median_gap))
                .collect();
            format!("median gaps {}", gaps.join(" "))
        }
    };
    let secs = write_timing(out, start)?;
    Ok(format!("{summary} ({secs:.1} s)"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub n: usize,
    pub seed: u64,
    pub bl1: f64,
    pub mca: f64,
}

/// One transfer run per `(n, seed)`.
pub fn accuracy_curve(
    cfg: &ExperimentConfig,
    setup: &TransferSetup,
    n_values: &[usize],
) -> Result<Vec<CurveRow>> {
    let bl2 = transfer::baseline_cross_domain(&setup.train, &setup.test, cfg.neighbors)?;
    let mut rows = Vec::with_capacity(n_values.len() * cfg.seeds.len());
    for &n in n_values {
        let cfg_n = ExperimentConfig { n, ..cfg.clone() };
        for &seed in &cfg.seeds {
            let r = run_seed(setup, &cfg_n, &bl2, seed)?.result;
            rows.push(CurveRow {
                n,
                seed,
                bl1: r.bl1,
                mca: r.mca,
            });
        }
    }
    Ok(rows)
}

pub fn write_curve_csv<W: Write>(rows: &[CurveRow], mut out: W) -> Result<()> {
    writeln!(out, "n,seed,bl1,mca")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.n, r.seed, r.bl1, r.mca)?;
    }
    Ok(())
}

/// Accuracy-versus-`n` sweep for a transfer config; writes `curve.csv` and
/// `report.json`.
pub fn run_curve(cfg: &ExperimentConfig, out: &Path) -> Result<String> {
    if !matches!(cfg.kind, Kind::CropPixelate | Kind::MnistMnist) {
        return Err(McaError::Config(
            "curves are defined for transfer experiments only".into(),
        ));
    }
    fs::create_dir_all(out)?;
    let start = Instant::now();
    let setup = TransferSetup::for_kind(cfg.kind, &load_mnist(cfg)?)?;
    let rows = accuracy_curve(cfg, &setup, &cfg.n_values)?;
    write_curve_csv(&rows, create(&out.join("curve.csv"))?)?;
    Report::new(cfg, &rows).write(out)?;
    let secs = write_timing(out, start)?;
    Ok(format!("{} curve rows ({secs:.1} s)", rows.len()))
}

/// Transfer run on an in-memory dataset, writing the same files as
/// [`run_experiment`].
pub fn run_transfer_with(cfg: &ExperimentConfig, mnist: &Mnist, out: &Path) -> Result<TransferRun> {
    fs::create_dir_all(out)?;
    let setup = TransferSetup::for_kind(cfg.kind, mnist)?;
    let run = run_transfer(cfg, &setup)?;
    write_transfer_outputs(&run, cfg, &setup, out)?;
    Ok(run)
}
