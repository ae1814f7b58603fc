use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mca_core::experiment::{self, ExperimentConfig, Kind};
use mca_core::McaError;

#[derive(Parser)]
#[command(
    name = "mca",
    version,
    about = "Matching component analysis experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run(Common),
    /// Accuracy against example-set size for a transfer config.
    Curve(Common),
    /// Exact-matching success rate against sample size.
    Phase(Common),
    /// Finite-sample gap of the optimal matched objective.
    Converge(Common),
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run a single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides `out` from the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a config key, e.g. `--set n_values=9,10`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn load(&self, implied: Option<Kind>) -> Result<ExperimentConfig, McaError> {
        let mut cfg = match (&self.config, implied) {
            (Some(path), _) => ExperimentConfig::from_file(path)?,
            (None, Some(kind)) => ExperimentConfig::defaults(kind),
            (None, None) => return Err(McaError::Config("--config is required".into())),
        };
        if let Some(kind) = implied {
            if cfg.kind != kind {
                return Err(McaError::Config(format!(
                    "this subcommand needs kind {kind:?}, config has {:?}",
                    cfg.kind
                )));
            }
        }
        for item in &self.overrides {
            let (key, value) = item.split_once('=').ok_or_else(|| {
                McaError::Config(format!("--set expects KEY=VALUE, got `{item}`"))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        if let Some(seed) = self.seed {
            cfg.seeds = vec![seed];
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn dispatch(cli: Cli) -> Result<(String, PathBuf), McaError> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.load(None)?;
            Ok((experiment::run_experiment(&cfg, &cfg.out)?, cfg.out))
        }
        Command::Curve(args) => {
            let cfg = args.load(None)?;
            Ok((experiment::run_curve(&cfg, &cfg.out)?, cfg.out))
        }
        Command::Phase(args) => {
            let cfg = args.load(Some(Kind::PhaseTransition))?;
            Ok((experiment::run_experiment(&cfg, &cfg.out)?, cfg.out))
        }
        Command::Converge(args) => {
            let cfg = args.load(Some(Kind::Convergence))?;
            Ok((experiment::run_experiment(&cfg, &cfg.out)?, cfg.out))
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok((summary, out)) => {
            println!("{summary}");
            println!("wrote {}", out.display());
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("mca: {err}");
            ExitCode::FAILURE
        }
    }
}
