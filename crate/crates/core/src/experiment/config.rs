//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Keys:
//!
//! | key        | meaning                                              |
//! |------------|------------------------------------------------------|
//! | `kind`     | `mnist-mnist`, `crop-pixelate`, `mickey`, `phase-transition`, `convergence` |
//! | `match`    | `nn`, `label` or `source`                            |
//! | `n`        | example count (Mickey: number of points)             |
//! | `r`        | training points matched to each example              |
//! | `k`        | common dimension, or `auto`                          |
//! | `seeds`    | comma-separated 64-bit seeds                         |
//! | `mnist_dir`| directory holding the four MNIST IDX files           |
//! | `out`      | output directory                                     |
//! | `neighbors`| k-NN vote size                                       |
//! | `n_values` | comma-separated sample sizes (curve, phase, convergence) |
//! | `d1`, `d2`, `latent` | model dimensions (phase, convergence)      |
//! | `trials`   | Monte Carlo trials (phase, convergence)              |
//! | `n_ref`    | reference sample size (convergence)                  |
//! | `sigma`    | Mickey noise level                                   |
//! | `noise`    | half-width of the uniform noise (convergence)        |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::classify::DEFAULT_NEIGHBORS;
use crate::error::{McaError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    MnistMnist,
    CropPixelate,
    Mickey,
    PhaseTransition,
    Convergence,
}

impl FromStr for Kind {
    type Err = McaError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "mnist-mnist" => Kind::MnistMnist,
            "crop-pixelate" => Kind::CropPixelate,
            "mickey" => Kind::Mickey,
            "phase-transition" | "phase" => Kind::PhaseTransition,
            "convergence" => Kind::Convergence,
            other => return Err(McaError::Config(format!("unknown kind `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchStrategy {
    Nn,
    Label,
    Source,
}

impl FromStr for MatchStrategy {
    type Err = McaError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "nn" | "l2" => MatchStrategy::Nn,
            "label" => MatchStrategy::Label,
            "source" => MatchStrategy::Source,
            other => {
                return Err(McaError::Config(format!(
                    "unknown match strategy `{other}`"
                )))
            }
        })
    }
}

impl MatchStrategy {
    pub fn name(self) -> &'static str {
        match self {
            MatchStrategy::Nn => "nn",
            MatchStrategy::Label => "label",
            MatchStrategy::Source => "source",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KChoice {
    Fixed(usize),
    Auto,
}

impl Serialize for KChoice {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            KChoice::Fixed(k) => s.serialize_u64(*k as u64),
            KChoice::Auto => s.serialize_str("auto"),
        }
    }
}

impl FromStr for KChoice {
    type Err = McaError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(KChoice::Auto);
        }
        match s.parse::<usize>() {
            Ok(k) if k >= 1 => Ok(KChoice::Fixed(k)),
            _ => Err(McaError::Config(format!(
                "k must be a positive integer or `auto`, got `{s}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(rename = "match")]
    pub match_strategy: MatchStrategy,
    pub n: usize,
    pub r: usize,
    pub k: KChoice,
    pub seeds: Vec<u64>,
    pub mnist_dir: Option<PathBuf>,
    pub out: PathBuf,
    pub neighbors: usize,
    pub n_values: Vec<usize>,
    pub d1: usize,
    pub d2: usize,
    pub latent: usize,
    pub trials: usize,
    pub n_ref: usize,
    pub sigma: f64,
    pub noise: f64,
}

const KEYS: &[&str] = &[
    "kind",
    "match",
    "n",
    "r",
    "k",
    "seeds",
    "mnist_dir",
    "out",
    "neighbors",
    "n_values",
    "d1",
    "d2",
    "latent",
    "trials",
    "n_ref",
    "sigma",
    "noise",
];

pub const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| McaError::Config(format!("invalid value `{raw}` for `{key}`")))
}

fn parse_list<T: FromStr>(key: &str, raw: &str) -> Result<Vec<T>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(key, s))
        .collect()
}

impl ExperimentConfig {
    /// Defaults for `kind` with no overrides.
    pub fn defaults(kind: Kind) -> Self {
        let mut cfg = Self {
            kind,
            match_strategy: MatchStrategy::Nn,
            n: 20,
            r: 1,
            k: KChoice::Fixed(19),
            seeds: DEFAULT_SEEDS.to_vec(),
            mnist_dir: None,
            out: PathBuf::from("out"),
            neighbors: DEFAULT_NEIGHBORS,
            n_values: Vec::new(),
            d1: 4,
            d2: 5,
            latent: 9,
            trials: 100,
            n_ref: 20_000,
            sigma: 0.1,
            noise: 0.5,
        };
        match kind {
            Kind::CropPixelate => {
                cfg.match_strategy = MatchStrategy::Source;
                cfg.n_values = (20..=150).step_by(10).collect();
            }
            Kind::MnistMnist => {
                cfg.n = 2000;
                cfg.r = 5;
                cfg.k = KChoice::Fixed(30);
                cfg.n_values = (40..=150).step_by(10).collect();
            }
            Kind::Mickey => {
                cfg.n = 300;
                cfg.k = KChoice::Fixed(2);
                cfg.seeds = (0..10).collect();
            }
            Kind::PhaseTransition => {
                cfg.n_values = (5..=14).collect();
            }
            Kind::Convergence => {
                cfg.k = KChoice::Fixed(2);
                cfg.latent = 3;
                cfg.trials = 50;
                cfg.n_values = vec![50, 100, 200, 500, 1000];
            }
        }
        cfg
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                McaError::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(McaError::Config(format!(
                    "line {}: unknown key `{key}`",
                    lineno + 1
                )));
            }
            if entries
                .insert(key.to_string(), value.trim().to_string())
                .is_some()
            {
                return Err(McaError::Config(format!(
                    "line {}: duplicate key `{key}`",
                    lineno + 1
                )));
            }
        }
        let kind: Kind = entries
            .get("kind")
            .ok_or_else(|| McaError::Config("missing `kind`".into()))?
            .parse()?;
        let mut cfg = Self::defaults(kind);
        for (key, raw) in &entries {
            cfg.set(key, raw)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| McaError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Overrides one key; `kind` cannot be changed.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<()> {
        match key {
            "kind" => {
                if raw.parse::<Kind>()? != self.kind {
                    return Err(McaError::Config("`kind` cannot be changed".into()));
                }
            }
            "match" => self.match_strategy = raw.parse()?,
            "n" => self.n = parse_value(key, raw)?,
            "r" => self.r = parse_value(key, raw)?,
            "k" => self.k = raw.parse()?,
            "seeds" => self.seeds = parse_list(key, raw)?,
            "mnist_dir" => self.mnist_dir = Some(PathBuf::from(raw)),
            "out" => self.out = PathBuf::from(raw),
            "neighbors" => self.neighbors = parse_value(key, raw)?,
            "n_values" => self.n_values = parse_list(key, raw)?,
            "d1" => self.d1 = parse_value(key, raw)?,
            "d2" => self.d2 = parse_value(key, raw)?,
            "latent" => self.latent = parse_value(key, raw)?,
            "trials" => self.trials = parse_value(key, raw)?,
            "n_ref" => self.n_ref = parse_value(key, raw)?,
            "sigma" => self.sigma = parse_value(key, raw)?,
            "noise" => self.noise = parse_value(key, raw)?,
            other => return Err(McaError::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n", self.n),
            ("r", self.r),
            ("neighbors", self.neighbors),
            ("d1", self.d1),
            ("d2", self.d2),
            ("latent", self.latent),
            ("trials", self.trials),
        ];
        for (key, value) in positive {
            if value == 0 {
                return Err(McaError::Config(format!("`{key}` must be at least 1")));
            }
        }
        if self.seeds.is_empty() {
            return Err(McaError::Config(
                "`seeds` must list at least one seed".into(),
            ));
        }
        if !(self.sigma >= 0.0 && self.noise >= 0.0) {
            return Err(McaError::Config("noise levels must be nonnegative".into()));
        }
        if self.kind == Kind::MnistMnist && self.match_strategy == MatchStrategy::Source {
            return Err(McaError::Config(
                "`match = source` needs index-aligned domains (crop-pixelate)".into(),
            ));
        }
        if self.kind == Kind::Convergence && self.n_values.iter().any(|&n| n < 2 || n > self.n_ref)
        {
            return Err(McaError::Config(
                "convergence `n_values` must lie in 2..=n_ref".into(),
            ));
        }
        Ok(())
    }

    /// The MNIST directory: `mnist_dir`, else `$MCA_MNIST_DIR`, else `data/mnist`.
    pub fn resolved_mnist_dir(&self) -> PathBuf {
        self.mnist_dir
            .clone()
            .or_else(|| std::env::var_os("MCA_MNIST_DIR").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("data/mnist"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_table_row() {
        let cfg = ExperimentConfig::parse(
            "# crop -> pixelate\nkind = crop-pixelate\nn = 20\nk = 19\nseeds = 1, 2,3\n",
        )
        .unwrap();
        assert_eq!(cfg.kind, Kind::CropPixelate);
        assert_eq!(cfg.match_strategy, MatchStrategy::Source);
        assert_eq!((cfg.n, cfg.r, cfg.k), (20, 1, KChoice::Fixed(19)));
        assert_eq!(cfg.seeds, vec![1, 2, 3]);
        assert_eq!(cfg.neighbors, 10);
    }

    #[test]
    fn kind_may_come_last() {
        let cfg = ExperimentConfig::parse("k = auto\nmatch = label\nkind = mnist-mnist").unwrap();
        assert_eq!(cfg.k, KChoice::Auto);
        assert_eq!(cfg.match_strategy, MatchStrategy::Label);
        assert_eq!(cfg.r, 5);
    }

    #[test]
    fn large_seeds_survive() {
        let cfg = ExperimentConfig::parse("kind = mickey\nseeds = 18446744073709551615").unwrap();
        assert_eq!(cfg.seeds, vec![u64::MAX]);
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "n = 3",
            "kind = nope",
            "kind = mickey\nfoo = 1",
            "kind = mickey\nn = 2\nn = 3",
            "kind = mickey\nk = 0",
            "kind = mickey\nr = 0",
            "kind = mickey\nseeds = ",
            "kind = mickey\njust a line",
            "kind = mnist-mnist\nmatch = source",
            "kind = convergence\nn_values = 10, 50000",
        ] {
            assert!(
                matches!(ExperimentConfig::parse(text), Err(McaError::Config(_))),
                "{text:?}"
            );
        }
    }

    #[test]
    fn serializes_k_as_number_or_auto() {
        let mut cfg = ExperimentConfig::defaults(Kind::Mickey);
        let json = serde_json::to_value(&cfg).unwrap();
        assert_eq!(json["k"], 2);
        assert_eq!(json["kind"], "mickey");
        cfg.k = KChoice::Auto;
        assert_eq!(serde_json::to_value(&cfg).unwrap()["k"], "auto");
    }
}
