use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = McaError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum McaError {
    #[error("empty sample")]
    EmptySample,

    #[error("rank zero")]
    RankZero,

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    /// Requested common dimension exceeds the rank of one of the domains.
    #[error("INFEASIBLE: k = {k} exceeds min(r1, r2) = min({r1}, {r2})")]
    Infeasible { k: usize, r1: usize, r2: usize },

    #[error("input is not whitened: max |(1/n) Z Z^T - I| = {deviation:e}")]
    NotWhitened { deviation: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("label {0} has no candidates in the training set")]
    LabelAbsent(u32),

    #[error("label {label} has {available} training candidates, {needed} required")]
    TooFewCandidates {
        label: u32,
        needed: usize,
        available: usize,
    },

    #[error("index {index} out of range for {context} of size {len}")]
    IndexOutOfRange {
        context: &'static str,
        index: usize,
        len: usize,
    },

    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: u32, num_classes: usize },

    #[error("{path}: bad IDX magic number {found:#010x}, expected {expected:#010x}")]
    BadMagic {
        path: PathBuf,
        expected: u32,
        found: u32,
    },

    #[error("{path}: truncated IDX file ({needed} bytes needed, {available} available)")]
    Truncated {
        path: PathBuf,
        needed: usize,
        available: usize,
    },

    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },

    #[error("config: {0}")]
    Config(String),

    #[error("missing data file {0} (set `mnist_dir` or MCA_MNIST_DIR)")]
    MissingData(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}
