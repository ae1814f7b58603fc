//! Matching component analysis (MCA).
//!
//! Given a small sample of matched points from two domains, MCA finds affine
//! maps `g_i(x) = A_i x + b_i` into a common `k`-dimensional domain so that
//! matched points land close together while each domain's image is white
//! (zero mean, identity covariance). The crate also carries the experiment
//! harness used to exercise the method: an affine-linear generator with an
//! exact-matching verifier, matching strategies, a k-NN classifier, MNIST
//! ingestion and the synthetic "Mickey" point cloud.

pub mod alm;
pub mod classify;
pub mod datasets;
pub mod error;
pub mod experiment;
pub mod matching;
pub mod mca;
pub mod numlin;
pub mod procrustes;
pub mod rng;

pub use error::{McaError, Result};
pub use mca::{AffineMap, McaModel, Whitening};
pub use numlin::{Matrix, Vector};
