//! Seeded random streams and random matrix helpers.
//!
//! Every generator in the crate takes a 64-bit seed. Independent workers
//! (trials, seeds of a sweep) derive their own stream from `(seed, index)` so
//! results do not depend on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::numlin::Matrix;

pub type StreamRng = ChaCha8Rng;

pub fn seeded(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with the
/// signs of `R`'s diagonal absorbed into `Q`).
pub fn random_orthogonal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Matrix {
    let qr = gaussian_matrix(rng, n, n).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Uniformly random rotation (orthogonal with determinant +1).
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Matrix {
    let mut q = random_orthogonal(rng, n);
    if q.determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    q
}
