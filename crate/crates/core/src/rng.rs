//! Seeded random streams.
//!
//! Every random draw comes from a ChaCha8 generator keyed by the run seed.
//! ChaCha's 64-bit stream id partitions that key into independent substreams:
//! optimizer step `s` uses stream `s`, and the reserved streams far above any step
//! count serve data generation, band estimation and study replicates.
//! Each consumer draws in a fixed order, so results depend only on
//! `(seed, stream)`.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const DATA_STREAM: u64 = u64::MAX;
pub const BAND_STREAM: u64 = u64::MAX - 1;
/// Replicate `r` of a Monte Carlo study uses `REPLICATE_STREAM_BASE + r`.
pub const REPLICATE_STREAM_BASE: u64 = 1 << 62;

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Substream for optimizer step `step`.
pub fn step_rng(seed: u64, step: usize) -> ChaCha8Rng {
    stream(seed, step as u64)
}

/// `rows × cols` standard-normal matrix filled row by row.
pub fn standard_normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_row_iterator(rows, cols, (0..rows * cols).map(|_| StandardNormal.sample(rng)))
}

pub fn standard_normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}
