//! Seed derivation for reproducible ensembles.
//!
//! Every random stream in the crate is a `ChaCha8Rng` seeded from a `u64`.
//! Per-run and per-point seeds are derived by SplitMix64 mixing so that
//! runs can be scheduled on any number of threads and still see the same
//! numbers:
//!
//! ```text
//! point_seed(base, point) = splitmix64(base ^ splitmix64(point + 1))
//! run_seed(base, point, run) = splitmix64(point_seed(base, point) ^ run)
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// One step of the SplitMix64 output function.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn point_seed(base: u64, point: u64) -> u64 {
    splitmix64(base ^ splitmix64(point.wrapping_add(1)))
}

pub fn run_seed(base: u64, point: u64, run: u64) -> u64 {
    splitmix64(point_seed(base, point) ^ run)
}

pub fn rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}
