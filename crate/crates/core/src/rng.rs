//! Seeded random streams.
//!
//! Every stream is a `ChaCha12Rng` seeded through `seed_from_u64` with
//! `base_seed ^ splitmix64(stream)`. Replication `r` uses stream `r`, so any
//! subset of replications can be regenerated on its own.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type SimRng = ChaCha12Rng;

/// Recorded in run manifests.
pub const RNG_ID: &str = "ChaCha12Rng(seed_from_u64(seed ^ splitmix64(stream)))";

/// Stream reserved for censoring calibration.
pub const CALIBRATION_STREAM: u64 = u64::MAX;

/// Stream reserved for out-of-sample checks of a calibration.
pub const VALIDATION_STREAM: u64 = u64::MAX - 1;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn stream_seed(seed: u64, stream: u64) -> u64 {
    seed ^ splitmix64(stream)
}

pub fn stream(seed: u64, stream: u64) -> SimRng {
    SimRng::seed_from_u64(stream_seed(seed, stream))
}
