//! Seed derivation.
//!
//! Every consumer of randomness draws from its own ChaCha stream keyed by
//! `(root seed, purpose, counter)`, so the draws seen by one purpose never
//! depend on how many values another purpose consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags for derived streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    Topology = 1,
    Sampling = 2,
    TieBreak = 3,
    Sweep = 4,
    Scenario = 5,
    Latency = 6,
    Streaming = 7,
    Repeat = 8,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of stream `(purpose, index)` under `root`.
pub fn derive_seed(root: u64, purpose: Stream, index: u64) -> u64 {
    let a = splitmix64(root ^ splitmix64(purpose as u64));
    splitmix64(a ^ splitmix64(index.wrapping_add(0xA076_1D64_78BD_642F)))
}

pub fn stream_rng(root: u64, purpose: Stream, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, purpose, index))
}

/// Hashes a tuple of words to a uniform `f64` in `[0, 1)` without any
/// generator state. Used where a value must be a pure function of its key
/// (pairwise latencies).
pub fn hash_unit(root: u64, purpose: Stream, a: u64, b: u64) -> f64 {
    let h = splitmix64(derive_seed(root, purpose, a) ^ splitmix64(b));
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
