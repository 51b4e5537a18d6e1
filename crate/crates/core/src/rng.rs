//! Seed derivation and per-node random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream ids reserved for non-node consumers of a master seed.
pub mod stream {
    pub const PROBLEM: u64 = 1 << 40;
    pub const GRAPH: u64 = (1 << 40) + 1;
    pub const MONTE_CARLO: u64 = (1 << 40) + 2;
}

/// SplitMix64 finalizer; used to derive independent sub-seeds from one master seed.
pub fn mix_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A generator for stream `stream` under `seed`. Distinct streams never overlap.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One independent generator per node.
pub fn node_streams(seed: u64, n: usize) -> Vec<SimRng> {
    (0..n as u64).map(|i| stream_rng(seed, i)).collect()
}
