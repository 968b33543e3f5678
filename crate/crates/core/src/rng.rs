//! Seeded randomness.
//!
//! All random choices use ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded through
//! `SeedableRng::seed_from_u64`. Child seeds are derived with SplitMix64 over
//! `seed ^ (stream * GOLDEN) ^ index` so that parallel or reordered work
//! reproduces exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Named derivation streams.
pub mod stream {
    pub const WORLD: u64 = 1;
    pub const TASK: u64 = 2;
    pub const SAMPLE: u64 = 3;
    pub const HEURISTIC: u64 = 4;
    pub const FAULT: u64 = 5;
    pub const SUITE: u64 = 6;
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    splitmix64(seed ^ stream.wrapping_mul(GOLDEN) ^ splitmix64(index))
}

pub fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

pub fn derived_rng(seed: u64, stream: u64, index: u64) -> Rng {
    rng(derive_seed(seed, stream, index))
}
