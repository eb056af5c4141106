//! Seed handling. Every random stream in the crate is a ChaCha8 generator
//! seeded from a master seed mixed with a stream counter.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent seed for sub-stream `stream` of `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream.wrapping_mul(GOLDEN).wrapping_add(1)))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream identifiers used by the pipeline.
pub(crate) mod streams {
    pub const DATA: u64 = 0xDA7A;
    pub const ENSEMBLE: u64 = 1;
    pub const POSTERIOR: u64 = 2;
    pub const INIT: u64 = 3;
    pub const GA: u64 = 4;
    pub const SPLIT: u64 = 5;
    pub const RUNS: u64 = 6;
}
