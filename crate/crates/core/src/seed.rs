//! Counter-based seed derivation.
//!
//! Every experiment takes a single master seed. The stream for a given
//! purpose and instance index is `derive(master, &[purpose, index, ..])`,
//! which folds the words through the SplitMix64 finaliser. Any instance can
//! therefore be re-run in isolation from `(master, purpose, index)` alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a master seed and a path of counters.
pub fn derive(master: u64, path: &[u64]) -> u64 {
    let mut state = mix(master.wrapping_add(GOLDEN));
    for &word in path {
        state = mix(state.wrapping_add(GOLDEN) ^ mix(word.wrapping_add(GOLDEN)));
    }
    state
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Purpose tags used as the first element of derivation paths.
pub mod purpose {
    pub const GRAPH: u64 = 1;
    pub const COLORING: u64 = 2;
    pub const ORDER: u64 = 3;
    pub const SURVEY: u64 = 4;
    pub const PERTURB: u64 = 5;
    pub const DESCENT: u64 = 6;
    pub const TRIPLE: u64 = 7;
}
