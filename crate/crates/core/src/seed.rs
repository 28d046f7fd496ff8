//! Deterministic seed splitting.
//!
//! Every random stream in the pipeline is derived from a single master seed and a
//! purpose tag, so one integer reproduces a whole run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used for every seeded stream.
pub type Rng = ChaCha8Rng;

/// Purpose tags for [`derive`].
pub mod stream {
    pub const SCENE_GEOMETRY: u64 = 1;
    pub const SPECKLE_T1: u64 = 2;
    pub const SPECKLE_T2: u64 = 3;
    pub const SAMPLING: u64 = 4;
    pub const OVERSAMPLING: u64 = 5;
    pub const FILTERS: u64 = 6;
    pub const CLASSIFIER: u64 = 7;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of the `purpose` stream from `master`.
pub fn derive(master: u64, purpose: u64) -> u64 {
    splitmix64(splitmix64(master) ^ purpose.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

pub fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Shorthand for `rng(derive(master, purpose))`.
pub fn stream_rng(master: u64, purpose: u64) -> Rng {
    rng(derive(master, purpose))
}
