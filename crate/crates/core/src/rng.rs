//! Seed derivation.
//!
//! Every random draw in the crate comes from a ChaCha stream keyed by a
//! base seed plus a path of tags (scene index, frame index, purpose...).
//! Results therefore never depend on scheduling or iteration order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `tags` into `base`, producing an independent child seed.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(base), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn rng_for(base: u64, tags: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(base, tags))
}

/// Purpose tags so that streams used for different things never collide.
pub(crate) mod stream {
    pub const PLANT: u64 = 1;
    pub const BACKGROUND: u64 = 2;
    pub const VIEWPOINT: u64 = 3;
    pub const LATENT: u64 = 4;
    pub const MISS: u64 = 5;
    pub const JITTER: u64 = 6;
    pub const FEATURE: u64 = 7;
    pub const FALSE_POSITIVE: u64 = 8;
    pub const SHUFFLE: u64 = 9;
    pub const EMBEDDING: u64 = 10;
    pub const POSE_NOISE: u64 = 11;
    pub const SEQUENCE: u64 = 12;
    pub const DETECTOR: u64 = 13;
}
