//! Seed derivation.
//!
//! Every random decision in the pipeline draws from a [`Stream`] keyed by a
//! root seed and a path of integers (tree index, fold id, UE id, ...). Keys
//! are mixed with SplitMix64 so that neighbouring paths give unrelated
//! streams, and ChaCha8 makes the streams identical across platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Concrete generator used for every stream.
pub type Stream = ChaCha8Rng;

/// Purpose tags for sub-streams of a root seed.
pub mod purpose {
    pub const SCENARIO: u64 = 0x5343_454e;
    pub const SHADOWING: u64 = 0x5348_4144;
    pub const FADING: u64 = 0x4641_4445;
    pub const SAMPLING: u64 = 0x5341_4d50;
    pub const FOLDS: u64 = 0x464f_4c44;
    pub const FOREST: u64 = 0x464f_5245;
    pub const PERMUTATION: u64 = 0x5045_524d;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `root` and an ordered key path.
pub fn derive_seed(root: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(root), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

/// Opens the stream for `root` and `path`.
pub fn stream(root: u64, path: &[u64]) -> Stream {
    Stream::seed_from_u64(derive_seed(root, path))
}
