//! Seed derivation.
//!
//! Every random choice in the pipeline draws from a ChaCha stream whose seed
//! is derived from the master seed plus a path of named tags, so results do
//! not depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type PipelineRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn hash_tag(tag: &str) -> u64 {
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// A position in the seed tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedPath(u64);

impl SeedPath {
    pub fn new(master_seed: u64) -> Self {
        SeedPath(splitmix64(master_seed))
    }

    /// Child stream for a named substream (e.g. "imputation", "cv").
    pub fn child(self, tag: &str) -> Self {
        SeedPath(splitmix64(self.0 ^ hash_tag(tag)))
    }

    /// Child stream for an integer index (simulation number, tree number, ...).
    pub fn index(self, i: u64) -> Self {
        SeedPath(splitmix64(self.0.wrapping_add(splitmix64(i ^ 0xA076_1D64_78BD_642F))))
    }

    pub fn seed(self) -> u64 {
        self.0
    }

    pub fn rng(self) -> PipelineRng {
        PipelineRng::seed_from_u64(self.0)
    }
}
