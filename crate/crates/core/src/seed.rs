//! Seed derivation tree.
//!
//! Every random object in the crate is generated from a 64-bit seed obtained
//! by walking labels down from a single master seed. A child seed is the first
//! eight bytes (little endian) of `SHA-256(parent.to_le_bytes() || label)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedTree {
    pub seed: u64,
}

impl SeedTree {
    pub fn new(master: u64) -> Self {
        SeedTree { seed: master }
    }

    /// Seed of the child reached by `label`.
    pub fn derive(&self, label: &str) -> u64 {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(label.as_bytes());
        let out = h.finalize();
        let mut b = [0u8; 8];
        b.copy_from_slice(&out[..8]);
        u64::from_le_bytes(b)
    }

    pub fn child(&self, label: &str) -> SeedTree {
        SeedTree::new(self.derive(label))
    }

    /// Follows a `/`-separated path of labels.
    pub fn path(&self, path: &str) -> SeedTree {
        path.split('/').filter(|s| !s.is_empty()).fold(*self, |t, l| t.child(l))
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// 64-bit finalizer used for hash-derived graph neighbors.
#[inline]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
