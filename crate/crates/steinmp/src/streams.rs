//! Named random sub-streams. Every generator in a run is derived from the
//! run seed and a stream name, so adding a consumer never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    seed: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn digest(&self, name: &str) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(name.as_bytes());
        h.finalize().into()
    }

    pub fn rng(&self, name: &str) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.digest(name))
    }

    /// A `u64` seed for APIs that seed their own generator.
    pub fn seed_for(&self, name: &str) -> u64 {
        let d = self.digest(name);
        u64::from_le_bytes(d[..8].try_into().unwrap())
    }
}
