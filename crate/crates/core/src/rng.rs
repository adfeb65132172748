//! Reproducible random streams.
//!
//! A [`RandomStream`] is a root seed. Every consumer draws from a named
//! substream whose ChaCha key is the SHA-256 of the root seed, the purpose
//! label, and an index, so results never depend on the order in which
//! substreams are created or consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomStream {
    seed: u64,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        RandomStream { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn substream_key(&self, label: &str, index: u64) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"tissuesim/v1");
        h.update(self.seed.to_le_bytes());
        h.update((label.len() as u64).to_le_bytes());
        h.update(label.as_bytes());
        h.update(index.to_le_bytes());
        h.finalize().into()
    }

    pub fn substream(&self, label: &str, index: u64) -> StreamRng {
        ChaCha8Rng::from_seed(self.substream_key(label, index))
    }
}
