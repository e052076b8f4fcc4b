//! Named random substreams.
//!
//! Every stochastic operation draws from a ChaCha20 stream whose key is the
//! SHA-256 digest of `(seed, name, index)`. Streams for different operations
//! (or different chunks of one operation) are therefore independent and the
//! output never depends on the order or the thread in which they are used.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha20Rng;

/// Deterministic generator for substream `name[index]` of `seed`.
pub fn substream(seed: u64, name: &str, index: u64) -> StreamRng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update((name.len() as u64).to_le_bytes());
    hasher.update(name.as_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha20Rng::from_seed(key)
}

/// Derive a child seed, for handing a seed to a sub-operation.
pub fn derive_seed(seed: u64, name: &str, index: u64) -> u64 {
    use rand::RngCore;
    substream(seed, name, index).next_u64()
}
