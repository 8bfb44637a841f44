//! Named random sub-streams.
//!
//! Every stochastic stage draws from its own ChaCha stream derived from one
//! global seed and a stable name (`"pretrain.mask"`, `"finetune.init"`, ...),
//! so stages can be re-run in isolation and still see the same numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

/// Derive a 64-bit seed from a parent seed and a stream name.
pub fn derive_seed(seed: u64, name: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(name.as_bytes());
    let digest = hasher.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(head)
}

pub fn substream(seed: u64, name: &str) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(seed, name))
}
