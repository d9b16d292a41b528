//! Seeded random streams.
//!
//! Every stochastic component takes a `u64` seed. Sub-streams (per document,
//! per fold, per client) are derived by hashing the parent seed together with
//! a stable key so results never depend on iteration or thread order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive an independent stream from `seed` and a textual key.
pub fn stream(seed: u64, key: &str) -> Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update((key.len() as u64).to_le_bytes());
    hasher.update(key.as_bytes());
    let digest: [u8; 32] = hasher.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

/// Derive a child seed, for handing to another seeded component.
pub fn child_seed(seed: u64, key: &str) -> u64 {
    use rand::RngCore;
    stream(seed, key).next_u64()
}
