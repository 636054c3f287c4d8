//! Labeled seed derivation.
//!
//! Every random draw in a snapshot comes from its own sub-stream keyed by a
//! text label, so adding a receive point or a mobile never shifts the draws
//! of unrelated links.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derives a child seed from `seed` and a label. Stable across platforms and releases.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut word = [0u8; 8];
    word.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(word)
}

/// Generator for the sub-stream named `label` under `seed`.
pub fn labeled_rng(seed: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, label))
}

/// Seed of snapshot `index` in a campaign started from `master`.
pub fn snapshot_seed(master: u64, index: usize) -> u64 {
    derive_seed(master, &format!("snapshot/{index}"))
}
