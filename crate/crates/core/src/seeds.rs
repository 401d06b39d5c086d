//! Stable sub-seed derivation.
//!
//! Sub-seeds are the first eight bytes of SHA-256 over the master seed and a
//! list of labels, so a stage's seed depends only on its own labels and never
//! on how many other stages ran before it.

use sha2::{Digest, Sha256};

pub fn derive_seed(master: u64, labels: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    for label in labels {
        hasher.update((label.len() as u64).to_le_bytes());
        hasher.update(label.as_bytes());
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}
