//! Deterministic seed derivation.
//!
//! Every randomized stage (init, shuffles, resampling draws, synthetic
//! samples, augmentation) gets its own RNG stream derived from a root seed
//! plus a purpose tag, so results never depend on call order and any single
//! sample or batch can be regenerated in isolation.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// 32-byte key from a root seed and a list of tag parts.
pub fn derive_key(root: u64, tags: &[&str]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(root.to_le_bytes());
    for tag in tags {
        hasher.update([0x1f]);
        hasher.update(tag.as_bytes());
    }
    hasher.finalize().into()
}

/// Seeded RNG for a named purpose.
pub fn rng(root: u64, tags: &[&str]) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(derive_key(root, tags))
}

/// 64-bit sub-seed for a named purpose.
pub fn derive_u64(root: u64, tags: &[&str]) -> u64 {
    let key = derive_key(root, tags);
    u64::from_le_bytes(key[..8].try_into().unwrap())
}
