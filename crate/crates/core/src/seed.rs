//! Stable seed derivation.
//!
//! Every random stream in the crate is a ChaCha8 generator keyed by a 64-bit
//! seed. Seeds for independent sub-streams are derived by hashing the parent
//! seed with a tag, so adding a draw to one stream never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// First 8 bytes (little-endian) of SHA-256 over the given parts, each
/// length-prefixed so that part boundaries are unambiguous.
pub fn stable_hash(parts: &[&[u8]]) -> u64 {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Per-sample seed: decouples samples so any subset of a batch reproduces.
pub fn sample_seed(global_seed: u64, sample_id: &str, spec_seed: u64) -> u64 {
    stable_hash(&[
        &global_seed.to_le_bytes(),
        sample_id.as_bytes(),
        &spec_seed.to_le_bytes(),
    ])
}

pub fn derive(seed: u64, tag: &str) -> u64 {
    stable_hash(&[&seed.to_le_bytes(), tag.as_bytes()])
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn sub_rng(seed: u64, tag: &str) -> ChaCha8Rng {
    rng(derive(seed, tag))
}
