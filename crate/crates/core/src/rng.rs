//! Seeded randomness.
//!
//! Every stochastic routine takes an explicit seed and builds its own
//! xoshiro256** stream (seeded through splitmix64). Child seeds are derived
//! by hashing a label together with the parent seed so that adding a new
//! consumer never perturbs existing streams.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256StarStar;
use sha2::{Digest, Sha256};

pub type Rng = Xoshiro256StarStar;

pub fn rng(seed: u64) -> Rng {
    Xoshiro256StarStar::seed_from_u64(seed)
}

/// Derive a child seed from `seed` and a textual label.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 digest is 32 bytes"))
}

/// Stable 64-bit fingerprint of arbitrary bytes, rendered as 16 hex digits.
pub fn fingerprint(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Fisher-Yates shuffle driven by our own stream.
pub fn shuffle<T>(items: &mut [T], rng: &mut Rng) {
    use rand::Rng as _;
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}
