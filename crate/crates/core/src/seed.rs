//! Deterministic seed derivation.
//!
//! Every random stream in the engine is a [`ChaCha8Rng`] built from an
//! explicit seed. Child streams are derived by mixing a parent seed with a
//! label, so that independent consumers (fold splits, weight init, dropout
//! masks) never share state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over a byte string; stable across platforms and toolchains.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// splitmix64 finalizer.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from `parent` and a textual label.
pub fn derive(parent: u64, label: &str) -> u64 {
    mix(parent ^ fnv1a(label.as_bytes()))
}

/// Derive a child seed from `parent`, a label and an index.
pub fn derive_indexed(parent: u64, label: &str, index: u64) -> u64 {
    mix(derive(parent, label) ^ mix(index))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
