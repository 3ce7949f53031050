//! Deterministic seed derivation.
//!
//! A master seed splits into per-check and per-trial seeds through a fixed
//! counter-based derivation, so independent checks (and independent trials
//! inside a check) can run in any order, or in parallel, and still reproduce
//! bit-identical streams.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; the standard 64-bit mixer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derive a child seed from a master seed and a textual label.
pub fn derive_labeled(master: u64, label: &str) -> u64 {
    splitmix64(master ^ fnv1a(label))
}

/// Derive a child seed from a parent seed and a counter (trial index).
pub fn derive_indexed(parent: u64, index: u64) -> u64 {
    splitmix64(parent ^ splitmix64(index))
}

/// The project-wide deterministic RNG: ChaCha8 keyed by a 64-bit seed.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
