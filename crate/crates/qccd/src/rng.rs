//! Deterministic seed derivation.
//!
//! Every stochastic component (circuit generation, shot sampling,
//! bootstrap resampling) draws from a ChaCha stream seeded by a
//! `(root seed, purpose tag, index)` triple, so identical command lines
//! reproduce identical records regardless of thread scheduling or
//! platform.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer: a fast, well-mixed 64-bit hash step.
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a root seed, a purpose tag, and an index.
pub fn derive_seed(root: u64, tag: &str, index: u64) -> u64 {
    let mut h = splitmix(root);
    for &b in tag.as_bytes() {
        h = splitmix(h ^ u64::from(b));
    }
    splitmix(h ^ index)
}

/// Build a deterministic RNG for `(root, tag, index)`.
pub fn rng_for(root: u64, tag: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, tag, index))
}
