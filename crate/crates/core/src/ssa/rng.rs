//! Seed derivation for reproducible parallel streams.
//!
//! Every replica owns a `ChaCha8Rng` keyed by a sub-seed derived from the
//! master seed and the replica index, so results never depend on which
//! worker ran which replica.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function; a bijection on `u64`.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sub-seed of replica `index`. Distinct indices give distinct sub-seeds
/// because `index -> master + GOLDEN (index + 1)` is injective (GOLDEN is
/// odd) and `mix64` is a bijection.
pub fn sub_seed(master: u64, index: u64) -> u64 {
    mix64(master.wrapping_add(GOLDEN.wrapping_mul(index.wrapping_add(1))))
}

/// Seed for an independent sub-experiment labelled by `tag`.
pub fn derive_seed(master: u64, tag: &str, index: u64) -> u64 {
    let mut h = master;
    for b in tag.bytes() {
        h = mix64(h ^ b as u64);
    }
    sub_seed(h, index)
}

/// Generator for the simulation stream of `seed`.
pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for initial-state draws, on a different ChaCha stream than
/// the simulation itself.
pub fn initial_stream(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// Fresh seed from the operating system.
pub fn entropy_seed() -> u64 {
    rand::random()
}
