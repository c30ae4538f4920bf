//! Seed derivation.
//!
//! Every random draw in the crate comes from a ChaCha8 stream keyed by a seed
//! derived with [`mix`], so independent consumers (per-class label draws, per
//! grid cell SOM training) never share a sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer applied to `a ^ b`-style combinations. Stable across
/// platforms and releases.
pub fn mix(a: u64, b: u64) -> u64 {
    let mut z = a
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(b.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a sequence of words into one seed.
pub fn mix_all(base: u64, words: &[u64]) -> u64 {
    words.iter().fold(mix(base, 0x006d_7373_6f6d), |acc, &w| mix(acc, w))
}

/// Stable 64-bit hash of a string (FNV-1a), for mixing identifiers into seeds.
pub fn hash_str(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

/// A ChaCha8 generator on `stream` of the key derived from `seed`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
