//! Seed derivation.
//!
//! Every random draw in the crate comes from a stream derived from one root
//! seed by `derive(root, tag, counter)`. The derivation hashes the purpose tag
//! with 64-bit FNV-1a and mixes it with the root seed and counter through the
//! SplitMix64 finalizer. Streams are ChaCha8 generators seeded from the
//! derived value.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over raw bytes.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// SplitMix64 output function.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the seed of the `counter`-th stream for purpose `tag`.
pub fn derive(root: u64, tag: &str, counter: u64) -> u64 {
    let t = fnv1a(tag.as_bytes());
    mix64(mix64(root ^ t).wrapping_add(mix64(counter ^ 0x5851_f42d_4c95_7f2d)))
}

pub fn stream(root: u64, tag: &str, counter: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(root, tag, counter))
}

/// Counter-based uniform in [0, 1): the value for index `i` does not depend
/// on the order in which indices are visited.
pub fn uniform_at(seed: u64, i: u64) -> f64 {
    let bits = mix64(seed ^ mix64(i.wrapping_add(0x2545_f491_4f6c_dd1d)));
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
