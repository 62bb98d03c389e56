//! Seeded randomness shared by every stochastic component.
//!
//! All draws go through [`Pcg64`] (128-bit state, 64-bit output, XSL-RR
//! permutation). Sub-streams are derived by mixing a base seed with integer
//! or string keys through SplitMix64, so a component's output depends only on
//! its own key and never on how many draws another component made.

use rand::SeedableRng;
pub use rand_pcg::Pcg64;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the UTF-8 bytes; stable across platforms and releases.
fn fnv1a(key: &str) -> u64 {
    key.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Derives a child seed from `base` and an ordered list of integer keys.
pub fn derive_seed(base: u64, keys: &[u64]) -> u64 {
    keys.iter()
        .fold(splitmix64(base), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

/// Derives a child seed from `base` and a string key (typically a document id).
pub fn derive_seed_str(base: u64, key: &str) -> u64 {
    derive_seed(base, &[fnv1a(key)])
}

pub fn rng_from_seed(seed: u64) -> Pcg64 {
    Pcg64::seed_from_u64(seed)
}
