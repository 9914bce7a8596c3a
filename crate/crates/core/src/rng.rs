//! Seed derivation. Every random stream is a ChaCha8 generator keyed by the
//! run seed mixed with a purpose tag, so streams never overlap by accident.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive(seed: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(mix(seed), |acc, &p| mix(acc ^ mix(p)))
}

pub fn tag(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}

pub fn stream(seed: u64, purpose: &str, parts: &[u64]) -> ChaCha8Rng {
    let mut all = vec![tag(purpose)];
    all.extend_from_slice(parts);
    ChaCha8Rng::seed_from_u64(derive(seed, &all))
}
