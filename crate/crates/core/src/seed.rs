//! Seed derivation for independent random streams.
//!
//! Run `r` of a campaign with base seed `s` uses `derive(s, &[r])`, and
//! particle `p` of that run uses `derive(s, &[r, p])`. The mixing function is
//! SplitMix64, applied once per path element, so streams are a pure function
//! of their path and do not depend on scheduling. Derivation composes:
//! `derive(derive(s, &[r]), &[p]) == derive(s, &[r, p])`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The random stream type used throughout the crate.
pub type Stream = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a base seed and a path of indices.
pub fn derive(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(base, |acc, &i| splitmix64(acc ^ splitmix64(i.wrapping_add(1))))
}

/// A stream seeded from `derive(base, path)`.
pub fn stream(base: u64, path: &[u64]) -> Stream {
    Stream::seed_from_u64(derive(base, path))
}
