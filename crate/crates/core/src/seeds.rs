//! Stable seed derivation.
//!
//! `derive_seed(base, parts)` folds each part into a SplitMix64 state:
//! `s = mix(s ^ part)` after starting from `mix(base)`. The mapping is
//! part of the output contract: changing it changes every simulated number.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer applied to `x + golden ratio`.
pub fn mix(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(mix(base), |s, &p| mix(s ^ p))
}

/// Stream tags for the two random sources of a simulation run.
pub(crate) const ARRIVAL_STREAM: u64 = 0xA11;
pub(crate) const SUCCESS_STREAM: u64 = 0x5CC;
