//! Seed derivation for reproducible, order-independent randomness.
//!
//! Every stochastic draw in the crate comes from a `ChaCha8Rng` whose seed is
//! derived from a master seed and a small tuple of counters (pass index,
//! sample index, candidate index, ...). Since a stream depends only on its
//! coordinates, work can be spread over any number of threads without
//! changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer. A bijection on `u64`.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `seed` and a list of counters.
///
/// Each counter is folded in through the SplitMix64 finalizer, so the result
/// is a chain of bijections keyed by position.
pub fn derive(seed: u64, counters: &[u64]) -> u64 {
    let mut state = mix64(seed.wrapping_add(GOLDEN));
    for (pos, &c) in counters.iter().enumerate() {
        state = mix64(state ^ mix64(c.wrapping_add(GOLDEN.wrapping_mul(pos as u64 + 2))));
    }
    state
}

/// Seed for Monte-Carlo dropout pass `pass` on sample `sample`.
pub fn pass_seed(master_seed: u64, pass: usize, sample: usize) -> u64 {
    derive(master_seed, &[pass as u64, sample as u64])
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Environment variable that overrides the default seed of the CLI.
pub const SEED_ENV: &str = "LVR_SEED";

/// Seed used when neither `--seed` nor the environment provide one.
pub const DEFAULT_SEED: u64 = 20_230_101;
