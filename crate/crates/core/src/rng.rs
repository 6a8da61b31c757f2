//! Seeded random streams.
//!
//! Every source of randomness in the crate is a ChaCha20 generator
//! (`rand_chacha::ChaCha20Rng`) seeded with `seed_from_u64(seed)` and then
//! moved onto a numbered stream. ChaCha20 output is specified bit-for-bit,
//! so splits, synthetic data and initializations are reproducible across
//! platforms for a given seed.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Purpose tags that keep independent consumers of one seed apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Synth = 1,
    Split = 2,
    Init = 3,
    Shuffle = 4,
}

/// Generator for `(seed, purpose, index)`. Distinct triples give
/// non-overlapping streams.
pub fn stream(seed: u64, purpose: Purpose, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 48) ^ index);
    rng
}
