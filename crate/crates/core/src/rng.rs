//! Seeded random streams.
//!
//! Every random draw in the crate goes through [`seeded_rng`], a ChaCha8
//! generator keyed from a 64-bit seed, so results are reproducible across
//! platforms. Independent sub-streams are derived with [`split_seed`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the seed of sub-stream `stream` from `parent`.
///
/// `split_seed(parent, i)` is a pure function; distinct `(parent, i)` pairs
/// give statistically independent seeds.
pub fn split_seed(parent: u64, stream: u64) -> u64 {
    mix(mix(parent ^ 0x9e37_79b9_7f4a_7c15).wrapping_add(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}
