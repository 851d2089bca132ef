//! Seeded random streams.
//!
//! Every randomized routine draws from a ChaCha8 stream addressed by
//! `(seed, ordinal)`, so results never depend on how work is scheduled
//! across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Independent stream number `ordinal` under `seed`.
pub fn substream(seed: u64, ordinal: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(ordinal);
    rng
}

/// Derives a child seed for a named purpose, so that e.g. splitting and
/// negative-label synthesis under the same user seed do not share streams.
pub fn derive_seed(seed: u64, purpose: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ purpose.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
