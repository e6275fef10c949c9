//! Seed derivation for independent, reproducible work items.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a global seed with a work-item id. Stable across platforms and
/// releases, unlike `std`'s hashers.
pub fn derive_seed(global: u64, item: u64) -> u64 {
    splitmix64(splitmix64(global) ^ item.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn rng_for(global: u64, item: u64) -> SimRng {
    SimRng::seed_from_u64(derive_seed(global, item))
}
