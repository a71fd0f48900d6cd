//! Seeded RNG used everywhere randomness is needed, so results are a pure
//! function of the seed on every platform.

use rand::SeedableRng;

pub type SeededRng = rand_chacha::ChaCha8Rng;

/// Builds the crate's deterministic RNG from a 64-bit seed.
pub fn seeded(seed: u64) -> SeededRng {
    SeededRng::seed_from_u64(seed)
}

/// Derives an independent child seed, e.g. one stream per sensor kind.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
