//! Deterministic sub-seed derivation for resampling.

/// SplitMix64 output function; a bijection on `u64`.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for stream `side` of repeat `repeat` under a master `seed`.
///
/// `splitmix64(splitmix64(splitmix64(seed) ^ repeat) ^ side)`: for a fixed
/// seed and side this is injective in `repeat`, since each step is a
/// bijection.
pub fn sub_seed(seed: u64, repeat: u64, side: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ repeat) ^ side)
}
