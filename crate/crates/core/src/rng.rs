//! Keyed deterministic randomness: every draw is a pure function of its key.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[inline]
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn mix(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x243f_6a88_85a3_08d3, |h, &p| splitmix64(h ^ splitmix64(p)))
}

pub fn keyed_rng(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(parts))
}

/// Domain tags so different consumers of one seed never share a stream.
pub mod tag {
    pub const SAMPLE: u64 = 1;
    pub const ROUND: u64 = 2;
    pub const FAMILY: u64 = 3;
    pub const GENERATE: u64 = 4;
    pub const CARVE: u64 = 5;
}
