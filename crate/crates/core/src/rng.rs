//! Seeded random streams.
//!
//! Every stochastic stage draws from its own ChaCha stream whose seed is a
//! hash of the master seed and a tuple of identifiers, so that datasets can
//! be generated in any order (or in parallel) and still be bit-identical.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Stage tags mixed into per-patch stream seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stage {
    Magnitude = 1,
    Noise = 2,
    Jpeg = 3,
    Augment = 4,
    Candidates = 5,
    Shuffle = 6,
    Init = 7,
    Resample = 8,
    Bootstrap = 9,
    Fixture = 10,
    NoisePixels = 11,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Order-sensitive hash of a list of words.
pub fn mix(words: &[u64]) -> u64 {
    words
        .iter()
        .fold(0x6a09_e667_f3bc_c909, |h, &w| splitmix64(h ^ splitmix64(w)))
}

pub fn stream(words: &[u64]) -> Stream {
    Stream::seed_from_u64(mix(words))
}

/// Stream for one degradation stage of one (patch, class) version.
pub fn patch_stream(seed: u64, patch_id: u64, class: u8, stage: Stage) -> Stream {
    stream(&[seed, patch_id, class as u64, stage as u64])
}

/// Uniform real in `[lo, hi]`. Degenerate intervals return `lo` without
/// consuming randomness.
pub fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return lo;
    }
    lo + (hi - lo) * rng.random::<f64>()
}

/// Standard normal draw (Box-Muller).
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1 = 1.0 - rng.random::<f64>();
    let u2 = rng.random::<f64>();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
}
