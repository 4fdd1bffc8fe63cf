//! Seeded random streams.
//!
//! Every random draw in the pipeline comes from a ChaCha12 stream derived
//! from `(master seed, node id, purpose)`, so runs are reproducible and the
//! streams of distinct nodes (and distinct pipeline stages of one node) never
//! overlap. Gaussian draws use Box-Muller on top of `libm`, keeping results
//! bit-identical across platforms.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Pipeline stages with independent random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    /// Translation-matrix coefficients (central entity).
    Translation,
    /// Randomized-expansion noise (per node).
    Expansion,
    /// Tuple shuffling (per node).
    Shuffle,
    /// Model initialization and batch ordering.
    Training,
    /// Known-row sampling in attack evaluation.
    Sampling,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Translation => 1,
            Purpose::Expansion => 2,
            Purpose::Shuffle => 3,
            Purpose::Training => 4,
            Purpose::Sampling => 5,
        }
    }
}

// SplitMix64 finalizer; decorrelates nearby (seed, node, purpose) triples.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the stream for `(seed, node, purpose)`.
pub fn stream(seed: u64, node: u32, purpose: Purpose) -> ChaCha12Rng {
    let mixed = mix(mix(seed) ^ mix((node as u64) << 8 | purpose.tag()));
    ChaCha12Rng::seed_from_u64(mixed)
}

/// Extra salt for streams that need a per-round or per-epoch component.
pub fn salted_stream(seed: u64, node: u32, purpose: Purpose, salt: u64) -> ChaCha12Rng {
    let mixed = mix(mix(seed) ^ mix((node as u64) << 8 | purpose.tag()) ^ mix(salt));
    ChaCha12Rng::seed_from_u64(mixed)
}

/// Uniform draw from the open interval `(0, 1)`.
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        // 53 random mantissa bits give a uniform draw in [0, 1).
        let v = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        if v > 0.0 {
            return v;
        }
    }
}

/// One draw from `Normal(0, sigma)` via Box-Muller.
pub fn normal<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    let u1 = open_unit(rng);
    let u2 = open_unit(rng);
    sigma * libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
}

/// In-place Fisher-Yates shuffle of `indices`-addressable items.
pub fn shuffle<R: Rng + ?Sized, T>(rng: &mut R, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}
