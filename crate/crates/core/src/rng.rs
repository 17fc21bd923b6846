//! Seed derivation and complex Gaussian sampling.
//!
//! Every random stream in the simulator is a `ChaCha8Rng` seeded from a
//! 64-bit value derived by mixing a parent seed with a tag. Streams never
//! share state, so the order in which trials run cannot change any draw.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Stream tags used when splitting a trial seed.
pub mod stream {
    pub const SCENARIO: u64 = 0x5343_454e;
    pub const CHANNEL: u64 = 0x4348_414e;
    pub const PILOTS: u64 = 0x5049_4c4f;
    pub const COMBINERS: u64 = 0x434f_4d42;
    pub const NOISE: u64 = 0x4e4f_4953;
    pub const DELAYS: u64 = 0x444c_4159;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hash of an ordered list of integers.
pub fn hash_tags(tags: &[u64]) -> u64 {
    tags.iter()
        .fold(0x6a09_e667_f3bc_c908, |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

/// Child seed for a named sub-stream of `seed`.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    seed ^ hash_tags(&[tag])
}

/// Trial seed: `base ^ hash(point, trial)`.
pub fn trial_seed(base: u64, point: u64, trial: u64) -> u64 {
    base ^ hash_tags(&[point, trial])
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One draw from CN(0, variance).
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

/// Uniform phase on [0, 2π).
pub fn uniform_phase<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.gen_range(0.0..std::f64::consts::TAU)
}
