//! Seeded randomness helpers.
//!
//! Every stochastic operation in the crate takes an explicit 64-bit seed and
//! derives child seeds through [`split_seed`], so runs are reproducible
//! bit-for-bit regardless of thread count.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Derives an independent child seed from a parent seed and a stream index.
///
/// SplitMix64 finalizer over `seed + stream * golden_gamma`; collisions across
/// small stream indices are astronomically unlikely.
pub fn split_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic generator for a given seed.
pub fn rng_from(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Standard-normal sample via Box-Muller.
pub fn standard_normal(rng: &mut ChaCha12Rng) -> f64 {
    // u1 in (0, 1] so ln(u1) is finite.
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Normal(0, std) truncated to ±2 standard deviations, by rejection.
pub fn truncated_normal(rng: &mut ChaCha12Rng, std: f64) -> f64 {
    loop {
        let z = standard_normal(rng);
        if z.abs() <= 2.0 {
            return z * std;
        }
    }
}
