//! Seeded randomness and the Laplace / Gaussian mechanisms.
//!
//! An epsilon of `f64::INFINITY` is the privacy-disabled sentinel: every
//! mechanism then releases its input unchanged.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes a master seed with a stream id (splitmix64 finaliser) so that
/// independent stages never share a random stream.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn privacy_disabled(epsilon: f64) -> bool {
    epsilon == f64::INFINITY
}

/// Accepts `ε > 0` (including the `∞` sentinel).
pub fn validate_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && !epsilon.is_nan() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "epsilon must be positive, got {epsilon}"
        )))
    }
}

/// One draw from `Lap(scale)`. A zero scale returns exactly 0 without
/// consuming randomness.
pub fn laplace(rng: &mut Rng, scale: f64) -> f64 {
    if scale == 0.0 {
        return 0.0;
    }
    let a: f64 = Exp1.sample(rng);
    let b: f64 = Exp1.sample(rng);
    scale * (a - b)
}

/// One draw from `N(0, variance)`.
pub fn gaussian(rng: &mut Rng, variance: f64) -> f64 {
    if variance == 0.0 {
        return 0.0;
    }
    let z: f64 = StandardNormal.sample(rng);
    z * variance.sqrt()
}
