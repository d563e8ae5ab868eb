//! Special functions and fading-distribution primitives.
//!
//! Everything downstream (water-filling capacity, closed-form policy
//! objectives, simulator sampling) is built on the exponential integral
//! E1(x) = ∫_x^∞ e^(-t)/t dt and the unit-mean exponential power-gain
//! distribution of Rayleigh fading.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};

/// Fading model for the power gain |h|^2 of each user.
///
/// Gains are i.i.d. across users and slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FadingModel {
    /// Unit-mean exponential power gain (Rayleigh amplitude).
    #[default]
    UnitRayleigh,
}

impl FadingModel {
    /// Cdf of the power gain: 1 - e^(-x) for x >= 0, zero below.
    pub fn cdf(self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            -(-x).exp_m1()
        }
    }
}

/// Exponential integral E1(x) = ∫_x^∞ e^(-t)/t dt for x > 0.
///
/// Series expansion for x <= 1, modified-Lentz continued fraction for
/// x > 1; both converge well past 1e-12 relative accuracy on (0, 700].
pub fn exp_integral(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!(
            "exp_integral requires x > 0 (the integral diverges at 0), got {x}"
        )));
    }
    if x <= 1.0 {
        // E1(x) = -gamma - ln x + sum_{k>=1} (-1)^(k+1) x^k / (k * k!)
        const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..=40 {
            let kf = k as f64;
            term *= -x / kf;
            let contrib = -term / kf;
            sum += contrib;
            if contrib.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        Ok(-EULER_GAMMA - x.ln() + sum)
    } else {
        // E1(x) = e^(-x) * 1/(x+1- 1/(x+3- 4/(x+5- 9/(x+7- ...))))
        // evaluated by the modified Lentz algorithm.
        const TINY: f64 = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..200 {
            let a = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (a * d + b);
            c = b + a / c;
            let delta = c * d;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        Ok((-x).exp() * h)
    }
}

/// Cdf of max(|h_1|^2, ..., |h_K|^2): (1 - e^(-x))^K for x >= 0, else 0.
pub fn max_fading_cdf(k_users: usize, x: f64) -> f64 {
    assert!(k_users >= 1, "max_fading_cdf requires K >= 1");
    if x <= 0.0 {
        return 0.0;
    }
    // (1-e^-x)^K via exp(K ln(1-e^-x)) to stay accurate for large x.
    (k_users as f64 * (-(-x).exp()).ln_1p()).exp()
}

/// Survival function of the max gain, 1 - (1-e^(-x))^K, computed stably.
pub fn max_fading_sf(k_users: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    -(k_users as f64 * (-(-x).exp()).ln_1p()).exp_m1()
}

/// Inverse cdf of the max gain: x with (1-e^(-x))^K = u.
pub fn max_fading_quantile(k_users: usize, u: f64) -> f64 {
    assert!((0.0..1.0).contains(&u));
    -(-u.powf(1.0 / k_users as f64)).ln_1p()
}

/// Deterministic RNG used throughout the simulator.
pub type SimRng = ChaCha12Rng;

/// Build the RNG for a given seed.
pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Derive an independent stream seed from a base seed and a tag sequence
/// (splitmix64 chain). Used to give every (sweep point, policy) pair its
/// own stream.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut z = base;
    for &t in tags {
        z = splitmix64(z ^ splitmix64(t));
    }
    splitmix64(z)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Draw one unit-exponential power gain.
#[inline]
pub fn sample_gain(rng: &mut SimRng) -> f64 {
    // Inverse transform; gen() is in [0,1) so 1-u is in (0,1].
    let u: f64 = rng.gen();
    -(-u).ln_1p()
}

/// Draw K independent power gains for one slot.
pub fn sample_fading(model: FadingModel, k_users: usize, rng: &mut SimRng) -> Vec<f64> {
    let FadingModel::UnitRayleigh = model;
    (0..k_users).map(|_| sample_gain(rng)).collect()
}

/// Binomial coefficient C(n, k) as f64 (n small in this crate).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}
