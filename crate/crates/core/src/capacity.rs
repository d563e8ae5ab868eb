//! Ergodic water-filling capacity of the symmetric K-user Rayleigh MAC.
//!
//! The sum capacity with perfect transmitter CSI and unbounded coding
//! horizon, parameterized by the water level x:
//!
//!   C(x)   = sum_{k=1..K} (-1)^(k-1) C(K,k) E1(k x)           nats/use
//!   P(x)   = sum_{k=1..K} (-1)^(k-1) C(K,k) (e^(-kx) - kx E1(kx))
//!
//! `P(x)` above is the literal printed form (`PowerConvention::Paper`).
//! Dividing it by x gives E[(1/x - 1/G)^+] with G the max of K unit
//! exponentials, which is the water-filling transmit power and the only
//! form that satisfies the K=1 identity P = e^(-x)/x - E1(x); that is
//! `PowerConvention::Standard`, the default everywhere in this crate.
//! All powers are totals over the K users.

use crate::error::{Error, Result};
use crate::special::{binomial, exp_integral};

/// Which power-versus-water-level mapping to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PowerConvention {
    /// E[(1/x - 1/G)^+]; satisfies the water-filling oracle.
    #[default]
    Standard,
    /// The printed sum without the 1/x factor; kept for literal
    /// reproduction. Its range is (0, 1), so most powers are unreachable.
    Paper,
}

impl PowerConvention {
    pub fn name(self) -> &'static str {
        match self {
            PowerConvention::Standard => "standard",
            PowerConvention::Paper => "paper",
        }
    }
}

/// Solved water-filling point.
#[derive(Debug, Clone, Copy)]
pub struct WaterFillingSolution {
    /// Water-level parameter x.
    pub water_level: f64,
    /// Sum capacity in nats per channel use.
    pub capacity: f64,
    /// Total average transmit power at this water level.
    pub average_power: f64,
    /// Number of users.
    pub users: usize,
}

/// Capacity expression C(x) at water level x.
pub fn ewfc_capacity_at_level(k_users: usize, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("water level must be positive, got {x}")));
    }
    let mut sum = 0.0;
    for k in 1..=k_users {
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        sum += sign * binomial(k_users, k) * exp_integral(k as f64 * x)?;
    }
    Ok(sum)
}

/// Total average power spent at water level x under the given convention.
pub fn ewfc_power_of_level(k_users: usize, x: f64, convention: PowerConvention) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("water level must be positive, got {x}")));
    }
    let mut sum = 0.0;
    for k in 1..=k_users {
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        let kx = k as f64 * x;
        sum += sign * binomial(k_users, k) * ((-kx).exp() - kx * exp_integral(kx)?);
    }
    Ok(match convention {
        PowerConvention::Paper => sum,
        PowerConvention::Standard => sum / x,
    })
}

const BRACKET_LO: f64 = 1e-8;
const BRACKET_HI: f64 = 50.0;
const REL_TOL: f64 = 1e-9;

/// Invert the power map: find x with P(x) = `avg_power`, then evaluate the
/// capacity there. `avg_power` is the total over the K users.
pub fn ewfc_capacity(
    k_users: usize,
    avg_power: f64,
    convention: PowerConvention,
) -> Result<WaterFillingSolution> {
    if k_users == 0 {
        return Err(Error::Argument("user count must be >= 1".into()));
    }
    if !(avg_power > 0.0) {
        return Err(Error::Argument(format!(
            "average power must be positive, got {avg_power}"
        )));
    }
    // P is strictly decreasing in x; expand the bracket geometrically if
    // the target lies outside its image.
    let mut lo = BRACKET_LO;
    let mut hi = BRACKET_HI;
    let mut p_lo = ewfc_power_of_level(k_users, lo, convention)?;
    let mut p_hi = ewfc_power_of_level(k_users, hi, convention)?;
    let mut expansions = 0;
    while p_lo < avg_power && expansions < 20 {
        lo /= 16.0;
        p_lo = ewfc_power_of_level(k_users, lo, convention)?;
        expansions += 1;
    }
    while p_hi > avg_power && expansions < 40 {
        hi *= 2.0;
        p_hi = ewfc_power_of_level(k_users, hi, convention)?;
        expansions += 1;
    }
    if p_lo < avg_power || p_hi > avg_power {
        return Err(Error::PowerRange {
            requested: avg_power,
            min: p_hi,
            max: p_lo,
            convention: convention.name(),
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ewfc_power_of_level(k_users, mid, convention)? > avg_power {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) < 1e-15 * hi {
            break;
        }
    }
    let x = 0.5 * (lo + hi);
    let achieved = ewfc_power_of_level(k_users, x, convention)?;
    debug_assert!(
        ((achieved - avg_power) / avg_power).abs() <= REL_TOL,
        "bisection residual too large: {achieved} vs {avg_power}"
    );
    Ok(WaterFillingSolution {
        water_level: x,
        capacity: ewfc_capacity_at_level(k_users, x)?,
        average_power: achieved,
        users: k_users,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_user_capacity_is_exp_integral() {
        for x in [0.1, 0.5, 1.0, 3.0] {
            let c = ewfc_capacity_at_level(1, x).unwrap();
            assert!((c - exp_integral(x).unwrap()).abs() < 1e-15);
        }
    }

    #[test]
    fn single_user_power_identity() {
        // Standard convention at K=1: P = e^(-x)/x - E1(x).
        for x in [0.2, 1.0, 2.0] {
            let p = ewfc_power_of_level(1, x, PowerConvention::Standard).unwrap();
            let want = (-x).exp() / x - exp_integral(x).unwrap();
            assert!(((p - want) / want).abs() < 1e-14);
        }
    }

    #[test]
    fn conventions_coincide_at_unit_level() {
        let a = ewfc_power_of_level(1, 1.0, PowerConvention::Standard).unwrap();
        let b = ewfc_power_of_level(1, 1.0, PowerConvention::Paper).unwrap();
        assert!((a - b).abs() < 1e-15);
        assert!((a - 0.14849550677592205).abs() < 1e-12);
    }

    #[test]
    fn power_and_capacity_decrease_in_level() {
        for k in 1..=3 {
            let xs: Vec<f64> = (0..40).map(|i| 0.02 * (1.25f64).powi(i)).collect();
            for w in xs.windows(2) {
                let p0 = ewfc_power_of_level(k, w[0], PowerConvention::Standard).unwrap();
                let p1 = ewfc_power_of_level(k, w[1], PowerConvention::Standard).unwrap();
                assert!(p0 > p1, "power not decreasing at K={k}, x={}", w[0]);
                let c0 = ewfc_capacity_at_level(k, w[0]).unwrap();
                let c1 = ewfc_capacity_at_level(k, w[1]).unwrap();
                assert!(c0 > c1, "capacity not decreasing at K={k}");
            }
        }
    }

    #[test]
    fn solve_reference_points() {
        // (K, total power, expected x, expected capacity)
        let cases = [
            (1, 0.148495506775921712, 1.0, 0.2193839343955203),
            (2, 2.0, 0.3214768692367793, 1.2927608701452094),
            (2, 0.2, 1.1153267919609073, 0.32715869877621878),
            (2, 20.0, 0.04685922897804219, 3.1776031034526167),
            (2, 200.0, 0.004965703352741248, 5.421144133371314),
            (3, 6.0, 0.14590397247480304, 2.3293009687559693),
        ];
        for (k, p, x_want, c_want) in cases {
            let sol = ewfc_capacity(k, p, PowerConvention::Standard).unwrap();
            assert!(
                ((sol.water_level - x_want) / x_want).abs() < 1e-8,
                "K={k} P={p}: x={} want {x_want}",
                sol.water_level
            );
            assert!(((sol.capacity - c_want) / c_want).abs() < 1e-9);
            assert!(((sol.average_power - p) / p).abs() <= 1e-9);
        }
    }

    #[test]
    fn capacity_vanishes_with_power() {
        let sol = ewfc_capacity(2, 1e-9, PowerConvention::Standard).unwrap();
        assert!(sol.capacity < 1e-6);
    }

    #[test]
    fn multiuser_diversity() {
        for p in [0.05, 0.5, 2.0, 30.0] {
            let c1 = ewfc_capacity(1, p, PowerConvention::Standard).unwrap().capacity;
            let c2 = ewfc_capacity(2, p, PowerConvention::Standard).unwrap().capacity;
            assert!(c2 > c1, "no diversity gain at P={p}");
        }
    }

    #[test]
    fn paper_convention_range_error() {
        // The printed form never exceeds 1, so a total power of 2 is out of
        // range and must be reported as such.
        let err = ewfc_capacity(2, 2.0, PowerConvention::Paper).unwrap_err();
        match err {
            Error::PowerRange { requested, max, convention, .. } => {
                assert_eq!(requested, 2.0);
                assert!(max <= 1.0 + 1e-9);
                assert_eq!(convention, "paper");
            }
            other => panic!("expected PowerRange, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(ewfc_capacity(0, 1.0, PowerConvention::Standard).is_err());
        assert!(ewfc_capacity(2, 0.0, PowerConvention::Standard).is_err());
        assert!(ewfc_power_of_level(2, -1.0, PowerConvention::Standard).is_err());
    }
}
