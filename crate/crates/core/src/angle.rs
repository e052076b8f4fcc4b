//! Angle wrapping helpers.

use std::f64::consts::{PI, TAU};

/// Map an angle to `[0, 2π)`.
pub fn wrap_to_tau(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Map an angle to `[-π, π]`.
pub fn wrap_to_pi(theta: f64) -> f64 {
    let r = wrap_to_tau(theta + PI) - PI;
    r.clamp(-PI, PI)
}

/// Reverse-direction angle, `-θ mod 2π`.
pub fn negate(theta: f64) -> f64 {
    wrap_to_tau(-theta)
}

/// Signed difference `a - b` wrapped to `[-180°, 180°]`, in degrees.
pub fn wrapped_error_degrees(a: f64, b: f64) -> f64 {
    wrap_to_pi(a - b).to_degrees().clamp(-180.0, 180.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tiny_negative_stays_in_range() {
        let w = wrap_to_tau(-1e-300);
        assert!((0.0..TAU).contains(&w));
        assert_eq!(negate(0.0), 0.0);
    }

    proptest! {
        #[test]
        fn wrap_is_periodic(theta in -10.0f64..10.0, m in -50i32..50) {
            let shifted = theta + TAU * m as f64;
            let a = wrap_to_pi(theta);
            let b = wrap_to_pi(shifted);
            // |θ + 2πm| is at most ~330 so rounding stays below 1e-12
            let d = (a - b).abs();
            prop_assert!(d < 1e-12 || (TAU - d).abs() < 1e-12);
            prop_assert!((-PI..=PI).contains(&a));
            let t = wrap_to_tau(shifted);
            prop_assert!((0.0..TAU).contains(&t));
        }
    }
}
