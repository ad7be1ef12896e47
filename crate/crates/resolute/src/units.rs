//! Boundary unit conversions.
//!
//! Internally every time is in seconds and every frequency is angular
//! (rad/s). Files and the command line use microseconds, kHz/MHz in cycles,
//! and Gauss.

use std::f64::consts::PI;

pub const US: f64 = 1e-6;
pub const KHZ: f64 = 1e3;
pub const MHZ: f64 = 1e6;

pub fn us_to_s(us: f64) -> f64 {
    us * US
}

pub fn s_to_us(s: f64) -> f64 {
    s / US
}

/// Cycles per second to rad/s.
pub fn hz_to_rad(hz: f64) -> f64 {
    2.0 * PI * hz
}

/// rad/s to cycles per second.
pub fn rad_to_hz(w: f64) -> f64 {
    w / (2.0 * PI)
}

pub fn khz_to_rad(khz: f64) -> f64 {
    hz_to_rad(khz * KHZ)
}

pub fn rad_to_khz(w: f64) -> f64 {
    rad_to_hz(w) / KHZ
}

pub fn mhz_to_rad(mhz: f64) -> f64 {
    hz_to_rad(mhz * MHZ)
}

pub fn rad_to_mhz(w: f64) -> f64 {
    rad_to_hz(w) / MHZ
}

/// Phase rate in rad/µs to rad/s.
pub fn rad_per_us_to_rad_s(x: f64) -> f64 {
    x / US
}

pub fn rad_s_to_rad_per_us(x: f64) -> f64 {
    x * US
}

/// Inverse-variance scale in µs² to s².
pub fn us2_to_s2(x: f64) -> f64 {
    x * US * US
}

pub fn s2_to_us2(x: f64) -> f64 {
    x / (US * US)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    }

    proptest! {
        #[test]
        fn time_round_trip(x in 1e-6_f64..1e7) {
            prop_assert!(close(s_to_us(us_to_s(x)), x));
        }

        #[test]
        fn khz_round_trip(x in 1e-6_f64..1e7) {
            prop_assert!(close(rad_to_khz(khz_to_rad(x)), x));
            prop_assert!(close(rad_to_mhz(mhz_to_rad(x)), x));
        }

        #[test]
        fn variance_scale_round_trip(x in 1e-6_f64..1e7) {
            prop_assert!(close(s2_to_us2(us2_to_s2(x)), x));
            prop_assert!(close(rad_s_to_rad_per_us(rad_per_us_to_rad_s(x)), x));
        }
    }

    #[test]
    fn khz_conversion_uses_two_pi() {
        assert!((khz_to_rad(1.0) - 2.0 * PI * 1e3).abs() < 1e-9);
    }
}
