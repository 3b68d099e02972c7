//! Physical constants (CODATA 2018) and frequency conversions.

use std::f64::consts::PI;

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Planck constant, J s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Bohr magneton, J/T.
pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;

/// Fixed unit policy: computation in rad/s, I/O in MHz.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FrequencyConvention;

impl FrequencyConvention {
    pub fn to_angular_mhz(self, f_mhz: f64) -> f64 {
        mhz(f_mhz)
    }

    pub fn from_angular_mhz(self, omega: f64) -> f64 {
        to_mhz(omega)
    }
}

/// Ordinary frequency in MHz to angular frequency in rad/s.
#[inline]
pub fn mhz(f_mhz: f64) -> f64 {
    2.0 * PI * 1e6 * f_mhz
}

/// Ordinary frequency in Hz to angular frequency in rad/s.
#[inline]
pub fn hz(f_hz: f64) -> f64 {
    2.0 * PI * f_hz
}

/// Angular frequency (rad/s) to MHz.
#[inline]
pub fn to_mhz(omega: f64) -> f64 {
    omega / (2.0 * PI * 1e6)
}

/// Angular frequency (rad/s) to Hz.
#[inline]
pub fn to_hz(omega: f64) -> f64 {
    omega / (2.0 * PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let f = 2880.0;
        assert!((to_mhz(mhz(f)) - f).abs() < 1e-9);
        assert!((to_hz(hz(1.0)) - 1.0).abs() < 1e-15);
        assert_eq!(FrequencyConvention.to_angular_mhz(1.0), mhz(1.0));
    }

    #[test]
    fn planck_relation() {
        assert!((PLANCK / (2.0 * PI) - HBAR).abs() / HBAR < 1e-9);
    }
}
