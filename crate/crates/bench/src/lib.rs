//! Shared parameter sets for the benches.

use nvcavity_core::units::{hz, mhz};
use nvcavity_core::SystemParams;

/// Cavity at 2880 MHz, kappa 0.4 MHz, collective coupling 9.51 MHz.
pub fn resolvent_params() -> SystemParams {
    SystemParams {
        omega_c: mhz(2880.0),
        kappa: mhz(0.4),
        gamma_hom: hz(1.0),
        gamma_p: 0.0,
        g: 0.0,
        n_spins: 1e12,
        eta: 1.0,
    }
    .with_collective_coupling(mhz(9.51))
}

/// Two spins with a few-photon cavity, small enough for the exact oracle.
pub fn two_spin_params() -> SystemParams {
    SystemParams {
        omega_c: mhz(2700.0),
        kappa: mhz(1.0),
        gamma_hom: mhz(0.8),
        gamma_p: mhz(0.3),
        g: mhz(0.6),
        n_spins: 2.0,
        eta: mhz(0.01),
    }
}

pub fn offsets(center: f64, half_mhz: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| center + mhz(-half_mhz + 2.0 * half_mhz * k as f64 / (n - 1) as f64)).collect()
}
