//! Thermal occupation and the temperature scaling of the collective coupling.

use crate::model::{SystemParams, ThermalBath};
use crate::units::{BOLTZMANN, HBAR};

/// hbar omega / (k_B T); infinite at T = 0.
fn reduced_energy(bath: ThermalBath, omega: f64) -> f64 {
    if bath.temperature == 0.0 {
        f64::INFINITY
    } else {
        HBAR * omega / (BOLTZMANN * bath.temperature)
    }
}

/// Bose-Einstein occupation 1/(exp(hbar omega / k_B T) - 1). Exactly zero at T = 0.
pub fn n_bar(bath: ThermalBath, omega: f64) -> f64 {
    if bath.temperature == 0.0 {
        return 0.0;
    }
    1.0 / reduced_energy(bath, omega).exp_m1()
}

/// Steady inversion tanh(hbar omega / 2 k_B T) * sz_zero.
pub fn sz_steady(bath: ThermalBath, omega: f64, sz_zero: f64) -> f64 {
    if bath.temperature == 0.0 {
        return sz_zero;
    }
    (0.5 * reduced_energy(bath, omega)).tanh() * sz_zero
}

/// Two-level law g sqrt(N tanh(hbar omega / 2 k_B T)), with omega the
/// ensemble center frequency.
pub fn coupling_vs_t_twolevel(params: &SystemParams, bath: ThermalBath, omega_spin: f64) -> f64 {
    let polarization = -sz_steady(bath, omega_spin, -1.0);
    params.g * (params.n_spins * polarization).sqrt()
}

/// Law including the thermally populated m_S = +1 level:
/// g sqrt(N / (1 + 3 n_bar)).
pub fn coupling_vs_t_threelevel(params: &SystemParams, bath: ThermalBath, omega_spin: f64) -> f64 {
    params.g * (params.n_spins / (1.0 + 3.0 * n_bar(bath, omega_spin))).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{hz, mhz};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn bath(t: f64) -> ThermalBath {
        ThermalBath::new(t).unwrap()
    }

    fn params() -> SystemParams {
        SystemParams {
            omega_c: hz(2.7e9),
            kappa: mhz(0.4),
            gamma_hom: 0.0,
            gamma_p: 0.0,
            g: mhz(9.51) / 1e6,
            n_spins: 1e12,
            eta: 0.0,
        }
    }

    // Reference values evaluated with 40-digit arithmetic.
    #[test]
    fn occupation_reference_values() {
        let w = hz(2.7e9);
        assert_eq!(n_bar(bath(0.0), w), 0.0);
        assert_relative_eq!(n_bar(bath(0.02), w), 1.537_739_825_534_641e-3, max_relative = 1e-9);
        assert_relative_eq!(n_bar(bath(1.0), w), 7.228_061_622_938_98, max_relative = 1e-9);
    }

    #[test]
    fn inversion_reference_values() {
        let w = hz(2.7e9);
        assert_eq!(sz_steady(bath(0.0), w, -1.0), -1.0);
        assert_relative_eq!(sz_steady(bath(1.0), w, -1.0), -0.064_699_277_049_740_97, max_relative = 1e-9);
    }

    #[test]
    fn coupling_laws() {
        let p = params();
        let w = hz(2.88e9);
        assert_relative_eq!(coupling_vs_t_twolevel(&p, bath(0.0), w), mhz(9.51), max_relative = 1e-12);
        assert_relative_eq!(coupling_vs_t_threelevel(&p, bath(0.0), w), mhz(9.51), max_relative = 1e-12);
        assert_relative_eq!(
            coupling_vs_t_twolevel(&p, bath(1.0), w),
            mhz(2.498_059_725_825_349_7),
            max_relative = 1e-9
        );
        assert_relative_eq!(
            coupling_vs_t_threelevel(&p, bath(1.0), hz(2.7e9)),
            mhz(1.996_728_091_400_052_6),
            max_relative = 1e-9
        );
        // roughly 0.21 g sqrt(N)
        let ratio = coupling_vs_t_threelevel(&p, bath(1.0), hz(2.7e9)) / mhz(9.51);
        assert!((ratio - 0.21).abs() < 0.005);
    }

    #[test]
    fn inversion_identity_on_log_grid() {
        let w = hz(2.7e9);
        for k in 0..=80 {
            let t = 1e-3 * 10f64.powf(4.0 * k as f64 / 80.0);
            let b = bath(t);
            let lhs = sz_steady(b, w, -0.7) * (1.0 + 2.0 * n_bar(b, w));
            assert_relative_eq!(lhs, -0.7, max_relative = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn tanh_identity(t in 1e-3f64..10.0, f in 1e8f64..1e10) {
            let w = hz(f);
            let b = bath(t);
            let lhs = -sz_steady(b, w, -1.0);
            let rhs = 1.0 / (1.0 + 2.0 * n_bar(b, w));
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
        }

        #[test]
        fn occupation_monotone(t in 1e-3f64..5.0, f in 1e8f64..1e10) {
            let w = hz(f);
            prop_assert!(n_bar(bath(t * 1.01), w) > n_bar(bath(t), w));
            prop_assert!(n_bar(bath(t), w * 1.01) < n_bar(bath(t), w));
        }

        #[test]
        fn threelevel_below_twolevel(t in 1e-3f64..5.0) {
            let p = params();
            let w = hz(2.7e9);
            let two = coupling_vs_t_twolevel(&p, bath(t), w);
            let three = coupling_vs_t_threelevel(&p, bath(t), w);
            prop_assert!(three <= two);
            let sz = sz_steady(bath(t), w, -1.0);
            prop_assert!((two * two / p.coupling_weight() - sz.abs()).abs() < 1e-12);
        }
    }
}
