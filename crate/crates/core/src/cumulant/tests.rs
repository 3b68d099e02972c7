use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::hierarchy::{raw_derivatives, Coefficients, ThirdOrder};
use super::*;
use crate::model::{SystemParams, ThermalBath};
use crate::oscillator::{steady_amplitude, OscillatorSet};
use crate::thermal::n_bar;
use crate::units::mhz;

fn small_params() -> SystemParams {
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

fn random_density(dim: usize, support: impl Fn(usize) -> bool, rng: &mut ChaCha8Rng) -> DMatrix<C64> {
    let b = DMatrix::from_fn(dim, dim, |i, _| {
        if support(i) {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let rho = &b * b.adjoint();
    let tr = rho.trace();
    rho / tr
}

/// Swaps the two spins of a (cavity ⊗ spin ⊗ spin) basis index.
fn swap_index(k: usize) -> usize {
    let (c, s) = (k / 4, k % 4);
    let (s0, s1) = (s / 2, s % 2);
    c * 4 + s1 * 2 + s0
}

fn close(a: C64, b: C64, scale: f64, tol: f64) -> bool {
    (a - b).norm() <= tol * scale
}

fn assert_states_close(got: &MomentState, want: &MomentState, scale: f64, tol: f64) {
    let pairs = [
        ("a", got.a, want.a),
        ("s", got.s, want.s),
        ("z", got.z.into(), want.z.into()),
        ("n", got.n.into(), want.n.into()),
        ("aa", got.aa, want.aa),
        ("a_sp", got.a_sp, want.a_sp),
        ("a_sm", got.a_sm, want.a_sm),
        ("a_z", got.a_z, want.a_z),
        ("sp_sm", got.sp_sm.into(), want.sp_sm.into()),
        ("sm_sm", got.sm_sm, want.sm_sm),
        ("z_sm", got.z_sm, want.z_sm),
        ("z_z", got.z_z.into(), want.z_z.into()),
    ];
    for (name, g, w) in pairs {
        assert!(close(g, w, scale, tol), "{name}: got {g}, want {w}");
    }
}

#[test]
fn bare_spin_decay() {
    let p = SystemParams { g: 0.0, eta: 0.0, ..small_params() };
    let mut m = MomentState::thermal(0.0, 0.0);
    m.z = 0.0;
    let d = moment_derivatives(&m, &p, p.omega_c, ThermalBath::zero(), p.omega_c);
    assert!((d.z + p.gamma_hom).abs() < 1e-9 * p.gamma_hom);
}

#[test]
fn open_equations_match_master_equation() {
    // Exact third-order moments fed into the second-order equations must
    // reproduce d<O>/dt = Tr(O L rho) for arbitrary correlated states.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let p = small_params();
    for trial in 0..10 {
        let bath = ThermalBath::new([0.0, 0.05, 0.2][trial % 3]).unwrap();
        let omega_s = p.omega_c + mhz(0.7);
        let omega_p = p.omega_c - mhz(0.4 * trial as f64);
        let l = Liouvillian::new(2, 6, &p, omega_s, bath, omega_p).unwrap();
        let raw = random_density(l.dim(), |k| k / 4 <= 3, &mut rng);
        let rho = DMatrix::from_fn(l.dim(), l.dim(), |i, j| {
            0.5 * (raw[(i, j)] + raw[(swap_index(i), swap_index(j))])
        });
        let m = l.moments(&rho);
        let exact = l.moments(&l.apply(&rho));
        let c = Coefficients::new(&p, omega_s, bath, omega_p);
        let got = raw_derivatives(&m, &l.third_order(&rho), &c);
        assert_states_close(&got, &exact, p.kappa, 1e-9);
    }
}

#[test]
fn closure_exact_for_product_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let p = small_params();
    let l = Liouvillian::new(2, 6, &p, p.omega_c, ThermalBath::zero(), p.omega_c).unwrap();
    for _ in 0..5 {
        let cav = random_density(7, |k| k <= 3, &mut rng);
        let spin = random_density(2, |_| true, &mut rng);
        let rho = cav.kronecker(&spin).kronecker(&spin);
        let m = l.moments(&rho);
        let exact = l.third_order(&rho);
        let approx = ThirdOrder::closure(&m);
        let pairs = [
            (C64::from(exact.ad_a_z), C64::from(approx.ad_a_z)),
            (exact.aa_z, approx.aa_z),
            (exact.aa_sp, approx.aa_sp),
            (exact.ad_a_sm, approx.ad_a_sm),
            (exact.a_sp_z, approx.a_sp_z),
            (exact.a_z_sm, approx.a_z_sm),
            (exact.a_sp_sm, approx.a_sp_sm),
            (exact.ad_sm_sm, approx.ad_sm_sm),
            (exact.a_z_z, approx.a_z_z),
        ];
        for (k, (e, a)) in pairs.iter().enumerate() {
            assert!((e - a).norm() < 1e-12, "moment {k}: {e} vs {a}");
        }
    }
}

#[test]
fn thermal_state_is_stationary_without_drive() {
    let p = SystemParams { eta: 0.0, n_spins: 1e12, g: mhz(9.51) / 1e6, ..small_params() };
    let bath = ThermalBath::new(0.3).unwrap();
    let m = MomentState::thermal(n_bar(bath, p.omega_c), n_bar(bath, p.omega_c));
    let d = moment_derivatives(&m, &p, p.omega_c, bath, p.omega_c + mhz(1.0));
    let x = d.to_scaled(p.n_spins);
    assert!(x.iter().all(|v| v.abs() < 1e-6), "{x:?}");
}

#[test]
fn vacuum_steady_state() {
    let p = SystemParams { eta: 0.0, n_spins: 1e12, g: mhz(9.51) / 1e6, ..small_params() };
    let init = MomentState { z: -0.5, z_z: 0.25, ..MomentState::thermal(0.3, 0.0) };
    let s = integrate_to_steady(&HierarchyConfig::default(), &p, p.omega_c, ThermalBath::zero(), p.omega_c, &init)
        .unwrap();
    assert!((s.state.z + 1.0).abs() < 1e-8);
    assert!(s.state.n.abs() < 1e-8 && s.state.a.norm() < 1e-8);
}

#[test]
fn pinned_hierarchy_is_the_oscillator_model() {
    let p = SystemParams { n_spins: 1e12, g: mhz(9.51) / 1e6, gamma_hom: mhz(0.2), ..small_params() };
    let cfg = HierarchyConfig { pinned: true, ..Default::default() };
    let set = OscillatorSet::resonant(&p, p.gamma_hom + 2.0 * p.gamma_p);
    for k in 0..12 {
        let wp = p.omega_c + mhz(-22.0 + 4.0 * k as f64);
        let s = integrate_to_steady(&cfg, &p, p.omega_c, ThermalBath::zero(), wp, &MomentState::thermal(0.0, 0.0))
            .unwrap();
        let want = steady_amplitude(&set, &p, wp);
        assert!((s.state.a - want).norm() < 1e-8 * want.norm(), "{wp}: {} vs {want}", s.state.a);
    }
}

#[test]
fn oracle_vacuum_and_trace() {
    let p = SystemParams { eta: 0.0, ..small_params() };
    let l = Liouvillian::new(2, 3, &p, p.omega_c, ThermalBath::zero(), p.omega_c).unwrap();
    let rho = l.steady_state().unwrap();
    assert!((rho[(0, 0)].re - 1.0).abs() < 1e-10);
    let sup = l.superoperator();
    let d = l.dim();
    for col in 0..d * d {
        let tr: C64 = (0..d).map(|k| sup[(k * d + k, col)]).sum();
        assert!(tr.norm() < 1e-6 * p.kappa);
    }
    // a few explicit Euler steps from a random state keep the trace
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = small_params();
    let l = Liouvillian::new(2, 3, &p, p.omega_c, ThermalBath::new(0.1).unwrap(), p.omega_c).unwrap();
    let mut rho = random_density(l.dim(), |_| true, &mut rng);
    let dt = 1e-3 / p.kappa;
    for _ in 0..50 {
        rho += l.apply(&rho) * C64::from(dt);
    }
    assert!((rho.trace() - 1.0).norm() < 1e-10);
}

#[test]
fn oracle_single_spin_detailed_balance() {
    let p = SystemParams { g: 0.0, eta: 0.0, n_spins: 1.0, ..small_params() };
    let bath = ThermalBath::new(0.08).unwrap();
    let out = exact_oracle(1, 4, &p, p.omega_c, bath, p.omega_c).unwrap();
    let nb = n_bar(bath, p.omega_c);
    assert!((out.moments.z + 1.0 / (1.0 + 2.0 * nb)).abs() < 1e-10);
}

#[test]
fn hierarchy_matches_oracle_two_spins() {
    let p = SystemParams { eta: mhz(1.0) / 100.0, ..small_params() };
    // At 100 mK and 2.7 GHz the cavity holds ~0.38 thermal photons, so the
    // oracle needs a larger Fock space than at T = 0.
    for (t, wp, cutoff) in [(0.0, p.omega_c, 5), (0.0, p.omega_c + mhz(0.5), 5), (0.1, p.omega_c - mhz(0.3), 14)] {
        let bath = ThermalBath::new(t).unwrap();
        let exact = exact_oracle(2, cutoff, &p, p.omega_c, bath, wp).unwrap();
        assert!(exact.cutoff_adequate);
        let init = MomentState::thermal(n_bar(bath, p.omega_c), n_bar(bath, p.omega_c));
        let s = integrate_to_steady(&HierarchyConfig::default(), &p, p.omega_c, bath, wp, &init).unwrap();
        let (h, e) = (s.state.a.norm_sqr(), exact.moments.a.norm_sqr());
        assert!((h / e - 1.0).abs() < 0.01, "T={t}: hierarchy {h:e} oracle {e:e}");
    }
    let bath = ThermalBath::new(0.1).unwrap();
    assert!(!exact_oracle(2, 5, &p, p.omega_c, bath, p.omega_c).unwrap().cutoff_adequate);
}

#[test]
fn rabi_tracks_tanh_law() {
    let p = SystemParams {
        omega_c: mhz(2700.0),
        kappa: mhz(0.4),
        gamma_hom: mhz(1e-3),
        gamma_p: mhz(0.4),
        g: 0.0,
        n_spins: 1e12,
        eta: mhz(0.004),
    }
    .with_collective_coupling(mhz(9.51));
    let probe: Vec<f64> = (0..121).map(|k| p.omega_c + mhz(-24.0 + 0.4 * k as f64)).collect();
    let temps = [0.1, 0.4, 1.0];
    let pts = rabi_vs_temperature(&HierarchyConfig::default(), &p, &temps, &probe).unwrap();
    for r in &pts {
        let m = r.omega_measured.expect("resolved");
        assert!((m / r.omega_twolevel - 1.0).abs() < 0.02);
    }
}

