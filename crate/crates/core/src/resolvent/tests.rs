use num_complex::Complex64 as C64;
use proptest::prelude::*;

use super::*;
use crate::model::SystemParams;
use crate::oscillator::{steady_amplitude, OscillatorSet};
use crate::quad::{integrate_real, QuadConfig};
use crate::units::mhz;

fn params(kappa_mhz: f64, gamma_hom_mhz: f64, coupling_mhz: f64) -> SystemParams {
    SystemParams {
        omega_c: mhz(2880.0),
        kappa: mhz(kappa_mhz),
        gamma_hom: mhz(gamma_hom_mhz),
        gamma_p: 0.0,
        g: 0.0,
        n_spins: 1e12,
        eta: 1.0,
    }
    .with_collective_coupling(mhz(coupling_mhz))
}

fn grid(center: f64, half_mhz: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| center + mhz(-half_mhz + 2.0 * half_mhz * k as f64 / (n - 1) as f64)).collect()
}

#[test]
fn normalisation_and_truncation() {
    let w0 = mhz(2880.0);
    for d in [
        CouplingDensity::q_gaussian(1.389, mhz(12.54), w0, 7.0).unwrap(),
        CouplingDensity::q_gaussian(1.0 + 1e-7, mhz(5.0), w0, 7.0).unwrap(),
        CouplingDensity::gaussian(mhz(5.0), w0, 7.0).unwrap(),
    ] {
        let (lo, hi) = d.support();
        let (total, _) = integrate_real(|w| d.eval(w), lo, hi, &[w0], &QuadConfig::default()).unwrap();
        assert!((total / 7.0 - 1.0).abs() < 1e-5, "{:?}: {total}", d.kind);
        let peak = d.eval(w0);
        assert!(d.eval(hi - 1.0) < 1.01 * TRUNCATION * peak);
        assert!(d.eval(hi - 1.0) > 0.9 * TRUNCATION * peak);
    }
}

#[test]
fn lorentzian_shift_at_center_by_quadrature() {
    let (w0, fwhm, weight) = (mhz(2880.0), mhz(8.0), mhz(10.0).powi(2));
    // q = 2 is the Lorentzian; the quadrature path must reproduce -2iW/fwhm
    let d = CouplingDensity::q_gaussian(2.0, fwhm, w0, weight).unwrap();
    let r = level_shift_by_quadrature(&d, w0, 0.0).unwrap();
    let want = C64::new(0.0, -2.0 * weight / fwhm);
    assert!((r - want).norm() < 1e-8 * want.norm(), "{r} vs {want}");
    let closed = CouplingDensity::lorentzian(fwhm, w0, weight).unwrap();
    assert!((level_shift(&closed, w0, 0.0).unwrap() - want).norm() < 1e-12 * want.norm());
    // away from the center only the truncated tails differ (~1e-4 relative)
    for off in [-20.0, -3.0, 1.5, 7.0] {
        let w = w0 + mhz(off);
        let (a, b) = (level_shift_by_quadrature(&d, w, mhz(0.2)).unwrap(), level_shift(&closed, w, mhz(0.2)).unwrap());
        assert!((a - b).norm() < 2e-4 * b.norm(), "{off}: {a} vs {b}");
    }
}

#[test]
fn zero_density_has_no_shift() {
    let d = CouplingDensity::q_gaussian(1.5, mhz(5.0), mhz(2880.0), 0.0).unwrap();
    assert_eq!(level_shift(&d, mhz(2881.0), 0.0).unwrap(), C64::new(0.0, 0.0));
    let p = params(0.4, 0.0, 0.0);
    let probe = grid(p.omega_c, 2.0, 41);
    let t = transmission_gcc(&d, &p, &probe, p.omega_c).unwrap();
    for (w, v) in probe.iter().zip(&t.values) {
        let bare = 1.0 / ((w - p.omega_c).powi(2) + p.kappa * p.kappa);
        assert!((v / bare - 1.0).abs() < 1e-14);
    }
}

#[test]
fn bridge_to_oscillator_model() {
    let p = params(0.4, 0.3, 9.51);
    let gamma_l = mhz(10.62);
    let d = CouplingDensity::lorentzian(gamma_l, p.omega_c + mhz(1.3), p.coupling_weight()).unwrap();
    let mut set = OscillatorSet::resonant(&p, gamma_l + p.gamma_hom);
    set.centers[0] = d.center;
    let probe = grid(p.omega_c, 40.0, 500);
    let t = transmission_gcc(&d, &p, &probe, p.omega_c).unwrap();
    for (&w, &v) in probe.iter().zip(&t.values) {
        let osc = steady_amplitude(&set, &p, w).norm_sqr();
        assert!((v / osc - 1.0).abs() < 1e-10);
    }
}

#[test]
fn poles_of_delta_and_lorentzian() {
    let p = SystemParams { kappa: 0.0, ..params(0.4, 0.0, 10.0) };
    let delta = CouplingDensity::lorentzian(0.0, p.omega_c, p.coupling_weight()).unwrap();
    let set = find_poles(&delta, &p, p.omega_c, &doublet_guesses(&delta, &p, p.omega_c)).unwrap();
    let g = p.collective_coupling();
    assert_eq!(set.poles.len(), 2);
    assert!((set.poles[0] - C64::new(p.omega_c - g, 0.0)).norm() < 1e-9 * g);
    assert!((set.poles[1] - C64::new(p.omega_c + g, 0.0)).norm() < 1e-9 * g);

    // coupled damped oscillators: (z - w_c + i kappa)(z - w_c + i Gamma) = W
    let p = params(0.4, 0.2, 10.0);
    let fwhm = mhz(6.0);
    let d = CouplingDensity::lorentzian(fwhm, p.omega_c, p.coupling_weight()).unwrap();
    let set = find_poles(&d, &p, p.omega_c, &doublet_guesses(&d, &p, p.omega_c)).unwrap();
    let gam = 0.5 * (fwhm + p.gamma_hom);
    let root = (C64::from(p.coupling_weight()) - 0.25 * (p.kappa - gam).powi(2)).sqrt();
    let mid = C64::new(p.omega_c, -0.5 * (p.kappa + gam));
    for (z, want) in set.poles.iter().zip([mid - root, mid + root]) {
        assert!((z - want).norm() < 1e-9 * root.norm(), "{z} vs {want}");
    }
}

#[test]
fn continuation_matches_closed_form() {
    let p = params(0.4, 1e-6, 10.0);
    let fwhm = mhz(4.0);
    let numeric = CouplingDensity::q_gaussian(2.0, fwhm, p.omega_c, p.coupling_weight()).unwrap();
    let closed = CouplingDensity::lorentzian(fwhm, p.omega_c, p.coupling_weight()).unwrap();
    for z in [C64::new(p.omega_c + mhz(9.0), -mhz(0.8)), C64::new(p.omega_c - mhz(1.0), -mhz(1.5))] {
        let a = level_shift_complex(&numeric, z, p.gamma_hom).unwrap();
        let b = level_shift_complex(&closed, z, p.gamma_hom).unwrap();
        assert!((a - b).norm() < 2e-4 * b.norm(), "{z}: {a} vs {b}");
    }
    let a = find_poles(&numeric, &p, p.omega_c, &doublet_guesses(&numeric, &p, p.omega_c)).unwrap();
    let b = find_poles(&closed, &p, p.omega_c, &doublet_guesses(&closed, &p, p.omega_c)).unwrap();
    for (x, y) in a.poles.iter().zip(&b.poles) {
        assert!((x - y).norm() < 1e-3 * mhz(1.0), "{x} vs {y}");
    }
}

#[test]
fn q_gaussian_poles_are_mirror_symmetric() {
    let p = params(0.4, 1e-6, 16.0);
    let d = CouplingDensity::q_gaussian(1.39, mhz(10.0), p.omega_c, p.coupling_weight()).unwrap();
    let set = find_poles(&d, &p, p.omega_c, &doublet_guesses(&d, &p, p.omega_c)).unwrap();
    assert_eq!(set.poles.len(), 2);
    let (lo, hi) = (set.poles[0], set.poles[1]);
    assert!(((hi.re - p.omega_c) - (p.omega_c - lo.re)).abs() < 1e-7 * mhz(1.0));
    assert!((hi.im - lo.im).abs() < 1e-7 * mhz(1.0));
    assert!(hi.im < 0.0);
}

#[test]
fn q_gaussian_formula_cases() {
    let a = mhz(5.0).powi(2);
    assert!((fwhm_q(2.0, a).unwrap() - mhz(10.0)).abs() < 1e-6);
    let g1 = fwhm_q(1.0 + 1e-9, 3.0).unwrap();
    assert!((g1 - 2.0 * (3.0 * std::f64::consts::LN_2).sqrt()).abs() < 1e-12);
    for x in [0.0, 0.3, 2.0] {
        let lorentz = qgauss_eval(2.0, 1.7, 0.1, 2.0, 0.5, x).unwrap();
        assert!((lorentz - (0.5 + 2.0 / (1.0 + (x - 0.1f64).powi(2) / 1.7))).abs() < 1e-14);
        let gauss = qgauss_eval(1.0 + 1e-8, 1.7, 0.1, 2.0, 0.5, x).unwrap();
        assert!((gauss - (0.5 + 2.0 * (-(x - 0.1f64).powi(2) / 1.7).exp())).abs() < 1e-14);
    }
    assert!(qgauss_eval(3.0, 1.0, 0.0, 1.0, 0.0, 0.0).is_err());
    assert!(qgauss_eval(1.0, 1.0, 0.0, 1.0, 0.0, 0.0).is_err());
    // wing slope -2/(q-1)
    let q = 1.5;
    let (x1, x2) = (1e4, 2e4);
    let slope = (qgauss_eval(q, 1.0, 0.0, 1.0, 0.0, x2).unwrap() / qgauss_eval(q, 1.0, 0.0, 1.0, 0.0, x1).unwrap()).ln()
        / 2f64.ln();
    assert!((slope + 2.0 / (q - 1.0)).abs() < 1e-6);
}

proptest! {
    #[test]
    fn half_maximum_at_half_fwhm(q in 1.001f64..2.99, a in 0.01f64..100.0, b in -1.0f64..1.0) {
        let g = fwhm_q(q, a).unwrap();
        for s in [-0.5, 0.5] {
            let v = qgauss_eval(q, a, 0.3, 2.0, b, 0.3 + s * g).unwrap();
            prop_assert!((v - (b + 1.0)).abs() < 1e-12);
        }
        prop_assert!((a_from(q, g).unwrap() / a - 1.0).abs() < 1e-12);
    }

    #[test]
    fn level_shift_imaginary_part(q in 1.05f64..2.5, off in -30.0f64..30.0) {
        let w0 = mhz(2880.0);
        let d = CouplingDensity::q_gaussian(q, mhz(8.0), w0, mhz(9.0).powi(2)).unwrap();
        let w = w0 + mhz(off);
        let r = level_shift(&d, w, 0.0).unwrap();
        prop_assert!((r.im + std::f64::consts::PI * d.eval(w)).abs() <= 1e-12 * r.norm());
        let r = level_shift(&d, w, mhz(0.5)).unwrap();
        prop_assert!(r.im <= 0.0);
    }
}

#[test]
fn exact_q_gaussian_samples_are_fitted() {
    let (q, gq, w0) = (1.389, mhz(12.54), mhz(2880.0));
    let a = a_from(q, gq).unwrap();
    let omega = grid(w0, 60.0, 241);
    let rho: Vec<f64> = omega.iter().map(|&w| qgauss_eval(q, a, w0, 3.0e6, 0.0, w).unwrap()).collect();
    let d = CouplingDensity::tabulated(omega.clone(), rho, vec![]).unwrap();
    let fit = fit_qgaussian(&d).unwrap();
    assert!((fit.q / q - 1.0).abs() < 1e-6, "{fit:?}");
    assert!((fit.gamma_q / gq - 1.0).abs() < 1e-6);
    assert!((fit.center - w0).abs() < 1e-6 * gq);

    let rho: Vec<f64> = omega.iter().map(|&w| qgauss_eval(2.0, mhz(4.0).powi(2), w0, 1.0, 0.0, w).unwrap()).collect();
    let fit = fit_qgaussian(&CouplingDensity::tabulated(omega, rho, vec![]).unwrap()).unwrap();
    assert!((fit.q - 2.0).abs() < 0.05);
}

#[test]
fn rearrangement_cases() {
    let wc = mhz(2880.0);
    let probe = grid(wc, 2.0, 9);
    let power: Vec<f64> = (0..9).map(|k| k as f64).collect();
    let single = Scan { key: ScanKey::Shift(0.0), probe: probe.clone(), power: power.clone(), variance: None };
    let m = rearrange_scans(&[single], wc, &|_| unreachable!()).unwrap();
    assert_eq!(m.tuning, vec![wc]);
    for (a, b) in m.omega.iter().zip(&probe) {
        assert!((a - b).abs() < 1e-3);
    }
    for (a, b) in m.values.iter().zip(&power) {
        assert!((a - b).abs() < 1e-9);
    }

    // two scans shifted by +-delta around a symmetric trace give a symmetric map
    let sym: Vec<f64> = probe.iter().map(|w| 1.0 / (1.0 + ((w - wc) / mhz(1.0)).powi(2))).collect();
    let step = probe[1] - probe[0];
    let scans: Vec<Scan> = [-2.0, 2.0]
        .iter()
        .map(|&k| Scan { key: ScanKey::Shift(k * step), probe: probe.clone(), power: sym.clone(), variance: None })
        .collect();
    let m = rearrange_scans(&scans, wc, &|_| unreachable!()).unwrap();
    let (nw, nt) = (m.omega.len(), m.tuning.len());
    assert_eq!((nw, nt), (13, 2));
    for i in 0..nw {
        let (a, b) = (m.values[i * nt], m.values[(nw - 1 - i) * nt + 1]);
        assert!(a.is_nan() && b.is_nan() || (a - b).abs() < 1e-12);
    }

    // unknown field mapping is rejected
    let field = Scan { key: ScanKey::Field(0.01), probe, power, variance: None };
    let err = rearrange_scans(&[field], wc, &|_| Err(crate::Error::invalid("no map"))).unwrap_err();
    assert!(err.to_string().contains("scan 0"));
}

#[test]
fn reconstruction_round_trip_small() {
    let p = params(0.4, 1e-6, 9.51);
    let gen = CouplingDensity::q_gaussian(1.389, mhz(12.54), p.omega_c, p.coupling_weight()).unwrap();
    let step = 0.5;
    let shifts: Vec<f64> = (-220..=220).map(|k| mhz(step * k as f64)).collect();
    let probe: Vec<f64> = (-120..=120).map(|k| p.omega_c + mhz(step * k as f64)).collect();
    let scans = synthesize_scans(&gen, &p, p.omega_c, &shifts, &probe).unwrap();
    let map = rearrange_scans(&scans, p.omega_c, &|_| unreachable!()).unwrap();
    let ex = extract_all(&map, &p, (p.omega_c - mhz(50.0), p.omega_c + mhz(50.0)));
    assert!(ex.excluded.is_empty(), "{:?}", &ex.excluded[..ex.excluded.len().min(3)]);
    for s in &ex.samples {
        let r = level_shift(&gen, s.omega, p.gamma_hom).unwrap();
        assert!((s.r_plus - r).norm() < 1e-3 * r.norm(), "{} {} {r}", s.omega, s.r_plus);
    }
    let rho = reconstruct_density(&ex.samples, p.gamma_hom).unwrap();
    assert!((rho.total_weight() / p.coupling_weight() - 1.0).abs() < 0.01);
    let fit = fit_qgaussian(&rho).unwrap();
    assert!((fit.q - 1.389).abs() < 0.05, "{fit:?}");
    assert!((fit.gamma_q / mhz(12.54) - 1.0).abs() < 0.02);
}

#[test]
fn width_sweeps() {
    let p = params(0.4, 1e-6, 10.0);
    let probe = grid(p.omega_c, 20.0, 2001);
    let widths = [0.0, mhz(0.5), mhz(1.0), mhz(2.0)];
    let lor = sweep_splitting_vs_width(Family::Lorentzian, &p, &widths, &probe).unwrap();
    let s: Vec<f64> = lor.iter().map(|x| x.doublet.splitting().unwrap()).collect();
    assert!((s[0] / (2.0 * p.collective_coupling()) - 1.0).abs() < 1e-3);
    // first order in the width the Lorentzian peaks move out by kappa Gamma / sqrt(W)
    for (k, &w) in widths.iter().enumerate().skip(1) {
        let want = p.kappa * 0.5 * w / p.collective_coupling();
        assert!(((s[k] - s[0]) / want - 1.0).abs() < 0.1, "{w}: {} vs {want}", s[k] - s[0]);
    }
    let q = sweep_splitting_vs_width(Family::QGaussian(1.39), &p, &widths, &probe).unwrap();
    let sq: Vec<f64> = q.iter().map(|x| x.doublet.splitting().unwrap()).collect();
    assert!(sq.windows(2).all(|w| w[1] > w[0]), "{sq:?}");
    assert!(sq[3] - sq[0] > 2.0 * (s[3] - s[0]));
}
