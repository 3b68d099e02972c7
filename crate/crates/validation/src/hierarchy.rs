//! Cumulant hierarchy against the exact oracle, the pinned limit and the
//! temperature law.

use nvcavity_core::cumulant::{
    exact_oracle, integrate_to_steady, probe_spectrum, rabi_vs_temperature, HierarchyConfig, MomentState,
};
use nvcavity_core::oscillator::{steady_amplitude, OscillatorSet};
use nvcavity_core::thermal::n_bar;
use nvcavity_core::units::{mhz, to_mhz};
use nvcavity_core::{SystemParams, ThermalBath};

use crate::Outcome;

fn small_params() -> SystemParams {
    SystemParams {
        omega_c: mhz(2700.0),
        kappa: mhz(1.0),
        gamma_hom: mhz(0.8),
        gamma_p: mhz(0.3),
        g: mhz(0.6),
        n_spins: 2.0,
        eta: mhz(1.0) / 100.0,
    }
}

fn compare(p: &SystemParams, t: f64, cutoff: usize, omega_p: f64) -> Result<(f64, f64, bool), String> {
    let bath = ThermalBath::new(t).map_err(|e| e.to_string())?;
    let exact = exact_oracle(2, cutoff, p, p.omega_c, bath, omega_p).map_err(|e| e.to_string())?;
    let init = MomentState::thermal(n_bar(bath, p.omega_c), n_bar(bath, p.omega_c));
    let s = integrate_to_steady(&HierarchyConfig::default(), p, p.omega_c, bath, omega_p, &init)
        .map_err(|e| e.to_string())?;
    Ok((s.state.a.norm_sqr(), exact.moments.a.norm_sqr(), exact.cutoff_adequate))
}

pub fn closure_vs_oracle() -> Outcome {
    let p = small_params();
    let mut pass = true;
    let mut parts = Vec::new();
    for t in [0.0, 0.1] {
        match compare(&p, t, 5, p.omega_c) {
            Ok((h, e, _)) => {
                let rel = h / e - 1.0;
                pass &= rel.abs() < 0.01;
                parts.push(format!("T = {:.0} mK: {:.3}%", 1e3 * t, 100.0 * rel));
            }
            Err(e) => return Outcome::error(format!("T = {t} K: {e}")),
        }
    }
    let mut o = Outcome::new(pass, format!("cutoff 5, hierarchy vs oracle |<a>|^2: {} (limit 1%)", parts.join(", ")));
    for (label, wp) in [("probe on resonance", p.omega_c), ("probe 0.3 MHz below", p.omega_c - mhz(0.3))] {
        if let Ok((h, e, adequate)) = compare(&p, 0.1, 14, wp) {
            o = o.note(format!(
                "diagnostic, T = 100 mK, cutoff 14, {label}: {:.3}% (cutoff adequate: {adequate})",
                100.0 * (h / e - 1.0)
            ));
        }
    }
    o
}

pub fn pinned_reduction() -> Outcome {
    let p = SystemParams { n_spins: 1e12, g: mhz(9.51) / 1e6, gamma_hom: mhz(0.2), ..small_params() };
    let cfg = HierarchyConfig { pinned: true, ..Default::default() };
    let set = OscillatorSet::resonant(&p, p.gamma_hom + 2.0 * p.gamma_p);
    let probe: Vec<f64> = (0..200).map(|k| p.omega_c + mhz(-22.0 + 44.0 * k as f64 / 199.0)).collect();
    let spec = match probe_spectrum(&cfg, &p, p.omega_c, ThermalBath::zero(), &probe) {
        Ok(s) => s,
        Err(e) => return Outcome::error(e),
    };
    if let Some((k, e)) = spec.failures.first() {
        return Outcome::error(format!("probe point {k}: {e}"));
    }
    let worst = probe
        .iter()
        .zip(&spec.spectrum.values)
        .map(|(&w, &v)| (v / steady_amplitude(&set, &p, w).norm_sqr() - 1.0).abs())
        .fold(0.0f64, f64::max);
    Outcome::new(worst < 1e-8, format!("max relative deviation {worst:.2e} over 200 points (limit 1e-8)"))
}

pub fn temperature_law() -> Outcome {
    let p = SystemParams {
        omega_c: mhz(2700.0),
        kappa: mhz(0.4),
        gamma_hom: mhz(1e-3),
        gamma_p: mhz(0.4),
        g: 0.0,
        n_spins: 1e12,
        eta: mhz(0.4) / 100.0,
    }
    .with_collective_coupling(mhz(9.51));
    let probe: Vec<f64> = (0..121).map(|k| p.omega_c + mhz(-24.0 + 0.4 * k as f64)).collect();
    let temps: Vec<f64> = (1..=10).map(|k| 0.1 * k as f64).collect();
    let pts = match rabi_vs_temperature(&HierarchyConfig::default(), &p, &temps, &probe) {
        Ok(v) => v,
        Err(e) => return Outcome::error(e),
    };
    let mut worst = 0.0f64;
    let mut unresolved = 0;
    let mut o = Outcome::new(true, "");
    for r in &pts {
        match r.omega_measured {
            Some(m) => {
                let rel = m / r.omega_twolevel - 1.0;
                worst = worst.max(rel.abs());
                o = o.note(format!(
                    "T = {:.1} K: measured {:.4} MHz, two-level law {:.4} MHz ({:+.3}%)",
                    r.temperature,
                    to_mhz(m),
                    to_mhz(r.omega_twolevel),
                    100.0 * rel
                ));
            }
            None => unresolved += 1,
        }
    }
    o.pass = unresolved == 0 && worst < 0.02;
    o.detail = format!("{} temperatures, {unresolved} unresolved, worst deviation {:.3}% (limit 2%)", pts.len(), 100.0 * worst);
    o
}
