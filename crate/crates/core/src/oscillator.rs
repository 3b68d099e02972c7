//! Coupled-oscillator steady state: one near-resonant subensemble plus up to
//! three off-resonant ones that only shift and damp the cavity.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::{least_squares, FitConfig, FitError, FitProblem};
use crate::model::SystemParams;
use crate::spectrum::{check_grid, TransmissionSpectrum};
use crate::units::{mhz, to_mhz};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorSet {
    /// Subensemble centres omega_aj (rad/s); index 0 is the near-resonant one.
    pub centers: [f64; 4],
    pub counts: [f64; 4],
    pub g: f64,
    /// Shared effective width (rad/s).
    pub gamma: f64,
    /// Evaluate U_a and Gamma_a at omega_p = omega_c instead of at the probe.
    pub freeze_offresonant: bool,
}

impl OscillatorSet {
    /// A single ensemble of `params.n_spins` spins sitting at the cavity.
    pub fn resonant(params: &SystemParams, gamma: f64) -> Self {
        Self {
            centers: [params.omega_c; 4],
            counts: [params.n_spins, 0.0, 0.0, 0.0],
            g: params.g,
            gamma,
            freeze_offresonant: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::invalid("oscillator width gamma must be > 0"));
        }
        if self.counts.iter().any(|n| !(*n >= 0.0)) {
            return Err(Error::invalid("subensemble counts must be >= 0"));
        }
        Ok(())
    }
}

/// (Gamma_a, U_a) summed over subensembles 2..4.
pub fn offresonant_shift_and_damping(set: &OscillatorSet, omega_p: f64) -> (f64, f64) {
    let half = 0.5 * set.gamma;
    let mut damping = 0.0;
    let mut shift = 0.0;
    for j in 1..4 {
        let weight = set.g * set.g * set.counts[j];
        let delta = set.centers[j] - omega_p;
        let den = half * half + delta * delta;
        damping += weight * half / den;
        shift += weight * delta / den;
    }
    (damping, shift)
}

/// Steady cavity field
/// eta / (kappa + Gamma_a + i(Delta_c - U_a) + g^2 N_1 / (gamma/2 + i Delta_a1)).
pub fn steady_amplitude(set: &OscillatorSet, params: &SystemParams, omega_p: f64) -> Complex64 {
    let at = if set.freeze_offresonant { params.omega_c } else { omega_p };
    let (damping, shift) = offresonant_shift_and_damping(set, at);
    let delta_c = params.omega_c - omega_p;
    let delta_a = set.centers[0] - omega_p;
    let weight = set.g * set.g * set.counts[0];
    let den = Complex64::new(params.kappa + damping, delta_c - shift)
        + weight / Complex64::new(0.5 * set.gamma, delta_a);
    Complex64::from(params.eta) / den
}

/// Normal-mode splitting of the resonant two-oscillator problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Splitting {
    Resolved(f64),
    Unresolved,
}

impl Splitting {
    pub fn value(self) -> Option<f64> {
        match self {
            Splitting::Resolved(s) => Some(s),
            Splitting::Unresolved => None,
        }
    }
}

/// 2 sqrt(g^2 N_1 - (gamma/2 - kappa)^2 / 4), resolved when
/// g sqrt(N_1) > |gamma/2 - kappa| / 2.
pub fn normal_mode_splitting(params: &SystemParams, n1: f64, gamma: f64) -> Splitting {
    let coupling = params.g * n1.sqrt();
    let mismatch = 0.5 * (0.5 * gamma - params.kappa);
    if coupling <= mismatch.abs() {
        return Splitting::Unresolved;
    }
    Splitting::Resolved(2.0 * ((coupling - mismatch) * (coupling + mismatch)).sqrt())
}

/// Inverse of [`normal_mode_splitting`]: the g sqrt(N) that produces a
/// splitting `s` at the given widths.
pub fn coupling_from_splitting(s: f64, gamma: f64, kappa: f64) -> f64 {
    let mismatch = 0.5 * (0.5 * gamma - kappa);
    (0.25 * s * s + mismatch * mismatch).sqrt()
}

pub fn transmission_line(set: &OscillatorSet, params: &SystemParams, probe: &[f64]) -> Result<TransmissionSpectrum> {
    set.validate()?;
    let values = probe.iter().map(|&w| steady_amplitude(set, params, w).norm_sqr()).collect();
    TransmissionSpectrum::line(probe.to_vec(), values)
}

/// |<a>|^2 over probe frequency for each near-resonant centre omega_a1 in
/// `tuning`.
pub fn transmission_map(
    set: &OscillatorSet,
    params: &SystemParams,
    probe: &[f64],
    tuning: &[f64],
) -> Result<TransmissionSpectrum> {
    set.validate()?;
    check_grid("probe", probe)?;
    check_grid("tuning", tuning)?;
    let rows: Vec<Vec<f64>> = tuning
        .par_iter()
        .map(|&wa| {
            let mut s = *set;
            s.centers[0] = wa;
            probe.iter().map(|&w| steady_amplitude(&s, params, w).norm_sqr()).collect()
        })
        .collect();
    TransmissionSpectrum::map(probe.to_vec(), tuning.to_vec(), rows.concat())
}

/// Avoided-crossing fit parameters. Rates in rad/s; `amplitude` and the
/// background are in the units of the data, with `slope` per rad/s of probe
/// detuning from the cavity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvoidedCrossingFit {
    pub gamma: f64,
    pub g_sqrt_n: f64,
    pub u_a: f64,
    pub amplitude: f64,
    pub slope: f64,
    pub offset: f64,
    pub residual_norm: f64,
    /// Standard errors in the order of the fields above.
    pub std_errors: Option<[f64; 6]>,
}

impl AvoidedCrossingFit {
    /// Starting point with unknown scale and background.
    pub fn guess(gamma: f64, g_sqrt_n: f64) -> Self {
        Self { gamma, g_sqrt_n, u_a: 0.0, amplitude: f64::NAN, slope: 0.0, offset: 0.0, residual_norm: f64::NAN, std_errors: None }
    }
}

/// Lineshape in MHz units with unit drive: 1 / |kappa + i(dc - u) + G^2/(gamma/2 + i da)|^2.
fn crossing_shape(kappa: f64, gamma: f64, g: f64, u: f64, dc: f64, da: f64) -> f64 {
    let den = Complex64::new(kappa, dc - u) + g * g / Complex64::new(0.5 * gamma, da);
    1.0 / den.norm_sqr()
}

/// Least-squares fit of amplitude * |<a>|^2 + linear background to a 2-D map
/// whose tuning axis is omega_a1. `params` supplies omega_c and kappa.
pub fn fit_avoided_crossing(
    data: &TransmissionSpectrum,
    params: &SystemParams,
    init: &AvoidedCrossingFit,
) -> Result<AvoidedCrossingFit> {
    let tuning = data
        .tuning
        .as_ref()
        .ok_or_else(|| Error::invalid("avoided-crossing fit needs a 2-D map"))?;
    if !(init.gamma > 0.0) || !(init.g_sqrt_n >= 0.0) {
        return Err(Error::invalid("initial gamma must be > 0 and g sqrt(N) >= 0"));
    }
    let kappa = to_mhz(params.kappa);
    let mut points = Vec::new();
    for (i, &wa) in tuning.iter().enumerate() {
        for (k, &wp) in data.probe.iter().enumerate() {
            let y = data.row(i)[k];
            if y.is_finite() {
                points.push((to_mhz(params.omega_c - wp), to_mhz(wa - wp), y));
            }
        }
    }
    if points.len() < 12 {
        return Err(Error::invalid("too few finite samples for an avoided-crossing fit"));
    }
    let ys = points.iter().fold(0.0f64, |m, p| m.max(p.2.abs()));
    if !(ys > 0.0) {
        return Err(FitError::Degenerate("signal-free input".into()).into());
    }
    let (g0, gm0, u0) = (to_mhz(init.gamma), to_mhz(init.g_sqrt_n), to_mhz(init.u_a));
    let shape_max = points.iter().fold(0.0f64, |m, p| m.max(crossing_shape(kappa, g0, gm0, u0, p.0, p.1)));
    let amp0 = if init.amplitude.is_finite() { init.amplitude / ys } else { 1.0 / shape_max };
    let n = points.len();
    let problem = FitProblem {
        residual: |p: &[f64], r: &mut [f64]| {
            for (ri, &(dc, da, y)) in r.iter_mut().zip(&points) {
                let model = p[3] * crossing_shape(kappa, p[0], p[1], p[2], dc, da) + p[4] * dc + p[5];
                *ri = model - y / ys;
            }
        },
        n_residuals: n,
        initial: vec![g0, gm0, u0, amp0, init.slope * mhz(1.0) / ys, init.offset / ys],
        lower: vec![1e-6, 0.0, f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY, f64::NEG_INFINITY],
        upper: vec![1e5, 1e5, f64::INFINITY, f64::INFINITY, f64::INFINITY, f64::INFINITY],
        weights: None,
    };
    let fit = least_squares(&problem, &FitConfig { max_iterations: 300, ..Default::default() })?;
    let p = &fit.params;
    let rms = fit.residual_norm / (n as f64).sqrt();
    let peak = p[3] * points.iter().fold(0.0f64, |m, q| m.max(crossing_shape(kappa, p[0], p[1], p[2], q.0, q.1)));
    if !(peak > 10.0 * rms) || p[0] <= 1.0001e-6 || p[0] >= 0.9999e5 || fit.covariance.is_none() {
        return Err(FitError::Degenerate(format!(
            "no resolvable crossing (line height {peak:e} vs residual rms {rms:e})"
        ))
        .into());
    }
    let se = fit.std_errors();
    let scale = [mhz(1.0), mhz(1.0), mhz(1.0), ys, ys / mhz(1.0), ys];
    let mut std_errors = [0.0; 6];
    for k in 0..6 {
        std_errors[k] = se[k] * scale[k];
    }
    Ok(AvoidedCrossingFit {
        gamma: mhz(p[0]),
        g_sqrt_n: mhz(p[1]),
        u_a: mhz(p[2]),
        amplitude: p[3] * ys,
        slope: p[4] * ys / mhz(1.0),
        offset: p[5] * ys,
        residual_norm: fit.residual_norm * ys,
        std_errors: Some(std_errors),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::doublet;

    fn params() -> SystemParams {
        SystemParams {
            omega_c: mhz(2700.0),
            kappa: mhz(0.4),
            gamma_hom: 0.0,
            gamma_p: 0.0,
            g: mhz(9.51) / 1e6,
            n_spins: 1e12,
            eta: 1.0,
        }
    }

    fn grid(center: f64, half: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| center - half + 2.0 * half * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn empty_offresonant_set() {
        let set = OscillatorSet::resonant(&params(), mhz(10.92));
        assert_eq!(offresonant_shift_and_damping(&set, mhz(2700.0)), (0.0, 0.0));
    }

    #[test]
    fn symmetric_pair_cancels_shift() {
        let p = params();
        let mut set = OscillatorSet::resonant(&p, mhz(10.0));
        set.centers[1] = p.omega_c + mhz(80.0);
        set.centers[2] = p.omega_c - mhz(80.0);
        set.counts[1] = 3e11;
        set.counts[2] = 3e11;
        let (damping, shift) = offresonant_shift_and_damping(&set, p.omega_c);
        assert!(shift.abs() < 1e-9 * damping);
        set.counts[2] = 0.0;
        set.centers[1] = p.omega_c;
        let (damping, shift) = offresonant_shift_and_damping(&set, p.omega_c);
        assert_eq!(shift, 0.0);
        assert!((damping - set.g * set.g * 3e11 * 2.0 / set.gamma).abs() < 1e-9 * damping);
    }

    #[test]
    fn bare_cavity_and_resonant_value() {
        let p = params();
        let mut set = OscillatorSet::resonant(&p, mhz(10.92));
        set.counts[0] = 0.0;
        let w = p.omega_c + mhz(0.3);
        let a = steady_amplitude(&set, &p, w);
        let expect = 1.0 / Complex64::new(p.kappa, p.omega_c - w);
        assert!((a - expect).norm() < 1e-12 * expect.norm());
        let set = OscillatorSet::resonant(&p, mhz(10.92));
        let a0 = steady_amplitude(&set, &p, p.omega_c).norm_sqr();
        let expect = 1.0 / (p.kappa + p.coupling_weight() * 2.0 / set.gamma).powi(2);
        assert!((a0 - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn splitting_formula_cases() {
        let p = params();
        let s = normal_mode_splitting(&p, p.n_spins, 2.0 * p.kappa).value().unwrap();
        assert!((s - 2.0 * p.collective_coupling()).abs() < 1e-9 * s);
        let s = normal_mode_splitting(&p, p.n_spins, mhz(10.92)).value().unwrap();
        assert!((to_mhz(s) - 18.335).abs() < 1e-3);
        assert_eq!(normal_mode_splitting(&p, 1.0, mhz(10.92)), Splitting::Unresolved);
        let g = coupling_from_splitting(s, mhz(10.92), p.kappa);
        assert!((g - p.collective_coupling()).abs() < 1e-9 * g);
    }

    #[test]
    fn reflection_symmetry_and_merging() {
        let p = params();
        let set = OscillatorSet::resonant(&p, mhz(10.92));
        for d in [0.1, 3.0, 9.0, 25.0] {
            let a = steady_amplitude(&set, &p, p.omega_c + mhz(d)).norm();
            let b = steady_amplitude(&set, &p, p.omega_c - mhz(d)).norm();
            assert!((a - b).abs() < 1e-12 * a);
        }
        let probe = grid(p.omega_c, mhz(40.0), 2001);
        let mut counts = Vec::new();
        for gamma in [5.0, 10.0, 20.0, 40.0, 80.0] {
            let set = OscillatorSet::resonant(&p, mhz(gamma));
            let t = transmission_line(&set, &p, &probe).unwrap();
            counts.push(doublet(&t.probe, &t.values).unwrap().splitting().is_some());
        }
        assert!(counts[0] && !counts[4]);
        assert!(counts.windows(2).all(|w| w[0] || !w[1]), "{counts:?}");
    }

    #[test]
    fn noiseless_crossing_fit() {
        let p = params();
        let set = OscillatorSet::resonant(&p, mhz(10.92));
        let probe = grid(p.omega_c, mhz(30.0), 61);
        let tuning = grid(p.omega_c, mhz(30.0), 21);
        let data = transmission_map(&set, &p, &probe, &tuning).unwrap();
        let init = AvoidedCrossingFit::guess(mhz(8.0), mhz(8.0));
        let fit = fit_avoided_crossing(&data, &p, &init).unwrap();
        assert!((fit.gamma / mhz(10.92) - 1.0).abs() < 1e-6, "{}", to_mhz(fit.gamma));
        assert!((fit.g_sqrt_n / mhz(9.51) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn flat_input_is_not_a_fit() {
        let p = params();
        let probe = grid(p.omega_c, mhz(30.0), 31);
        let tuning = grid(p.omega_c, mhz(30.0), 11);
        let data = TransmissionSpectrum::map(probe, tuning, vec![0.3; 31 * 11]).unwrap();
        assert!(fit_avoided_crossing(&data, &p, &AvoidedCrossingFit::guess(mhz(8.0), mhz(8.0))).is_err());
    }
}
