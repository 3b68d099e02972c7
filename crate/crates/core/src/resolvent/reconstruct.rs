use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::density::{interpolate, CouplingDensity};
use super::shift::{level_shift, transmission_value, LevelShiftSample};
use crate::error::{Error, Result};
use crate::fitting::fit_lorentzian;
use crate::model::SystemParams;

/// How a scan is placed relative to the cavity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ScanKey {
    /// Magnetic field in tesla; needs a field-to-frequency map.
    Field(f64),
    /// omega_c minus the ensemble frequency, rad/s.
    Shift(f64),
}

/// One transmission trace at fixed field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scan {
    pub key: ScanKey,
    pub probe: Vec<f64>,
    pub power: Vec<f64>,
    /// Per-sample variance of `power`, if known.
    pub variance: Option<Vec<f64>>,
}

/// Scans re-indexed to a fixed ensemble at omega_c and a tuned cavity.
/// `values[i * tuning.len() + j]` is the transmission at probe `omega[i]` for
/// cavity frequency `tuning[j]`; NaN where no scan covers the cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RearrangedMap {
    pub omega: Vec<f64>,
    pub tuning: Vec<f64>,
    pub values: Vec<f64>,
    /// NaN when the scans carried no variances.
    pub variance: Vec<f64>,
}

impl RearrangedMap {
    /// Finite (tuning, value, variance) points of the slice at `omega[i]`.
    pub fn slice(&self, i: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let nt = self.tuning.len();
        let mut out = (Vec::new(), Vec::new(), Vec::new());
        for j in 0..nt {
            let v = self.values[i * nt + j];
            if v.is_finite() {
                out.0.push(self.tuning[j]);
                out.1.push(v);
                out.2.push(self.variance[i * nt + j]);
            }
        }
        out
    }
}

fn median_step(x: &[f64]) -> f64 {
    let mut d: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    d.sort_by(f64::total_cmp);
    d[d.len() / 2]
}

/// Shifts every scan by omega_c - omega_spin(B) so that the ensemble sits at
/// omega_c and the cavity is tuned instead. The common probe axis is a lattice
/// through omega_c with the median probe step of the first scan; each scan is
/// linearly interpolated onto it. Scans with the same shift are averaged with
/// inverse-variance weights (equal weights without variances).
pub fn rearrange_scans(
    scans: &[Scan],
    omega_c: f64,
    spin_frequency: &dyn Fn(f64) -> Result<f64>,
) -> Result<RearrangedMap> {
    if scans.is_empty() {
        return Err(Error::invalid("no scans to rearrange"));
    }
    let mut shifts = Vec::with_capacity(scans.len());
    for (k, s) in scans.iter().enumerate() {
        if s.probe.len() < 2 || s.power.len() != s.probe.len() {
            return Err(Error::invalid(format!("scan {k}: needs >= 2 samples with matching lengths")));
        }
        if s.probe.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid(format!("scan {k}: probe frequencies must increase")));
        }
        if matches!(&s.variance, Some(v) if v.len() != s.probe.len()) {
            return Err(Error::invalid(format!("scan {k}: variance length mismatch")));
        }
        let delta = match s.key {
            ScanKey::Shift(d) => d,
            ScanKey::Field(b) => omega_c
                - spin_frequency(b).map_err(|e| Error::invalid(format!("scan {k} at B = {b} T: {e}")))?,
        };
        if !delta.is_finite() {
            return Err(Error::invalid(format!("scan {k}: non-finite shift")));
        }
        shifts.push(delta);
    }
    let step = median_step(&scans[0].probe);

    // tuning bins: shifts equal to within a millionth of a step share a bin
    let mut order: Vec<usize> = (0..scans.len()).collect();
    order.sort_by(|&a, &b| shifts[a].total_cmp(&shifts[b]));
    let mut tuning: Vec<f64> = Vec::new();
    let mut bin_of = vec![0usize; scans.len()];
    for &k in &order {
        match tuning.last() {
            Some(&t) if (omega_c + shifts[k] - t).abs() <= 1e-6 * step => {}
            _ => tuning.push(omega_c + shifts[k]),
        }
        bin_of[k] = tuning.len() - 1;
    }

    let lattice = |x: f64| (x - omega_c) / step;
    let (mut k_lo, mut k_hi) = (i64::MAX, i64::MIN);
    for (s, &d) in scans.iter().zip(&shifts) {
        k_lo = k_lo.min((lattice(s.probe[0] + d) - 1e-6).ceil() as i64);
        k_hi = k_hi.max((lattice(s.probe[s.probe.len() - 1] + d) + 1e-6).floor() as i64);
    }
    if k_hi < k_lo {
        return Err(Error::invalid("scans do not cover a single common probe node"));
    }
    let omega: Vec<f64> = (k_lo..=k_hi).map(|k| omega_c + k as f64 * step).collect();
    let (nw, nt) = (omega.len(), tuning.len());
    let mut sum = vec![0.0; nw * nt];
    let mut wsum = vec![0.0; nw * nt];
    let mut has_var = true;
    for (k, (s, &d)) in scans.iter().zip(&shifts).enumerate() {
        let j = bin_of[k];
        let (lo, hi) = (s.probe[0], s.probe[s.probe.len() - 1]);
        for (i, &w) in omega.iter().enumerate() {
            // snap to the scan's own end points against round-off
            let x = w - d;
            let x = if (x - lo).abs() < 1e-6 * step { lo } else if (x - hi).abs() < 1e-6 * step { hi } else { x };
            if x < lo || x > hi {
                continue;
            }
            let v = interpolate(&s.probe, &s.power, x);
            let weight = match &s.variance {
                Some(var) => {
                    let e = interpolate(&s.probe, var, x);
                    if e > 0.0 { 1.0 / e } else { 1.0 }
                }
                None => {
                    has_var = false;
                    1.0
                }
            };
            sum[i * nt + j] += weight * v;
            wsum[i * nt + j] += weight;
        }
    }
    let values: Vec<f64> = sum.iter().zip(&wsum).map(|(s, w)| if *w > 0.0 { s / w } else { f64::NAN }).collect();
    let variance: Vec<f64> =
        wsum.iter().map(|w| if *w > 0.0 && has_var { 1.0 / w } else { f64::NAN }).collect();
    Ok(RearrangedMap { omega, tuning, values, variance })
}

/// Lorentzian fit along the tuning axis of slice `i`. The peak sits at
/// omega - Re R+ and its half width is kappa + |Im R+|.
pub fn extract_level_shift(map: &RearrangedMap, params: &SystemParams, i: usize) -> Result<LevelShiftSample> {
    if i >= map.omega.len() {
        return Err(Error::invalid(format!("slice index {i} out of range")));
    }
    let omega = map.omega[i];
    let (x, y, var) = map.slice(i);
    if x.len() < 6 {
        return Err(Error::Data(format!("slice at {omega}: only {} samples", x.len())));
    }
    let weights: Option<Vec<f64>> =
        if var.iter().all(|v| *v > 0.0) { Some(var.iter().map(|v| 1.0 / v).collect()) } else { None };
    let k_max = y.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(k, _)| k).expect("non-empty");
    if k_max == 0 || k_max == x.len() - 1 {
        return Err(Error::Data(format!("slice at {omega}: peak at the edge of the tuning range")));
    }
    let fit = fit_lorentzian(&x, &y, weights.as_deref())?;
    let err = fit.std_errors();
    if fit.center < x[0] || fit.center > x[x.len() - 1] {
        return Err(Error::Data(format!("slice at {omega}: fitted peak outside the tuning range")));
    }
    if fit.hwhm < params.kappa - 3.0 * err[1] - 1e-9 * params.kappa {
        return Err(Error::Data(format!(
            "slice at {omega}: half width {} below kappa {}",
            fit.hwhm, params.kappa
        )));
    }
    Ok(LevelShiftSample {
        omega,
        r_plus: C64::new(omega - fit.center, -(fit.hwhm - params.kappa)),
        re_err: err[0],
        im_err: err[1],
    })
}

/// All slices with `omega` inside `range`; failed slices are listed with the
/// reason instead of aborting.
pub struct Extraction {
    pub samples: Vec<LevelShiftSample>,
    pub excluded: Vec<(f64, String)>,
}

pub fn extract_all(map: &RearrangedMap, params: &SystemParams, range: (f64, f64)) -> Extraction {
    let idx: Vec<usize> = (0..map.omega.len()).filter(|&i| map.omega[i] >= range.0 && map.omega[i] <= range.1).collect();
    let results: Vec<(f64, Result<LevelShiftSample>)> =
        idx.par_iter().map(|&i| (map.omega[i], extract_level_shift(map, params, i))).collect();
    let mut out = Extraction { samples: Vec::new(), excluded: Vec::new() };
    for (w, r) in results {
        match r {
            Ok(s) => out.samples.push(s),
            Err(e) => out.excluded.push((w, e.to_string())),
        }
    }
    out
}

/// rho(w) ~ -Im R+/pi + (gamma_hom/2pi) dRe R+/dw, derivative by central
/// differences (one-sided at the ends); errors propagated in quadrature.
pub fn reconstruct_density(samples: &[LevelShiftSample], gamma_hom: f64) -> Result<CouplingDensity> {
    let n = samples.len();
    if n < 3 {
        return Err(Error::invalid(format!("reconstruction needs >= 3 samples, got {n}")));
    }
    if samples.windows(2).any(|w| !(w[1].omega > w[0].omega)) {
        return Err(Error::invalid("level-shift samples must be sorted by frequency"));
    }
    let pi = std::f64::consts::PI;
    let mut omega = Vec::with_capacity(n);
    let mut rho = Vec::with_capacity(n);
    let mut err = Vec::with_capacity(n);
    for k in 0..n {
        let (a, b) = if k == 0 { (0, 1) } else if k == n - 1 { (n - 2, n - 1) } else { (k - 1, k + 1) };
        let h = samples[b].omega - samples[a].omega;
        let slope = (samples[b].r_plus.re - samples[a].r_plus.re) / h;
        let slope_err = (samples[a].re_err.powi(2) + samples[b].re_err.powi(2)).sqrt() / h;
        let s = &samples[k];
        omega.push(s.omega);
        rho.push(-s.r_plus.im / pi + gamma_hom / (2.0 * pi) * slope);
        err.push(((s.im_err / pi).powi(2) + (gamma_hom / (2.0 * pi) * slope_err).powi(2)).sqrt());
    }
    CouplingDensity::tabulated(omega, rho, err)
}

/// Noiseless scans of an ensemble with the shape of `density` (centered at
/// omega_c) detuned from the cavity by each of `shifts`.
pub fn synthesize_scans(
    density: &CouplingDensity,
    params: &SystemParams,
    omega_c: f64,
    shifts: &[f64],
    probe: &[f64],
) -> Result<Vec<Scan>> {
    crate::spectrum::check_grid("probe", probe)?;
    let base = density.shifted(omega_c - density.center);
    // R for the shifted ensemble at w equals R for the centered one at w + shift
    let quantum = 1e-3;
    let key = |x: f64| ((x - omega_c) / quantum).round() as i64;
    let mut needed: BTreeMap<i64, f64> = BTreeMap::new();
    for &d in shifts {
        for &w in probe {
            needed.entry(key(w + d)).or_insert(w + d);
        }
    }
    let points: Vec<(i64, f64)> = needed.into_iter().collect();
    let values: Result<Vec<(i64, C64)>> =
        points.par_iter().map(|&(k, x)| Ok((k, level_shift(&base, x, params.gamma_hom)?))).collect();
    let table: BTreeMap<i64, C64> = values?.into_iter().collect();
    Ok(shifts
        .iter()
        .map(|&d| Scan {
            key: ScanKey::Shift(d),
            probe: probe.to_vec(),
            power: probe
                .iter()
                .map(|&w| transmission_value(table[&key(w + d)], w + d, omega_c + d, params.kappa))
                .collect(),
            variance: None,
        })
        .collect())
}
