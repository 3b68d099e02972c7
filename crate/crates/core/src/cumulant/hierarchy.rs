use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::{least_squares, FitConfig, FitProblem};
use crate::model::{SystemParams, ThermalBath};
use crate::ode::{self, OdeConfig, SteadyCriterion};
use crate::oscillator::coupling_from_splitting;
use crate::spectrum::{check_grid, doublet, TransmissionSpectrum};
use crate::thermal::{coupling_vs_t_threelevel, coupling_vs_t_twolevel, n_bar};
use crate::units::{mhz, to_mhz};

const I: C64 = C64::new(0.0, 1.0);

/// First and second moments for one representative spin `i` and one pair
/// `i != j`. Conjugate moments (⟨a†a†⟩, ⟨σz σ+⟩, ...) are implied.
///
/// * `s` = ⟨σ-⟩, `a_sp` = ⟨a σ+⟩, `a_sm` = ⟨a σ-⟩, `a_z` = ⟨a σz⟩
/// * `sp_sm` = ⟨σ+_i σ-_j⟩ (real by exchange symmetry), `sm_sm` = ⟨σ-_i σ-_j⟩,
///   `z_sm` = ⟨σz_i σ-_j⟩, `z_z` = ⟨σz_i σz_j⟩
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentState {
    pub a: C64,
    pub s: C64,
    pub z: f64,
    pub n: f64,
    pub aa: C64,
    pub a_sp: C64,
    pub a_sm: C64,
    pub a_z: C64,
    pub sp_sm: f64,
    pub sm_sm: C64,
    pub z_sm: C64,
    pub z_z: f64,
}

pub(crate) const DIM: usize = 20;

/// Absolute floor of the steady test, in scaled moment units.
const STEADY_FLOOR: f64 = 1e-4;

impl MomentState {
    /// Uncoupled thermal state: cavity occupation `nbar_c`, spins polarized
    /// to -1/(1 + 2 nbar_s), no coherences or correlations.
    pub fn thermal(nbar_c: f64, nbar_s: f64) -> Self {
        let z = -1.0 / (1.0 + 2.0 * nbar_s);
        let zero = C64::new(0.0, 0.0);
        Self {
            a: zero,
            s: zero,
            z,
            n: nbar_c,
            aa: zero,
            a_sp: zero,
            a_sm: zero,
            a_z: zero,
            sp_sm: 0.0,
            sm_sm: zero,
            z_sm: zero,
            z_z: z * z,
        }
    }

    /// Real vector with spin-proportional moments scaled by sqrt(N) or N so
    /// that all entries stay O(1) for macroscopic ensembles.
    pub(crate) fn to_scaled(&self, n_spins: f64) -> [f64; DIM] {
        let r = n_spins.sqrt();
        let s = self.s * r;
        let a_sp = self.a_sp * r;
        let a_sm = self.a_sm * r;
        let z_sm = self.z_sm * r;
        let sm_sm = self.sm_sm * n_spins;
        [
            self.a.re, self.a.im, s.re, s.im, self.z, self.n, self.aa.re, self.aa.im, a_sp.re, a_sp.im,
            a_sm.re, a_sm.im, self.a_z.re, self.a_z.im, self.sp_sm * n_spins, sm_sm.re, sm_sm.im, z_sm.re,
            z_sm.im, self.z_z,
        ]
    }

    pub(crate) fn from_scaled(x: &[f64], n_spins: f64) -> Self {
        let r = 1.0 / n_spins.sqrt();
        let c = |k: usize| C64::new(x[k], x[k + 1]);
        Self {
            a: c(0),
            s: c(2) * r,
            z: x[4],
            n: x[5],
            aa: c(6),
            a_sp: c(8) * r,
            a_sm: c(10) * r,
            a_z: c(12),
            sp_sm: x[14] / n_spins,
            sm_sm: c(15) / n_spins,
            z_sm: c(17) * r,
            z_z: x[19],
        }
    }

    fn pin(&mut self) {
        self.z = -1.0;
        self.a_z = -self.a;
        self.z_sm = -self.s;
        self.z_z = 1.0;
    }
}

/// Rates and detunings entering the hierarchy, all in rad/s.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Coefficients {
    pub kappa: f64,
    pub delta_c: f64,
    pub delta_s: f64,
    pub g: f64,
    pub n_spins: f64,
    pub eta: f64,
    pub gamma_h: f64,
    pub gamma_perp: f64,
    pub gamma_par: f64,
    pub nbar_c: f64,
}

impl Coefficients {
    pub fn new(params: &SystemParams, omega_s: f64, bath: ThermalBath, omega_p: f64) -> Self {
        let nbar_s = n_bar(bath, omega_s);
        Self {
            kappa: params.kappa,
            delta_c: params.omega_c - omega_p,
            delta_s: omega_s - omega_p,
            g: params.g,
            n_spins: params.n_spins,
            eta: params.eta,
            gamma_h: params.gamma_hom,
            gamma_perp: 0.5 * params.gamma_hom + params.gamma_hom * nbar_s + params.gamma_p,
            gamma_par: params.gamma_hom * (1.0 + 2.0 * nbar_s),
            nbar_c: n_bar(bath, params.omega_c),
        }
    }
}

/// Third-order moments appearing in the second-order equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ThirdOrder {
    /// ⟨a† a σz⟩
    pub ad_a_z: f64,
    /// ⟨a a σz⟩
    pub aa_z: C64,
    /// ⟨a a σ+⟩
    pub aa_sp: C64,
    /// ⟨a† a σ-⟩
    pub ad_a_sm: C64,
    /// ⟨a σ+_i σz_j⟩
    pub a_sp_z: C64,
    /// ⟨a σz_i σ-_j⟩
    pub a_z_sm: C64,
    /// ⟨a σ+_i σ-_j⟩
    pub a_sp_sm: C64,
    /// ⟨a† σ-_i σ-_j⟩
    pub ad_sm_sm: C64,
    /// ⟨a σz_i σz_j⟩
    pub a_z_z: C64,
}

impl ThirdOrder {
    /// ⟨XYZ⟩ ≈ ⟨XY⟩⟨Z⟩ + ⟨XZ⟩⟨Y⟩ + ⟨YZ⟩⟨X⟩ - 2⟨X⟩⟨Y⟩⟨Z⟩.
    pub fn closure(m: &MomentState) -> Self {
        let (a, s, z) = (m.a, m.s, C64::from(m.z));
        let ac = a.conj();
        let sc = s.conj();
        let a2 = a.norm_sqr();
        Self {
            ad_a_z: (m.n * m.z + 2.0 * (m.a_z.conj() * a).re - 2.0 * a2 * m.z),
            aa_z: m.aa * z + 2.0 * a * m.a_z - 2.0 * a * a * z,
            aa_sp: m.aa * sc + 2.0 * a * m.a_sp - 2.0 * a * a * sc,
            ad_a_sm: m.n * s + m.a_sp.conj() * a + m.a_sm * ac - 2.0 * a2 * s,
            a_sp_z: m.a_sp * z + m.a_z * sc + m.z_sm.conj() * a - 2.0 * a * sc * z,
            a_z_sm: m.a_z * s + m.a_sm * z + m.z_sm * a - 2.0 * a * z * s,
            a_sp_sm: m.a_sp * s + m.a_sm * sc + m.sp_sm * a - 2.0 * a * s.norm_sqr(),
            ad_sm_sm: 2.0 * m.a_sp.conj() * s + m.sm_sm * ac - 2.0 * ac * s * s,
            a_z_z: 2.0 * m.a_z * z + m.z_z * a - 2.0 * a * z * z,
        }
    }
}

/// Exact second-order equations of motion given the third-order moments.
pub(crate) fn raw_derivatives(m: &MomentState, t: &ThirdOrder, c: &Coefficients) -> MomentState {
    let g = c.g;
    let nn = c.n_spins;
    let eta = C64::from(c.eta);
    let kc = C64::new(c.kappa, c.delta_c);
    let sp = C64::new(c.gamma_perp, c.delta_s);
    let z = C64::from(m.z);
    let x = t.a_sp_z;

    let da = -kc * m.a - I * g * nn * m.s + eta;
    let ds = -sp * m.s + I * g * m.a_z;
    let dz = 4.0 * g * m.a_sp.im - c.gamma_par * m.z - c.gamma_h;
    let dn = -2.0 * c.kappa * (m.n - c.nbar_c) + 2.0 * c.eta * m.a.re - 2.0 * g * nn * m.a_sp.im;
    let daa = -2.0 * kc * m.aa + 2.0 * eta * m.a - 2.0 * I * g * nn * m.a_sm;
    let da_sp = -(C64::new(c.kappa + c.gamma_perp, c.delta_c - c.delta_s)) * m.a_sp + eta * m.s.conj()
        - I * g * ((nn - 1.0) * m.sp_sm + t.ad_a_z + 0.5 * (1.0 + m.z));
    let da_sm = -(C64::new(c.kappa + c.gamma_perp, c.delta_c + c.delta_s)) * m.a_sm + eta * m.s
        + I * g * (t.aa_z - (nn - 1.0) * m.sm_sm);
    let da_z = -C64::new(c.kappa + c.gamma_par, c.delta_c) * m.a_z - c.gamma_h * m.a + eta * z
        + I * g * (-2.0 * t.aa_sp - (nn - 1.0) * m.z_sm + 2.0 * t.ad_a_sm + m.s);
    let dsp_sm = -2.0 * c.gamma_perp * m.sp_sm - 2.0 * g * x.im;
    let dsm_sm = -2.0 * sp * m.sm_sm + 2.0 * I * g * t.a_z_sm;
    let dz_sm = -C64::new(c.gamma_par + c.gamma_perp, c.delta_s) * m.z_sm - c.gamma_h * m.s
        + I * g * (-2.0 * t.a_sp_sm + 2.0 * t.ad_sm_sm + t.a_z_z);
    let dz_z = -2.0 * c.gamma_par * m.z_z - 2.0 * c.gamma_h * m.z + 8.0 * g * x.im;
    MomentState {
        a: da,
        s: ds,
        z: dz,
        n: dn,
        aa: daa,
        a_sp: da_sp,
        a_sm: da_sm,
        a_z: da_z,
        sp_sm: dsp_sm,
        sm_sm: dsm_sm,
        z_sm: dz_sm,
        z_z: dz_z,
    }
}

/// Time derivatives of all moments under the second-order cumulant closure.
/// `omega_s` is the spin transition frequency, `omega_p` the probe.
pub fn moment_derivatives(
    state: &MomentState,
    params: &SystemParams,
    omega_s: f64,
    bath: ThermalBath,
    omega_p: f64,
) -> MomentState {
    let c = Coefficients::new(params, omega_s, bath, omega_p);
    raw_derivatives(state, &ThirdOrder::closure(state), &c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HierarchyConfig {
    /// Integration tolerances; they shape the transient only; the steady
    /// state accuracy is set by `steady_threshold`.
    pub rtol: f64,
    pub atol: f64,
    /// Steady when every scaled moment satisfies |dx/dt| <= threshold * (|x| + 1e-4).
    /// `None` picks 1e-10 times the slowest of κ and Γ⊥.
    pub steady_threshold: Option<f64>,
    /// Seconds; `None` picks 200 divided by the slowest relaxation rate.
    pub t_max: Option<f64>,
    /// Freeze ⟨σz⟩ at -1 (and the moments it factorizes into).
    pub pinned: bool,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        Self { rtol: 1e-5, atol: 1e-12, steady_threshold: None, t_max: None, pinned: false }
    }
}

impl HierarchyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0) || !(self.atol > 0.0) {
            return Err(Error::invalid("hierarchy tolerances must be > 0"));
        }
        if matches!(self.steady_threshold, Some(t) if !(t > 0.0)) || matches!(self.t_max, Some(t) if !(t > 0.0)) {
            return Err(Error::invalid("steady threshold and t_max must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyMoments {
    pub state: MomentState,
    pub time: f64,
    pub steps: usize,
    pub residual: f64,
    pub converged: bool,
}

fn rhs(c: &Coefficients, pinned: bool) -> impl Fn(&[f64], &mut [f64]) + '_ {
    move |x: &[f64], dx: &mut [f64]| {
        let mut m = MomentState::from_scaled(x, c.n_spins);
        if pinned {
            m.pin();
        }
        let d = raw_derivatives(&m, &ThirdOrder::closure(&m), c);
        let mut out = d.to_scaled(c.n_spins);
        if pinned {
            for k in [4, 12, 13, 17, 18, 19] {
                out[k] = 0.0;
            }
        }
        dx.copy_from_slice(&out);
    }
}

/// Integrates the hierarchy from `initial` until the steady criterion holds.
pub fn integrate_to_steady(
    config: &HierarchyConfig,
    params: &SystemParams,
    omega_s: f64,
    bath: ThermalBath,
    omega_p: f64,
    initial: &MomentState,
) -> Result<SteadyMoments> {
    config.validate()?;
    params.validate()?;
    let c = Coefficients::new(params, omega_s, bath, omega_p);
    let fast = [c.kappa, c.gamma_perp].into_iter().filter(|r| *r > 0.0).fold(f64::INFINITY, f64::min);
    if !fast.is_finite() {
        return Err(Error::invalid("hierarchy needs kappa > 0 or a non-zero spin decay"));
    }
    let slow = [c.kappa, c.gamma_perp, c.gamma_par].into_iter().filter(|r| *r > 0.0).fold(fast, f64::min);
    let criterion = SteadyCriterion {
        threshold: config.steady_threshold.unwrap_or(1e-10 * fast),
        floor: STEADY_FLOOR,
        t_max: config.t_max.unwrap_or(200.0 / slow),
    };
    let ode_cfg = OdeConfig { rtol: config.rtol, atol: config.atol, h0: Some(1e-3 / fast), max_steps: 100_000, jac_scale: 1.0 };
    let mut x0 = initial.to_scaled(c.n_spins);
    if config.pinned {
        let mut m = *initial;
        m.pin();
        x0 = m.to_scaled(c.n_spins);
    }
    let out = ode::integrate_to_steady(rhs(&c, config.pinned), &x0, &ode_cfg, &criterion)?;
    let mut state = MomentState::from_scaled(&out.state, c.n_spins);
    if config.pinned {
        state.pin();
    }
    Ok(SteadyMoments { state, time: out.t, steps: out.steps, residual: out.residual, converged: true })
}

/// Steady |⟨a⟩|² over a probe grid; failed points are NaN and listed in
/// `failures` with their error text.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSpectrum {
    pub spectrum: TransmissionSpectrum,
    pub failures: Vec<(usize, String)>,
}

pub fn probe_spectrum(
    config: &HierarchyConfig,
    params: &SystemParams,
    omega_s: f64,
    bath: ThermalBath,
    probe: &[f64],
) -> Result<ProbeSpectrum> {
    config.validate()?;
    params.validate()?;
    check_grid("probe", probe)?;
    let initial = MomentState::thermal(n_bar(bath, params.omega_c), n_bar(bath, omega_s));
    let results: Vec<std::result::Result<f64, String>> = probe
        .par_iter()
        .map(|&wp| {
            integrate_to_steady(config, params, omega_s, bath, wp, &initial)
                .map(|s| s.state.a.norm_sqr())
                .map_err(|e| e.to_string())
        })
        .collect();
    let mut values = Vec::with_capacity(probe.len());
    let mut failures = Vec::new();
    for (k, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => values.push(v),
            Err(e) => {
                values.push(f64::NAN);
                failures.push((k, e));
            }
        }
    }
    Ok(ProbeSpectrum { spectrum: TransmissionSpectrum::line(probe.to_vec(), values)?, failures })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RabiPoint {
    pub temperature: f64,
    /// Collective coupling recovered from the simulated doublet; `None`
    /// when the doublet is not resolved.
    pub omega_measured: Option<f64>,
    /// Effective spin coherence decay from the same fit.
    pub gamma_fit: Option<f64>,
    pub omega_twolevel: f64,
    pub omega_threelevel: f64,
}

/// |κ + iΔ + G²/(Γ + iΔ)|⁻² in MHz units.
fn resonant_shape(kappa: f64, big_g: f64, gamma: f64, delta: f64) -> f64 {
    let den = C64::new(kappa, delta) + big_g * big_g / C64::new(gamma, delta);
    1.0 / den.norm_sqr()
}

/// Collective coupling versus temperature on resonance (spins at omega_c).
///
/// Each simulated spectrum is fitted with the resonant two-oscillator
/// lineshape (G, Γ and a scale free; κ known). The starting G comes from
/// inverting the splitting formula with the located maxima; the reported
/// coupling is the fitted G.
pub fn rabi_vs_temperature(
    config: &HierarchyConfig,
    params: &SystemParams,
    temperatures: &[f64],
    probe: &[f64],
) -> Result<Vec<RabiPoint>> {
    let omega_s = params.omega_c;
    let mut out = Vec::with_capacity(temperatures.len());
    for &t in temperatures {
        let bath = ThermalBath::new(t)?;
        let spec = probe_spectrum(config, params, omega_s, bath, probe)?;
        if let Some((k, e)) = spec.failures.first() {
            return Err(Error::numerical(format!("T = {t} K, probe point {k}: {e}")));
        }
        let omega_twolevel = coupling_vs_t_twolevel(params, bath, omega_s);
        let omega_threelevel = coupling_vs_t_threelevel(params, bath, omega_s);
        let x = &spec.spectrum.probe;
        let y = &spec.spectrum.values;
        let Some(split) = doublet(x, y)?.splitting() else {
            out.push(RabiPoint { temperature: t, omega_measured: None, gamma_fit: None, omega_twolevel, omega_threelevel });
            continue;
        };
        let nbar_s = n_bar(bath, omega_s);
        let gamma_eff = params.gamma_hom * (1.0 + 2.0 * nbar_s) + 2.0 * params.gamma_p;
        let g0 = coupling_from_splitting(split, gamma_eff, params.kappa);
        let kappa = to_mhz(params.kappa);
        let ymax = y.iter().cloned().fold(0.0, f64::max);
        let delta: Vec<f64> = x.iter().map(|w| to_mhz(params.omega_c - w)).collect();
        let (gm0, gam0) = (to_mhz(g0), to_mhz(0.5 * gamma_eff).max(1e-6));
        let amp0 = ymax / delta.iter().map(|&d| resonant_shape(kappa, gm0, gam0, d)).fold(0.0, f64::max);
        let problem = FitProblem {
            residual: |p: &[f64], r: &mut [f64]| {
                for ((ri, &d), &yi) in r.iter_mut().zip(&delta).zip(y) {
                    *ri = p[2] * resonant_shape(kappa, p[0], p[1], d) - yi / ymax;
                }
            },
            n_residuals: delta.len(),
            initial: vec![gm0, gam0, amp0 / ymax],
            lower: vec![0.0, 1e-9, 0.0],
            upper: vec![f64::INFINITY, f64::INFINITY, f64::INFINITY],
            weights: None,
        };
        let fit = least_squares(&problem, &FitConfig::default())?;
        out.push(RabiPoint {
            temperature: t,
            omega_measured: Some(mhz(fit.params[0])),
            gamma_fit: Some(mhz(fit.params[1])),
            omega_twolevel,
            omega_threelevel,
        });
    }
    Ok(out)
}
