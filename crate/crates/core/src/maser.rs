//! Incoherently pumped ensemble in a cavity: closed moment equations for the
//! phase-invariant moments, the two-time drift for the emitted field, and
//! linewidth maps over pump rate and inhomogeneous dephasing.
//!
//! Frame rotating at omega_c, H = (Delta/2) sum sigma_z + g sum (a^dag sigma- + a sigma+).
//! Spins relax down at gamma_hom (nbar+1), up at gamma_hom nbar + w, and
//! dephase with gamma_p; the cavity field decays at kappa.
//!
//! With c = <a sigma+_i> = -i g B (K + i Delta)/(K^2 + Delta^2), K = kappa + Gamma,
//! and B = (1 + z)/2 + n z + (N - 1) s, eliminating n, c and s leaves a
//! quadratic for z = <sigma_z>.

use nalgebra::Matrix2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{SystemParams, ThermalBath};
use crate::ode::{self, OdeConfig};
use crate::quad::{integrate_real, QuadConfig};
use crate::thermal::n_bar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PumpedParams {
    pub system: SystemParams,
    /// Incoherent pump rate, rad/s.
    pub w: f64,
    /// Ensemble minus cavity frequency, rad/s.
    pub delta: f64,
    pub bath: ThermalBath,
}

impl PumpedParams {
    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        if !(self.system.kappa > 0.0) {
            return Err(Error::invalid("maser model needs kappa > 0"));
        }
        if !(self.w >= 0.0) || !self.w.is_finite() {
            return Err(Error::invalid(format!("pump rate must be >= 0, got {}", self.w)));
        }
        if !self.delta.is_finite() {
            return Err(Error::invalid("detuning must be finite"));
        }
        Ok(())
    }

    fn rates(&self) -> Rates {
        let p = &self.system;
        let nc = n_bar(self.bath, p.omega_c);
        let ns = n_bar(self.bath, p.omega_c + self.delta);
        let gamma = 0.5 * (self.w + p.gamma_hom) + p.gamma_hom * ns + p.gamma_p;
        Rates {
            nc,
            gamma,
            gamma_z: p.gamma_hom * (1.0 + 2.0 * ns) + self.w,
            pump_balance: self.w - p.gamma_hom,
            k: p.kappa + gamma,
        }
    }
}

struct Rates {
    nc: f64,
    /// Spin coherence decay.
    gamma: f64,
    /// Population relaxation of sigma_z.
    gamma_z: f64,
    /// Up minus down rate.
    pump_balance: f64,
    k: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaserSteadyState {
    pub sz: f64,
    pub photons: f64,
    /// <a sigma+_i>.
    pub cross: C64,
    /// <sigma+_i sigma-_j>, i != j.
    pub spinspin: f64,
}

/// Time derivatives of (z, n/N, Re c/sqrt N, Im c/sqrt N, s), the scaled
/// state used for integration. Written from the operator equations, not from
/// the closed-form solution, so that the two can check each other.
pub fn maser_derivatives(p: &PumpedParams, x: &[f64; 5]) -> [f64; 5] {
    let r = p.rates();
    let sp = &p.system;
    let n = sp.n_spins;
    let gs = sp.collective_coupling();
    let [z, nn, cr, ci, s] = *x;
    // B / N
    let b = 0.5 * (1.0 + z) / n + nn * z + (1.0 - 1.0 / n) * s;
    let c = C64::new(cr, ci);
    let dc = -C64::new(r.k, -p.delta) * c - C64::new(0.0, gs * b);
    [
        4.0 * gs * ci - r.gamma_z * z + r.pump_balance,
        -2.0 * gs * ci - 2.0 * sp.kappa * (nn - r.nc / n),
        dc.re,
        dc.im,
        -2.0 * gs * z * ci - 2.0 * r.gamma * s,
    ]
}

fn scaled(p: &PumpedParams, st: &MaserSteadyState) -> [f64; 5] {
    let n = p.system.n_spins;
    [st.sz, st.photons / n, st.cross.re / n.sqrt(), st.cross.im / n.sqrt(), st.spinspin]
}

fn unscaled(p: &PumpedParams, x: &[f64]) -> MaserSteadyState {
    let n = p.system.n_spins;
    MaserSteadyState {
        sz: x[0],
        photons: x[1] * n,
        cross: C64::new(x[2], x[3]) * n.sqrt(),
        spinspin: x[4],
    }
}

/// Residual of the moment equations at `st`, each component relative to the
/// largest single term of its equation.
pub fn steady_residual(p: &PumpedParams, st: &MaserSteadyState) -> f64 {
    let x = scaled(p, st);
    let d = maser_derivatives(p, &x);
    let r = p.rates();
    let sp = &p.system;
    let n = sp.n_spins;
    let gs = sp.collective_coupling();
    let [z, nn, cr, ci, s] = x;
    let b = [0.5 * (1.0 + z) / n, (nn * z).abs(), s.abs()].into_iter().fold(0.0, f64::max);
    let c = cr.hypot(ci);
    let scale = [
        [4.0 * gs * ci.abs(), r.gamma_z * z.abs(), r.pump_balance.abs()],
        [2.0 * gs * ci.abs(), 2.0 * sp.kappa * nn.abs(), 2.0 * sp.kappa * r.nc / n],
        [r.k.hypot(p.delta) * c, gs * b, 0.0],
        [r.k.hypot(p.delta) * c, gs * b, 0.0],
        [2.0 * gs * (z * ci).abs(), 2.0 * r.gamma * s.abs(), 0.0],
    ];
    d.iter()
        .zip(&scale)
        .map(|(di, t)| {
            let m = t.iter().fold(0.0, |a: f64, v| a.max(*v));
            if m == 0.0 { di.abs() } else { di.abs() / m }
        })
        .fold(0.0, f64::max)
}

/// Steady state from the analytic elimination; when both roots of the
/// quadratic are physical the one reached from the all-ground state by time
/// integration is returned.
pub fn maser_steady_state(p: &PumpedParams) -> Result<MaserSteadyState> {
    p.validate()?;
    let r = p.rates();
    let sp = &p.system;
    let n = sp.n_spins;
    let g2 = sp.g * sp.g;
    let g2n = sp.coupling_weight();
    let d = r.k / (r.k * r.k + p.delta * p.delta);
    // B = P / (1 - z A), P = (1 + z)/2 + z nc
    let a = g2n * d * (1.0 / sp.kappa + (1.0 - 1.0 / n) / r.gamma);
    let qa = a * r.gamma_z;
    let qb = -4.0 * g2 * d * (0.5 + r.nc) - r.gamma_z - a * r.pump_balance;
    let qc = r.pump_balance - 2.0 * g2 * d;
    let roots = solve_quadratic(qa, qb, qc);
    let build = |z: f64| -> MaserSteadyState {
        // B from whichever of the two relations loses fewer digits: above
        // threshold 1 - zA cancels, below it the inversion balance does.
        let gap = 1.0 - z * a;
        let drive = r.pump_balance - r.gamma_z * z;
        let from_gain = ((1.0 + z) * 0.5 + z * r.nc) / gap;
        let from_balance = drive / (4.0 * g2 * d);
        let b = if g2 > 0.0 && drive.abs() / r.pump_balance.abs().max(r.gamma_z * z.abs()) > gap.abs() {
            from_balance
        } else {
            from_gain
        };
        let c = C64::new(sp.g * b * p.delta, -sp.g * b * r.k) / (r.k * r.k + p.delta * p.delta);
        MaserSteadyState {
            sz: z,
            photons: r.nc + g2n * d * b / sp.kappa,
            cross: c,
            spinspin: g2 * z * d * b / r.gamma,
        }
    };
    let tol = 1e-12;
    let physical: Vec<MaserSteadyState> = roots
        .iter()
        .copied()
        .filter(|z| z.is_finite() && *z >= -1.0 - tol && *z <= 1.0 + tol && 1.0 - z * a > 0.0)
        .map(|z| build(z.clamp(-1.0, 1.0)))
        .filter(|st| st.photons >= -tol * (1.0 + r.nc))
        .collect();
    match physical.len() {
        0 => Err(Error::numerical(format!("no physical maser steady state (roots {roots:?})"))),
        1 => Ok(physical[0]),
        _ => {
            let reached = integrate_maser(p, None)?;
            let best = physical
                .into_iter()
                .min_by(|x, y| (x.sz - reached.sz).abs().total_cmp(&(y.sz - reached.sz).abs()))
                .expect("two candidates");
            Ok(best)
        }
    }
}

fn solve_quadratic(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 || (a * c).abs() < 1e-14 * b * b {
        // the quadratic term is negligible; keep the finite root accurately
        if b == 0.0 {
            return vec![];
        }
        let lin = -c / b;
        return if a == 0.0 { vec![lin] } else { vec![lin, -b / a - lin] };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return vec![];
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    vec![q / a, c / q]
}

/// Integrates the moment equations from `initial` (all spins down, thermal
/// cavity when `None`) in chunks of 10 slowest relaxation times until two
/// successive chunk ends agree to 1e-12.
///
/// Near threshold the transient from the ground state is a train of photon
/// spikes over many decades; a chunk that needs more than 2e5 steps is
/// reported as an error.
pub fn integrate_maser(p: &PumpedParams, initial: Option<MaserSteadyState>) -> Result<MaserSteadyState> {
    p.validate()?;
    let r = p.rates();
    let mut x = match initial {
        Some(st) => scaled(p, &st).to_vec(),
        None => vec![-1.0, r.nc / p.system.n_spins, 0.0, 0.0, 0.0],
    };
    let rates = [p.system.kappa, r.gamma, r.gamma_z];
    let slow = rates.into_iter().filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min);
    let fast = rates.into_iter().fold(0.0, f64::max);
    // the right-hand side is bilinear without squares, so unit-scale
    // finite-difference steps give the exact Jacobian
    let cfg = OdeConfig { rtol: 1e-6, atol: 1e-16, h0: Some(1e-3 / fast), max_steps: 200_000, jac_scale: 1.0 };
    let f = |x: &[f64], dx: &mut [f64]| {
        let d = maser_derivatives(p, &[x[0], x[1], x[2], x[3], x[4]]);
        dx.copy_from_slice(&d);
    };
    for _ in 0..300 {
        let next = ode::integrate_to(f, &x, 10.0 / slow, &cfg)?;
        let big = next.iter().fold(0.0, |a: f64, v| a.max(v.abs()));
        let change = next
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).abs() / (a.abs() + 1e-14 * big))
            .fold(0.0, f64::max);
        x = next;
        if change < 1e-12 {
            return Ok(unscaled(p, &x));
        }
    }
    Err(Error::numerical("moment equations did not settle within 3000 relaxation times"))
}

/// Eigenvalues of the Jacobian of the moment equations at `st`. With
/// g sqrt(N) > kappa > Gamma and strong pumping the fixed point loses
/// stability to self-pulsing (the bad-cavity second laser threshold), so the
/// closed-form state is then not what time integration reaches.
pub fn fixed_point_eigenvalues(p: &PumpedParams, st: &MaserSteadyState) -> Vec<C64> {
    let x = scaled(p, st);
    let f0 = maser_derivatives(p, &x);
    let mut jac = nalgebra::DMatrix::<f64>::zeros(5, 5);
    for k in 0..5 {
        // bilinear right-hand side: the difference quotient is exact up to rounding
        let h = 1e-6 * x[k].abs().max(1e-9);
        let mut xp = x;
        xp[k] += h;
        let f = maser_derivatives(p, &xp);
        for i in 0..5 {
            jac[(i, k)] = (f[i] - f0[i]) / h;
        }
    }
    jac.complex_eigenvalues().iter().copied().collect()
}

pub fn fixed_point_is_stable(p: &PumpedParams, st: &MaserSteadyState) -> bool {
    fixed_point_eigenvalues(p, st).iter().all(|l| l.re < 0.0)
}

/// Drift of (<a^dag(tau) a>, <sigma+_i(tau) a>) under the quantum regression
/// theorem, with the second component scaled by sqrt(N) so that both
/// off-diagonal entries carry g sqrt(N).
pub fn two_time_drift(p: &PumpedParams, steady: &MaserSteadyState) -> Matrix2<C64> {
    let r = p.rates();
    let gs = p.system.collective_coupling();
    Matrix2::new(
        C64::new(-p.system.kappa, 0.0),
        C64::new(0.0, gs),
        C64::new(0.0, -gs * steady.sz),
        -C64::new(r.gamma, -p.delta),
    )
}

/// Eigenvalues of a 2x2 matrix; the smaller one is taken from the
/// determinant to avoid cancellation when the two scales differ by many
/// orders of magnitude.
fn eigenvalues(m: &Matrix2<C64>) -> [C64; 2] {
    let tr = m[(0, 0)] + m[(1, 1)];
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let root = (tr * tr - 4.0 * det).sqrt();
    let big = if (tr + root).norm() >= (tr - root).norm() { 0.5 * (tr + root) } else { 0.5 * (tr - root) };
    let small = if big.norm() > 0.0 { det / big } else { C64::new(0.0, 0.0) };
    [big, small]
}

/// Emission spectrum S(omega) = 2 Re[((s - M)^-1 v0)_1] at s = -i omega, as a
/// sum of pole terms, omega in the frame rotating at omega_c. A mode
/// e^{i w0 tau} of <a^dag(tau) a> peaks at omega = -w0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmissionSpectrum {
    pub eigenvalues: [C64; 2],
    pub residues: [C64; 2],
    pub steady: MaserSteadyState,
    /// Peak position, rad/s in the rotating frame.
    pub peak: f64,
    /// Full width at half maximum, rad/s.
    pub fwhm: f64,
    /// `fwhm` as ordinary frequency, Hz.
    pub linewidth_hz: f64,
}

impl EmissionSpectrum {
    pub fn eval(&self, omega: f64) -> f64 {
        self.eigenvalues
            .iter()
            .zip(&self.residues)
            .map(|(l, r)| 2.0 * (r / (C64::new(0.0, -omega) - l)).re)
            .sum()
    }

    /// Samples on `points` frequencies spanning +-`widths` FWHM around the peak.
    pub fn sample(&self, widths: f64, points: usize) -> (Vec<f64>, Vec<f64>) {
        let span = widths * self.fwhm;
        let x: Vec<f64> =
            (0..points).map(|k| self.peak - span + 2.0 * span * k as f64 / (points - 1).max(1) as f64).collect();
        let y = x.iter().map(|&w| self.eval(w)).collect();
        (x, y)
    }

    /// Numerical integral of S over the real line, through w = peak + h tan t.
    pub fn integral(&self) -> Result<f64> {
        let h = 0.5 * self.fwhm;
        let pi2 = std::f64::consts::FRAC_PI_2;
        let mut breaks = vec![0.0];
        for l in &self.eigenvalues {
            for off in [-l.re.abs(), l.re.abs()] {
                breaks.push(((-l.im - self.peak + off) / h).atan());
            }
            breaks.push(((-l.im - self.peak) / h).atan());
        }
        let f = |t: f64| {
            let c = t.cos();
            self.eval(self.peak + h * t.tan()) * h / (c * c)
        };
        let cfg = QuadConfig { epsabs: 0.0, epsrel: 1e-10, max_subdivisions: 5000 };
        Ok(integrate_real(f, -pi2, pi2, &breaks, &cfg)?.0)
    }
}

pub fn emission_spectrum(p: &PumpedParams) -> Result<EmissionSpectrum> {
    let steady = maser_steady_state(p)?;
    emission_spectrum_at(p, &steady)
}

pub fn emission_spectrum_at(p: &PumpedParams, steady: &MaserSteadyState) -> Result<EmissionSpectrum> {
    let m = two_time_drift(p, steady);
    let lam = eigenvalues(&m);
    for l in &lam {
        if !(l.re < 0.0) {
            return Err(Error::numerical(format!("two-time drift is not stable: eigenvalue {l}")));
        }
    }
    if (lam[0] - lam[1]).norm() <= 1e-12 * lam[0].norm() {
        return Err(Error::numerical("degenerate two-time drift eigenvalues"));
    }
    let v0 = [C64::new(steady.photons, 0.0), steady.cross * p.system.n_spins.sqrt()];
    // v(tau) = sum_k e^{lambda_k tau} (M - lambda_j)/(lambda_k - lambda_j) v0
    let residue = |k: usize, j: usize| {
        ((m[(0, 0)] - lam[j]) * v0[0] + m[(0, 1)] * v0[1]) / (lam[k] - lam[j])
    };
    let residues = [residue(0, 1), residue(1, 0)];
    let mut spec = EmissionSpectrum { eigenvalues: lam, residues, steady: *steady, peak: 0.0, fwhm: 0.0, linewidth_hz: 0.0 };

    // the peak sits near the least damped pole
    let k = if lam[0].re > lam[1].re { 0 } else { 1 };
    let (center, width) = (-lam[k].im, lam[k].re.abs());
    let peak = golden_max(|w| spec.eval(w), center - 3.0 * width, center + 3.0 * width);
    let top = spec.eval(peak);
    if !(top > 0.0) {
        return Err(Error::numerical("emission spectrum has no positive peak"));
    }
    let half = 0.5 * top;
    let edge = |dir: f64| -> Result<f64> {
        let mut step = width.max(1e-300);
        let mut far = peak + dir * step;
        let mut n = 0;
        while spec.eval(far) > half {
            step *= 2.0;
            far = peak + dir * step;
            n += 1;
            if n > 200 {
                return Err(Error::numerical("emission spectrum never falls to half maximum"));
            }
        }
        let (mut inside, mut outside) = (peak, far);
        for _ in 0..200 {
            let mid = 0.5 * (inside + outside);
            if mid == inside || mid == outside {
                break;
            }
            if spec.eval(mid) > half {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        Ok(0.5 * (inside + outside))
    };
    let (lo, hi) = (edge(-1.0)?, edge(1.0)?);
    spec.peak = peak;
    spec.fwhm = hi - lo;
    spec.linewidth_hz = spec.fwhm / (2.0 * std::f64::consts::PI);
    Ok(spec)
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
        if (b - a).abs() <= 1e-15 * (a.abs() + b.abs()) {
            break;
        }
    }
    0.5 * (a + b)
}

/// Photon number and linewidth over a (w, gamma_p) grid; rows follow
/// `gamma_p`, columns follow `w`. Failed points are NaN with a reason.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatingMap {
    pub w: Vec<f64>,
    pub gamma_p: Vec<f64>,
    pub photons: Vec<f64>,
    pub linewidth_hz: Vec<f64>,
    /// Whether the moment equations relax to the mapped state; reported,
    /// not masked.
    pub fixed_point_stable: Vec<bool>,
    pub failures: Vec<(usize, usize, String)>,
}

impl OperatingMap {
    pub fn at(&self, i_gamma: usize, j_w: usize) -> (f64, f64) {
        let k = i_gamma * self.w.len() + j_w;
        (self.photons[k], self.linewidth_hz[k])
    }
}

pub fn operating_map(base: &PumpedParams, w_grid: &[f64], gamma_p_grid: &[f64]) -> Result<OperatingMap> {
    base.validate()?;
    if w_grid.is_empty() || gamma_p_grid.is_empty() {
        return Err(Error::invalid("operating map needs non-empty grids"));
    }
    let cells: Vec<(usize, usize)> =
        (0..gamma_p_grid.len()).flat_map(|i| (0..w_grid.len()).map(move |j| (i, j))).collect();
    let results: Vec<std::result::Result<(f64, f64, bool), String>> = cells
        .par_iter()
        .map(|&(i, j)| {
            let mut p = *base;
            p.w = w_grid[j];
            p.system.gamma_p = gamma_p_grid[i];
            let spec = emission_spectrum(&p).map_err(|e| e.to_string())?;
            Ok((spec.steady.photons, spec.linewidth_hz, fixed_point_is_stable(&p, &spec.steady)))
        })
        .collect();
    let mut out = OperatingMap {
        w: w_grid.to_vec(),
        gamma_p: gamma_p_grid.to_vec(),
        photons: Vec::with_capacity(cells.len()),
        linewidth_hz: Vec::with_capacity(cells.len()),
        fixed_point_stable: Vec::with_capacity(cells.len()),
        failures: Vec::new(),
    };
    for (&(i, j), r) in cells.iter().zip(results) {
        match r {
            Ok((n, lw, stable)) => {
                out.photons.push(n);
                out.linewidth_hz.push(lw);
                out.fixed_point_stable.push(stable);
            }
            Err(e) => {
                out.photons.push(f64::NAN);
                out.linewidth_hz.push(f64::NAN);
                out.fixed_point_stable.push(false);
                out.failures.push((i, j, e));
            }
        }
    }
    Ok(out)
}
