use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use super::density::{CouplingDensity, DensityKind};
use crate::error::{Error, Result};
use crate::model::SystemParams;
use crate::quad::{integrate, QuadConfig};
use crate::spectrum::{check_grid, TransmissionSpectrum};

/// R+ at one probe frequency, with one-sigma errors when it was measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelShiftSample {
    pub omega: f64,
    pub r_plus: C64,
    pub re_err: f64,
    pub im_err: f64,
}

/// Absolute tolerance tied to the natural size of R, W over the width, so
/// that values near a zero of Re R do not demand impossible relative accuracy.
fn quad_config(density: &CouplingDensity) -> QuadConfig {
    let (lo, hi) = density.support();
    let width = density.fwhm().unwrap_or((hi - lo) / 10.0).max(f64::MIN_POSITIVE);
    QuadConfig { epsabs: 1e-12 * density.weight / width, epsrel: 1e-11, max_subdivisions: 4000 }
}

/// log(w) with the argument taken in (-pi/2, 3pi/2], so that crossing the
/// real axis below the support continues onto the second sheet.
fn log_continued(w: C64) -> C64 {
    let mut arg = w.arg();
    if arg <= -std::f64::consts::FRAC_PI_2 {
        arg += 2.0 * std::f64::consts::PI;
    }
    C64::new(w.norm().ln(), arg)
}

/// Integral of rho(w')/(zeta - w') over the support, continued analytically
/// from the upper half plane (the physical sheet) into the lower one.
///
/// The singular part rho(zeta) log((zeta - A)/(zeta - B)) is integrated in
/// closed form and only the smooth remainder goes to quadrature.
fn resolvent_integral(density: &CouplingDensity, zeta: C64) -> Result<C64> {
    let (lo, hi) = density.support();
    let analytic = density.eval_complex(zeta);
    if analytic.is_none() && zeta.im < 0.0 {
        return Err(Error::invalid("tabulated densities have no continuation below the real axis"));
    }
    let inside = zeta.re > lo && zeta.re < hi;
    let c = match analytic {
        Some(c) => c,
        None if inside => C64::new(density.eval(zeta.re), 0.0),
        None => C64::new(0.0, 0.0),
    };
    let integrand = |w: f64| (density.eval(w) - c) / (zeta - w);
    let mut breaks = vec![density.center];
    if inside {
        breaks.push(zeta.re);
    }
    if let DensityKind::Tabulated { omega, .. } = &density.kind {
        breaks.extend_from_slice(omega);
    }
    let body = integrate(integrand, lo, hi, &breaks, &quad_config(density))?.value;
    let edge = log_continued(zeta - lo) - log_continued(zeta - hi);
    Ok(body + c * edge)
}

/// R_cc(z) = integral of rho(w)/(z - w + i gamma_hom/2); for z below the
/// branch cut this is the continuation through the cut, which is where the
/// poles of the cavity Green's function live.
pub fn level_shift_complex(density: &CouplingDensity, z: C64, gamma_hom: f64) -> Result<C64> {
    density.validate()?;
    if !(gamma_hom >= 0.0) {
        return Err(Error::invalid("gamma_hom must be >= 0"));
    }
    let zeta = z + C64::new(0.0, 0.5 * gamma_hom);
    if density.weight == 0.0 {
        return Ok(C64::new(0.0, 0.0));
    }
    match &density.kind {
        DensityKind::Lorentzian { fwhm } => Ok(density.weight / (zeta - density.center + C64::new(0.0, 0.5 * fwhm))),
        _ => resolvent_integral(density, zeta),
    }
}

/// R+ at real omega, i.e. the limit from above onto omega - i gamma_hom/2.
/// Im R+ <= 0 for any non-negative density.
pub fn level_shift(density: &CouplingDensity, omega: f64, gamma_hom: f64) -> Result<C64> {
    level_shift_complex(density, C64::new(omega, 0.0), gamma_hom)
}

/// Same as [`level_shift`] but never uses the Lorentzian closed form;
/// used to check the quadrature path.
pub fn level_shift_by_quadrature(density: &CouplingDensity, omega: f64, gamma_hom: f64) -> Result<C64> {
    density.validate()?;
    resolvent_integral(density, C64::new(omega, 0.5 * gamma_hom))
}

/// |G+(w)|^2 = 1/((w - w_c - Re R+)^2 + (kappa + |Im R+|)^2).
pub fn transmission_value(r_plus: C64, omega: f64, omega_c: f64, kappa: f64) -> f64 {
    let re = omega - omega_c - r_plus.re;
    let im = kappa + r_plus.im.abs();
    1.0 / (re * re + im * im)
}

/// Cavity transmission for an arbitrary coupling density. Uses `kappa` and
/// `gamma_hom` from `params`; `g` and `N` enter only through the density.
pub fn transmission_gcc(
    density: &CouplingDensity,
    params: &SystemParams,
    omega_grid: &[f64],
    omega_c: f64,
) -> Result<TransmissionSpectrum> {
    check_grid("probe", omega_grid)?;
    density.validate()?;
    let values: Result<Vec<f64>> = omega_grid
        .par_iter()
        .map(|&w| Ok(transmission_value(level_shift(density, w, params.gamma_hom)?, w, omega_c, params.kappa)))
        .collect();
    TransmissionSpectrum::line(omega_grid.to_vec(), values?)
}

/// R+ on a grid, tabulated for reuse.
pub fn level_shift_table(density: &CouplingDensity, omega_grid: &[f64], gamma_hom: f64) -> Result<Vec<C64>> {
    omega_grid.par_iter().map(|&w| level_shift(density, w, gamma_hom)).collect()
}

