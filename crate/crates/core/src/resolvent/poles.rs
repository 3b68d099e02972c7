use num_complex::Complex64 as C64;
use serde::Serialize;

use super::density::CouplingDensity;
use super::shift::level_shift_complex;
use crate::error::{Error, Result};
use crate::model::SystemParams;

/// Complex poles of the cavity Green's function, sorted by real part.
/// Each pole sits at Re z with half width |Im z|.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoleSet {
    pub poles: Vec<C64>,
}

impl PoleSet {
    pub fn positions(&self) -> Vec<f64> {
        self.poles.iter().map(|z| z.re).collect()
    }

    pub fn half_widths(&self) -> Vec<f64> {
        self.poles.iter().map(|z| -z.im).collect()
    }
}

/// Frequency scale used for tolerances and finite differences.
fn scale(density: &CouplingDensity, params: &SystemParams) -> f64 {
    let w = density.fwhm().unwrap_or(0.0);
    [density.weight.sqrt(), w, params.kappa, params.gamma_hom].into_iter().fold(0.0, f64::max).max(1.0)
}

/// Damped Newton iteration on F(z) = z - w_c + i kappa - R(z) from one guess.
fn newton(density: &CouplingDensity, params: &SystemParams, omega_c: f64, guess: C64, s: f64) -> Result<C64> {
    let f = |z: C64| -> Result<C64> {
        Ok(z - omega_c + C64::new(0.0, params.kappa) - level_shift_complex(density, z, params.gamma_hom)?)
    };
    let h = 1e-6 * s;
    let mut z = guess;
    let mut fz = f(z)?;
    for _ in 0..100 {
        if fz.norm() <= 1e-11 * s {
            return Ok(z);
        }
        let df = (f(z + h)? - f(z - h)?) / (2.0 * h);
        if df.norm() == 0.0 || !df.re.is_finite() {
            break;
        }
        let step = fz / df;
        let mut t = 1.0;
        loop {
            let cand = z - step * t;
            match f(cand) {
                Ok(fc) if fc.norm() < fz.norm() => {
                    z = cand;
                    fz = fc;
                    break;
                }
                _ if t < 1e-6 => return Err(Error::numerical(format!("pole search stalled at {z}"))),
                _ => t *= 0.5,
            }
        }
        if (step * t).norm() <= 1e-14 * s {
            return Ok(z);
        }
    }
    if fz.norm() <= 1e-8 * s {
        Ok(z)
    } else {
        Err(Error::numerical(format!("pole search did not converge near {z}")))
    }
}

/// Roots of z - w_c + i kappa - R(z) = 0 on the continued sheet, one attempt
/// per guess, duplicates merged.
pub fn find_poles(
    density: &CouplingDensity,
    params: &SystemParams,
    omega_c: f64,
    initial_guesses: &[C64],
) -> Result<PoleSet> {
    density.validate()?;
    if initial_guesses.is_empty() {
        return Err(Error::invalid("pole search needs at least one initial guess"));
    }
    let s = scale(density, params);
    let mut poles: Vec<C64> = Vec::new();
    for &g in initial_guesses {
        if let Ok(z) = newton(density, params, omega_c, g, s) {
            if !poles.iter().any(|p| (p - z).norm() < 1e-7 * s) {
                poles.push(z);
            }
        }
    }
    if poles.is_empty() {
        let tried: Vec<String> = initial_guesses.iter().map(|g| format!("{g}")).collect();
        return Err(Error::numerical(format!("no pole found from guesses [{}]", tried.join(", "))));
    }
    poles.sort_by(|a, b| a.re.total_cmp(&b.re));
    Ok(PoleSet { poles })
}

/// Guesses at the two normal modes of a resonant ensemble.
pub fn doublet_guesses(density: &CouplingDensity, params: &SystemParams, omega_c: f64) -> Vec<C64> {
    let split = density.weight.sqrt();
    let damping = 0.5 * (params.kappa + 0.5 * density.fwhm().unwrap_or(0.0) + 0.5 * params.gamma_hom);
    let mid = 0.5 * (omega_c + density.center);
    vec![C64::new(mid - split, -damping), C64::new(mid + split, -damping)]
}
