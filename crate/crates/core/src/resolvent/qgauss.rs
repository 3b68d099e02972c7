use serde::Serialize;

use super::density::{CouplingDensity, DensityKind, Q_GAUSS_LIMIT};
use crate::error::{Error, Result};
use crate::fitting::{least_squares, FitConfig, FitProblem};
use crate::units::{mhz, to_mhz};

fn check_q(q: f64) -> Result<()> {
    if q > 1.0 && q < 3.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("q must lie in (1, 3), got {q}")))
    }
}

/// b + I [1 - (1-q)(w-w0)^2/a]^(1/(1-q)), with the Gaussian limit for q -> 1.
pub fn qgauss_eval(q: f64, a: f64, omega0: f64, amplitude: f64, offset: f64, omega: f64) -> Result<f64> {
    check_q(q)?;
    Ok(offset + amplitude * qgauss_shape(q, a, omega - omega0))
}

fn qgauss_shape(q: f64, a: f64, x: f64) -> f64 {
    if q - 1.0 < Q_GAUSS_LIMIT {
        (-x * x / a).exp()
    } else {
        (1.0 + (q - 1.0) * x * x / a).max(0.0).powf(-1.0 / (q - 1.0))
    }
}

/// (2^q - 2)/(2q - 2), tending to ln 2 at q = 1.
fn width_factor(q: f64) -> f64 {
    if q - 1.0 < Q_GAUSS_LIMIT {
        std::f64::consts::LN_2
    } else {
        (2f64.powf(q) - 2.0) / (2.0 * q - 2.0)
    }
}

/// Full width at half maximum of the q-Gaussian.
pub fn fwhm_q(q: f64, a: f64) -> Result<f64> {
    check_q(q)?;
    Ok(2.0 * (a * width_factor(q)).sqrt())
}

/// Inverse of [`fwhm_q`]: the `a` giving FWHM `gamma_q`.
pub fn a_from(q: f64, gamma_q: f64) -> Result<f64> {
    check_q(q)?;
    if !(gamma_q > 0.0) {
        return Err(Error::invalid(format!("q-Gaussian width must be > 0, got {gamma_q}")));
    }
    Ok(0.25 * gamma_q * gamma_q / width_factor(q))
}

/// Fitted q-Gaussian, frequencies in rad/s, amplitude and offset in the
/// units of the fitted density.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QGaussFit {
    pub q: f64,
    pub a: f64,
    pub center: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub gamma_q: f64,
    /// One-sigma errors of (q, a, center, amplitude, offset, gamma_q).
    pub std_errors: Option<[f64; 6]>,
    /// Chi (norm of error-weighted residuals) when the samples carry errors,
    /// otherwise the residual norm in density units.
    pub residual_norm: f64,
    pub iterations: usize,
}

/// Bounded least-squares q-Gaussian fit to a tabulated density, weighted by
/// the sample errors when all of them are positive.
pub fn fit_qgaussian(density: &CouplingDensity) -> Result<QGaussFit> {
    let DensityKind::Tabulated { omega, rho, err } = &density.kind else {
        return Err(Error::invalid("q-Gaussian fit needs a tabulated density"));
    };
    if omega.len() < 6 {
        return Err(Error::invalid(format!("q-Gaussian fit needs >= 6 samples, got {}", omega.len())));
    }
    // work in MHz with the data scaled to unit peak
    let x: Vec<f64> = omega.iter().map(|&w| to_mhz(w)).collect();
    let scale = rho.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    if !(scale > 0.0) {
        return Err(Error::invalid("q-Gaussian fit on an all-zero density"));
    }
    let y: Vec<f64> = rho.iter().map(|r| r / scale).collect();
    let weighted = err.iter().all(|&e| e > 0.0);
    let weights = if weighted {
        Some(err.iter().map(|e| (scale / e).powi(2)).collect::<Vec<f64>>())
    } else {
        None
    };

    let (k_max, &y_max) = y.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty");
    let y_min = y.iter().copied().fold(f64::INFINITY, f64::min);
    let half = 0.5 * (y_max + y_min);
    let left = (0..k_max).rev().find(|&k| y[k] < half).map_or(x[0], |k| x[k]);
    let right = (k_max..y.len()).find(|&k| y[k] < half).map_or(x[x.len() - 1], |k| x[k]);
    let width = (right - left).max(2.0 * (x[1] - x[0]).abs());

    let residual = |p: &[f64], r: &mut [f64]| {
        for ((ri, &xi), &yi) in r.iter_mut().zip(&x).zip(&y) {
            *ri = p[4] + p[3] * qgauss_shape(p[0], p[1], xi - p[2]) - yi;
        }
    };
    let q_hi = 3.0 - 1e-6;
    let mut best: Option<crate::fitting::FitResult> = None;
    for q0 in [1.2, 1.5, 2.0] {
        let a0 = 0.25 * width * width / width_factor(q0);
        let problem = FitProblem {
            residual: &residual,
            n_residuals: x.len(),
            initial: vec![q0, a0, x[k_max], y_max - y_min, y_min],
            lower: vec![1.0 + 2.0 * Q_GAUSS_LIMIT, 1e-12, f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY],
            upper: vec![q_hi, f64::INFINITY, f64::INFINITY, f64::INFINITY, f64::INFINITY],
            weights: weights.clone(),
        };
        let cfg = FitConfig { max_iterations: 500, ..FitConfig::default() };
        match least_squares(&problem, &cfg) {
            Ok(fit) => {
                if best.as_ref().is_none_or(|b| fit.residual_norm < b.residual_norm) {
                    best = Some(fit);
                }
            }
            Err(e) if best.is_none() && q0 == 2.0 => return Err(e.into()),
            Err(_) => {}
        }
    }
    let fit = best.expect("at least one start converged");
    let p = &fit.params;
    let gamma_q = fwhm_q(p[0], p[1])?;
    let std_errors = fit.covariance.as_ref().map(|c| {
        let s: Vec<f64> = (0..5).map(|k| c[(k, k)].max(0.0).sqrt()).collect();
        // gradient of the FWHM with respect to (q, a) by central differences
        let hq = 1e-6 * p[0];
        let dq = (fwhm_q((p[0] + hq).min(q_hi), p[1]).unwrap_or(gamma_q)
            - fwhm_q((p[0] - hq).max(1.0 + Q_GAUSS_LIMIT), p[1]).unwrap_or(gamma_q))
            / (2.0 * hq);
        let da = gamma_q / (2.0 * p[1]);
        let var = dq * dq * c[(0, 0)] + 2.0 * dq * da * c[(0, 1)] + da * da * c[(1, 1)];
        [s[0], mhz(mhz(s[1])), mhz(s[2]), s[3] * scale, s[4] * scale, mhz(var.max(0.0).sqrt())]
    });
    Ok(QGaussFit {
        q: p[0],
        a: mhz(mhz(p[1])),
        center: mhz(p[2]),
        amplitude: p[3] * scale,
        offset: p[4] * scale,
        gamma_q: mhz(gamma_q),
        std_errors,
        residual_norm: if weighted { fit.residual_norm } else { fit.residual_norm * scale },
        iterations: fit.iterations,
    })
}
