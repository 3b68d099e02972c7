use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Relative height at which parametric densities are cut off for quadrature.
pub const TRUNCATION: f64 = 1e-8;

/// Below this |q - 1| the q-Gaussian is evaluated as a Gaussian.
pub(crate) const Q_GAUSS_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DensityKind {
    /// Tsallis profile [1 + (q-1)(w-w0)^2/a]^(-1/(q-1)); `a` in rad^2/s^2.
    QGaussian { q: f64, a: f64 },
    Gaussian { fwhm: f64 },
    /// A zero width is the delta density of identical spins.
    Lorentzian { fwhm: f64 },
    /// Linear interpolation between samples, zero outside.
    Tabulated { omega: Vec<f64>, rho: Vec<f64>, err: Vec<f64> },
}

/// Coupling-weighted spin frequency distribution, normalised to
/// `weight` = g^2 N. For tabulated data `center` and `weight` are derived from
/// the samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingDensity {
    pub kind: DensityKind,
    pub center: f64,
    pub weight: f64,
}

/// Parametric families, for sweeps over the width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Family {
    QGaussian(f64),
    Gaussian,
    Lorentzian,
}

impl CouplingDensity {
    pub fn q_gaussian(q: f64, fwhm: f64, center: f64, weight: f64) -> Result<Self> {
        let a = super::qgauss::a_from(q, fwhm)?;
        let d = Self { kind: DensityKind::QGaussian { q, a }, center, weight };
        d.validate()?;
        Ok(d)
    }

    pub fn gaussian(fwhm: f64, center: f64, weight: f64) -> Result<Self> {
        let d = Self { kind: DensityKind::Gaussian { fwhm }, center, weight };
        d.validate()?;
        Ok(d)
    }

    pub fn lorentzian(fwhm: f64, center: f64, weight: f64) -> Result<Self> {
        let d = Self { kind: DensityKind::Lorentzian { fwhm }, center, weight };
        d.validate()?;
        Ok(d)
    }

    /// Member of `family` with the given FWHM; zero width gives the delta density.
    pub fn of_family(family: Family, fwhm: f64, center: f64, weight: f64) -> Result<Self> {
        if fwhm == 0.0 {
            return Self::lorentzian(0.0, center, weight);
        }
        match family {
            Family::QGaussian(q) => Self::q_gaussian(q, fwhm, center, weight),
            Family::Gaussian => Self::gaussian(fwhm, center, weight),
            Family::Lorentzian => Self::lorentzian(fwhm, center, weight),
        }
    }

    /// Tabulated density; `err` may be empty. Center is the sample maximum
    /// and weight the trapezoid integral.
    pub fn tabulated(omega: Vec<f64>, rho: Vec<f64>, err: Vec<f64>) -> Result<Self> {
        let err = if err.is_empty() { vec![0.0; rho.len()] } else { err };
        if omega.len() < 2 || rho.len() != omega.len() || err.len() != omega.len() {
            return Err(Error::invalid("tabulated density needs >= 2 samples with matching lengths"));
        }
        let (mut center, mut top) = (omega[0], f64::NEG_INFINITY);
        for (&w, &r) in omega.iter().zip(&rho) {
            if r > top {
                top = r;
                center = w;
            }
        }
        let weight = trapezoid(&omega, &rho);
        let d = Self { kind: DensityKind::Tabulated { omega, rho, err }, center, weight };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.center.is_finite() {
            return Err(Error::invalid("density center must be finite"));
        }
        match &self.kind {
            DensityKind::QGaussian { q, a } => {
                if !(*q > 1.0 && *q < 3.0) {
                    return Err(Error::invalid(format!("q must lie in (1, 3), got {q}")));
                }
                if !(*a > 0.0) || !a.is_finite() {
                    return Err(Error::invalid(format!("q-Gaussian a must be > 0, got {a}")));
                }
            }
            DensityKind::Gaussian { fwhm } => {
                if !(*fwhm > 0.0) || !fwhm.is_finite() {
                    return Err(Error::invalid(format!("Gaussian FWHM must be > 0, got {fwhm}")));
                }
            }
            DensityKind::Lorentzian { fwhm } => {
                if !(*fwhm >= 0.0) || !fwhm.is_finite() {
                    return Err(Error::invalid(format!("Lorentzian FWHM must be >= 0, got {fwhm}")));
                }
            }
            DensityKind::Tabulated { omega, rho, err } => {
                if omega.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::invalid("tabulated frequencies must be strictly increasing"));
                }
                for (k, (&r, &e)) in rho.iter().zip(err).enumerate() {
                    if !r.is_finite() || !(e >= 0.0) {
                        return Err(Error::invalid(format!("tabulated sample {k} is not finite")));
                    }
                    // negative values are tolerated within three error bars
                    if r < -3.0 * e - 1e-12 * self.weight.abs() {
                        return Err(Error::invalid(format!("tabulated density negative at sample {k}: {r}")));
                    }
                }
                return Ok(());
            }
        }
        if !(self.weight >= 0.0) || !self.weight.is_finite() {
            return Err(Error::invalid(format!("density weight must be >= 0, got {}", self.weight)));
        }
        Ok(())
    }

    /// Same density moved by `delta`.
    pub fn shifted(&self, delta: f64) -> Self {
        let mut d = self.clone();
        d.center += delta;
        if let DensityKind::Tabulated { omega, .. } = &mut d.kind {
            omega.iter_mut().for_each(|w| *w += delta);
        }
        d
    }

    /// Same shape with a different total weight.
    pub fn with_weight(&self, weight: f64) -> Self {
        let mut d = self.clone();
        if let DensityKind::Tabulated { rho, err, .. } = &mut d.kind {
            let s = if self.weight != 0.0 { weight / self.weight } else { 0.0 };
            rho.iter_mut().for_each(|r| *r *= s);
            err.iter_mut().for_each(|e| *e *= s);
        }
        d.weight = weight;
        d
    }

    /// Full width at half maximum of the parametric kinds.
    pub fn fwhm(&self) -> Option<f64> {
        match &self.kind {
            DensityKind::QGaussian { q, a } => super::qgauss::fwhm_q(*q, *a).ok(),
            DensityKind::Gaussian { fwhm } | DensityKind::Lorentzian { fwhm } => Some(*fwhm),
            DensityKind::Tabulated { .. } => None,
        }
    }

    pub fn is_delta(&self) -> bool {
        matches!(self.kind, DensityKind::Lorentzian { fwhm } if fwhm == 0.0)
    }

    /// Integration interval; parametric tails are cut where the profile falls
    /// below `TRUNCATION` of its peak. The Lorentzian never needs quadrature.
    pub fn support(&self) -> (f64, f64) {
        let half = match &self.kind {
            DensityKind::QGaussian { q, a } => {
                if q - 1.0 < Q_GAUSS_LIMIT {
                    (a * -TRUNCATION.ln()).sqrt()
                } else {
                    (a / (q - 1.0) * (TRUNCATION.powf(1.0 - q) - 1.0)).sqrt()
                }
            }
            DensityKind::Gaussian { fwhm } => (gaussian_a(*fwhm) * -TRUNCATION.ln()).sqrt(),
            DensityKind::Lorentzian { fwhm } => 0.5 * fwhm / TRUNCATION.sqrt(),
            DensityKind::Tabulated { omega, .. } => return (omega[0], omega[omega.len() - 1]),
        };
        (self.center - half, self.center + half)
    }

    /// rho(omega) in rad/s (weight per unit angular frequency).
    pub fn eval(&self, omega: f64) -> f64 {
        match &self.kind {
            DensityKind::Tabulated { omega: xs, rho, .. } => interpolate(xs, rho, omega),
            DensityKind::Lorentzian { fwhm } if *fwhm == 0.0 => 0.0,
            _ => {
                let (lo, hi) = self.support();
                if omega < lo || omega > hi {
                    0.0
                } else {
                    self.eval_complex(C64::new(omega, 0.0)).map_or(0.0, |z| z.re)
                }
            }
        }
    }

    /// Analytic continuation of the untruncated profile; `None` for
    /// tabulated data and for the delta density.
    pub fn eval_complex(&self, z: C64) -> Option<C64> {
        let x = z - self.center;
        match &self.kind {
            DensityKind::QGaussian { q, a } => {
                if q - 1.0 < Q_GAUSS_LIMIT {
                    let norm = self.weight / (std::f64::consts::PI * a).sqrt();
                    return Some(norm * (-x * x / *a).exp());
                }
                let base = C64::new(1.0, 0.0) + (q - 1.0) * x * x / *a;
                Some(self.weight / q_norm(*q, *a) * (-base.ln() / (q - 1.0)).exp())
            }
            DensityKind::Gaussian { fwhm } => {
                let a = gaussian_a(*fwhm);
                Some(self.weight / (std::f64::consts::PI * a).sqrt() * (-x * x / a).exp())
            }
            DensityKind::Lorentzian { fwhm } if *fwhm > 0.0 => {
                let h = 0.5 * fwhm;
                Some(self.weight * h / std::f64::consts::PI / (x * x + h * h))
            }
            _ => None,
        }
    }

    /// Weight actually carried by the density: the parameter for parametric
    /// kinds, the trapezoid integral for tabulated ones.
    pub fn total_weight(&self) -> f64 {
        match &self.kind {
            DensityKind::Tabulated { omega, rho, .. } => trapezoid(omega, rho),
            _ => self.weight,
        }
    }
}

/// a for exp(-x^2/a) with the given FWHM.
fn gaussian_a(fwhm: f64) -> f64 {
    0.25 * fwhm * fwhm / std::f64::consts::LN_2
}

/// Integral of the unnormalised q-Gaussian over the real line (1 < q < 3).
fn q_norm(q: f64, a: f64) -> f64 {
    let m = 1.0 / (q - 1.0);
    (a * std::f64::consts::PI / (q - 1.0)).sqrt() * (ln_gamma(m - 0.5) - ln_gamma(m)).exp()
}

pub(crate) fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x < xs[0] || x > xs[xs.len() - 1] {
        return 0.0;
    }
    let k = xs.partition_point(|&v| v <= x).clamp(1, xs.len() - 1);
    let t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
    ys[k - 1] + t * (ys[k] - ys[k - 1])
}

pub(crate) fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2).zip(ys.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}
