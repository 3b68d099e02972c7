//! Bounded Levenberg-Marquardt least squares and the Lorentzian line model.
//!
//! Damping starts at zero, so well-conditioned problems take plain
//! Gauss-Newton steps; it is raised on rejected steps and whenever a step is
//! clipped by the parameter box. Jacobians are forward differences.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("no convergence after {iterations} iterations (residual norm {residual_norm:e})")]
    MaxIterations { iterations: usize, params: Vec<f64>, residual_norm: f64 },
    #[error("normal equations singular, damping exhausted at {params:?}")]
    Singular { params: Vec<f64> },
    #[error("residual function returned non-finite values at {params:?}")]
    NonFinite { params: Vec<f64> },
    #[error("degenerate fit: {0}")]
    Degenerate(String),
    #[error("bad fit input: {0}")]
    BadInput(String),
}

/// A bounded least-squares problem.
///
/// `residual(p, r)` fills `r` (length `n_residuals`). When `weights` are
/// given, each residual is multiplied by the square root of its weight, so
/// weights act as inverse variances.
pub struct FitProblem<F> {
    pub residual: F,
    pub n_residuals: usize,
    pub initial: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub weights: Option<Vec<f64>>,
}

impl<F: Fn(&[f64], &mut [f64])> FitProblem<F> {
    pub fn unbounded(residual: F, n_residuals: usize, initial: Vec<f64>) -> Self {
        let n = initial.len();
        Self {
            residual,
            n_residuals,
            initial,
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
            weights: None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FitConfig {
    pub max_iterations: usize,
    /// Relative step tolerance.
    pub xtol: f64,
    /// Relative reduction of the objective.
    pub ftol: f64,
    /// Largest cosine between the residual and any Jacobian column.
    pub gtol: f64,
    /// Relative forward-difference step.
    pub fd_step: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { max_iterations: 200, xtol: 1e-12, ftol: 1e-15, gtol: 1e-12, fd_step: 1.5e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    StepSize,
    Objective,
    Gradient,
    ExactFit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: Vec<f64>,
    /// `(J^T J)^-1 s^2` with `s^2` the residual variance; `None` when singular.
    pub covariance: Option<DMatrix<f64>>,
    /// Euclidean norm of the (weighted) residual vector.
    pub residual_norm: f64,
    pub iterations: usize,
    pub termination: Termination,
}

impl FitResult {
    pub fn std_errors(&self) -> Vec<f64> {
        match &self.covariance {
            Some(c) => (0..c.nrows()).map(|i| c[(i, i)].max(0.0).sqrt()).collect(),
            None => vec![f64::NAN; self.params.len()],
        }
    }
}

struct Evaluator<'a, F> {
    f: &'a F,
    sqrt_w: Option<Vec<f64>>,
    m: usize,
}

impl<F: Fn(&[f64], &mut [f64])> Evaluator<'_, F> {
    fn eval(&self, p: &[f64]) -> Result<DVector<f64>, FitError> {
        let mut r = vec![0.0; self.m];
        (self.f)(p, &mut r);
        if let Some(w) = &self.sqrt_w {
            r.iter_mut().zip(w).for_each(|(ri, wi)| *ri *= wi);
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(FitError::NonFinite { params: p.to_vec() });
        }
        Ok(DVector::from_vec(r))
    }
}

fn project(p: &mut [f64], lower: &[f64], upper: &[f64]) -> bool {
    let mut clipped = false;
    for i in 0..p.len() {
        if p[i] < lower[i] {
            p[i] = lower[i];
            clipped = true;
        } else if p[i] > upper[i] {
            p[i] = upper[i];
            clipped = true;
        }
    }
    clipped
}

/// Minimizes `0.5 |r(p)|^2` within the box `[lower, upper]`.
pub fn least_squares<F: Fn(&[f64], &mut [f64])>(
    problem: &FitProblem<F>,
    config: &FitConfig,
) -> Result<FitResult, FitError> {
    let n = problem.initial.len();
    let m = problem.n_residuals;
    if problem.lower.len() != n || problem.upper.len() != n {
        return Err(FitError::BadInput("bounds length differs from parameter count".into()));
    }
    if m < n {
        return Err(FitError::BadInput(format!("{m} residuals for {n} parameters")));
    }
    if (0..n).any(|i| !(problem.lower[i] <= problem.initial[i] && problem.initial[i] <= problem.upper[i])) {
        return Err(FitError::BadInput("initial guess outside bounds".into()));
    }
    let sqrt_w = match &problem.weights {
        Some(w) if w.len() != m => {
            return Err(FitError::BadInput("weight count differs from residual count".into()))
        }
        Some(w) if w.iter().any(|v| !(*v >= 0.0)) => {
            return Err(FitError::BadInput("weights must be non-negative".into()))
        }
        Some(w) => Some(w.iter().map(|v| v.sqrt()).collect()),
        None => None,
    };
    let ev = Evaluator { f: &problem.residual, sqrt_w, m };
    let (lower, upper) = (&problem.lower, &problem.upper);
    let typical: Vec<f64> =
        problem.initial.iter().map(|v| if *v != 0.0 { v.abs() } else { 1.0 }).collect();

    let mut x = problem.initial.clone();
    let mut r = ev.eval(&x)?;
    let mut cost = 0.5 * r.norm_squared();
    let mut lambda = 0.0f64;
    let mut iterations = 0;

    let jacobian = |x: &[f64], r: &DVector<f64>| -> Result<DMatrix<f64>, FitError> {
        let mut jac = DMatrix::zeros(m, n);
        let mut xp = x.to_vec();
        for j in 0..n {
            let mut h = config.fd_step * x[j].abs().max(typical[j]);
            if x[j] + h > upper[j] {
                h = -h;
            }
            xp[j] = x[j] + h;
            let rp = ev.eval(&xp)?;
            xp[j] = x[j];
            jac.set_column(j, &((rp - r) / h));
        }
        Ok(jac)
    };

    let termination = 'outer: loop {
        if cost == 0.0 {
            break Termination::ExactFit;
        }
        let jac = jacobian(&x, &r)?;
        let a = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        let rnorm = r.norm();
        let max_cos = (0..n)
            .filter(|&j| a[(j, j)] > 0.0)
            .map(|j| g[j].abs() / (a[(j, j)].sqrt() * rnorm))
            .fold(0.0, f64::max);
        if max_cos <= config.gtol {
            break Termination::Gradient;
        }
        if iterations >= config.max_iterations {
            return Err(FitError::MaxIterations { iterations, params: x, residual_norm: rnorm });
        }
        let diag: Vec<f64> = (0..n)
            .map(|j| a[(j, j)].max(1e-12 * a.diagonal().max()).max(f64::MIN_POSITIVE))
            .collect();
        loop {
            let mut lhs = a.clone();
            for j in 0..n {
                lhs[(j, j)] += lambda * diag[j];
            }
            let step = match lhs.clone().cholesky() {
                Some(ch) => Some(ch.solve(&(-&g))),
                None => lhs.lu().solve(&(-&g)),
            };
            let step = match step {
                Some(s) if s.iter().all(|v| v.is_finite()) => s,
                _ => {
                    lambda = if lambda == 0.0 { 1e-3 } else { lambda * 10.0 };
                    if lambda > 1e20 {
                        return Err(FitError::Singular { params: x });
                    }
                    continue;
                }
            };
            let mut xn: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let clipped = project(&mut xn, lower, upper);
            let rn = match ev.eval(&xn) {
                Ok(rn) => rn,
                Err(_) => {
                    lambda = if lambda == 0.0 { 1e-3 } else { lambda * 10.0 };
                    if lambda > 1e20 {
                        return Err(FitError::NonFinite { params: xn });
                    }
                    continue;
                }
            };
            let cost_new = 0.5 * rn.norm_squared();
            let actual: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            let dx = actual.iter().map(|v| v * v).sum::<f64>().sqrt();
            let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if cost_new <= cost {
                let reduction = cost - cost_new;
                iterations += 1;
                x = xn;
                r = rn;
                cost = cost_new;
                if clipped {
                    lambda = (lambda * 10.0).max(1e-3);
                } else {
                    lambda /= 3.0;
                    if lambda < 1e-12 {
                        lambda = 0.0;
                    }
                }
                if dx <= config.xtol * (xnorm + config.xtol) {
                    break 'outer Termination::StepSize;
                }
                if reduction <= config.ftol * cost {
                    break 'outer Termination::Objective;
                }
                break;
            }
            if dx <= config.xtol * (xnorm + config.xtol) {
                // no descent possible at resolution of the parameters
                break 'outer Termination::StepSize;
            }
            lambda = if lambda == 0.0 { 1e-3 } else { lambda * 10.0 };
            if lambda > 1e20 {
                return Err(FitError::Singular { params: x });
            }
        }
    };

    let covariance = if m > n {
        let jac = jacobian(&x, &r)?;
        let s2 = 2.0 * cost / (m - n) as f64;
        (jac.transpose() * &jac).try_inverse().map(|c| c * s2)
    } else {
        None
    };
    Ok(FitResult { params: x, covariance, residual_norm: r.norm(), iterations, termination })
}

/// `offset + amplitude / (1 + ((x - center) / hwhm)^2)`
pub fn lorentzian(x: f64, center: f64, hwhm: f64, amplitude: f64, offset: f64) -> f64 {
    let u = (x - center) / hwhm;
    offset + amplitude / (1.0 + u * u)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LorentzianFit {
    pub center: f64,
    pub hwhm: f64,
    pub amplitude: f64,
    pub offset: f64,
    /// Parameter order: center, hwhm, amplitude, offset.
    pub covariance: Option<DMatrix<f64>>,
    pub residual_norm: f64,
    pub iterations: usize,
}

impl LorentzianFit {
    pub fn std_errors(&self) -> [f64; 4] {
        let mut out = [f64::NAN; 4];
        if let Some(c) = &self.covariance {
            for (i, o) in out.iter_mut().enumerate() {
                *o = c[(i, i)].max(0.0).sqrt();
            }
        }
        out
    }
}

/// Half-power crossing positions either side of `peak`, by linear
/// interpolation; `None` where the data never fall below `level`.
fn half_crossings(x: &[f64], y: &[f64], peak: usize, level: f64) -> (Option<f64>, Option<f64>) {
    let interp = |i: usize, j: usize| x[i] + (level - y[i]) * (x[j] - x[i]) / (y[j] - y[i]);
    let left = (1..=peak).rev().find(|&i| y[i - 1] < level).map(|i| interp(i - 1, i));
    let right = (peak..x.len() - 1).find(|&i| y[i + 1] < level).map(|i| interp(i, i + 1));
    (left, right)
}

/// Fits a single Lorentzian line plus constant offset.
///
/// Works in internally rescaled coordinates; the covariance is mapped back to
/// the caller's units. A centre outside the data range or a width pinned at
/// its bound is reported as [`FitError::Degenerate`].
pub fn fit_lorentzian(x: &[f64], y: &[f64], weights: Option<&[f64]>) -> Result<LorentzianFit, FitError> {
    let m = x.len();
    if m < 5 || y.len() != m {
        return Err(FitError::BadInput(format!("need >= 5 matching samples, got {m}")));
    }
    if x.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(FitError::BadInput("abscissae must be strictly increasing".into()));
    }
    let (xmin, xmax) = (x[0], x[m - 1]);
    let x0 = 0.5 * (xmin + xmax);
    let xs = 0.5 * (xmax - xmin);
    let ys = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if ys == 0.0 || !ys.is_finite() {
        return Err(FitError::Degenerate("all-zero or non-finite data".into()));
    }
    let u: Vec<f64> = x.iter().map(|v| (v - x0) / xs).collect();
    let v: Vec<f64> = y.iter().map(|w| w / ys).collect();

    let peak = (0..m).fold(0, |b, i| if v[i] > v[b] { i } else { b });
    let base = v[0].min(v[m - 1]).min(v.iter().cloned().fold(f64::INFINITY, f64::min).max(0.0));
    let amp = (v[peak] - base).max(1e-12);
    let (l, r) = half_crossings(&u, &v, peak, base + 0.5 * amp);
    let du = 2.0 / (m - 1) as f64;
    let width = match (l, r) {
        (Some(a), Some(b)) => 0.5 * (b - a),
        (Some(a), None) => u[peak] - a,
        (None, Some(b)) => b - u[peak],
        (None, None) => 0.5,
    }
    .clamp(0.25 * du, 5.0);

    let width_lo = 1e-3 * du;
    let width_hi = 20.0;
    let scaled_w: Option<Vec<f64>> = weights.map(|w| w.iter().map(|wi| wi * ys * ys).collect());
    let problem = FitProblem {
        residual: |p: &[f64], res: &mut [f64]| {
            for i in 0..m {
                res[i] = lorentzian(u[i], p[0], p[1], p[2], p[3]) - v[i];
            }
        },
        n_residuals: m,
        initial: vec![u[peak], width, amp, base],
        lower: vec![-3.0, width_lo, f64::NEG_INFINITY, f64::NEG_INFINITY],
        upper: vec![3.0, width_hi, f64::INFINITY, f64::INFINITY],
        weights: scaled_w,
    };
    let fit = least_squares(&problem, &FitConfig::default())?;
    let p = &fit.params;
    if p[1] <= width_lo * 1.0001 || p[1] >= width_hi * 0.9999 {
        return Err(FitError::Degenerate(format!("width pinned at bound ({:e})", p[1] * xs)));
    }
    if p[0] < -1.0 || p[0] > 1.0 {
        return Err(FitError::Degenerate(format!("centre {:e} outside data range", x0 + p[0] * xs)));
    }
    let scale = [xs, xs, ys, ys];
    let covariance = fit.covariance.map(|c| {
        DMatrix::from_fn(4, 4, |i, j| c[(i, j)] * scale[i] * scale[j])
    });
    Ok(LorentzianFit {
        center: x0 + p[0] * xs,
        hwhm: p[1] * xs,
        amplitude: p[2] * ys,
        offset: p[3] * ys,
        covariance,
        residual_norm: fit.residual_norm * ys,
        iterations: fit.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn linear_model_single_step() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 2.0).collect();
        let prob = FitProblem::unbounded(
            |p: &[f64], r: &mut [f64]| {
                for i in 0..10 {
                    r[i] = p[0] * xs[i] + p[1] - ys[i];
                }
            },
            10,
            vec![0.0, 0.0],
        );
        let cfg = FitConfig { max_iterations: 1, ..Default::default() };
        let params = match least_squares(&prob, &cfg) {
            Ok(fit) => fit.params,
            Err(FitError::MaxIterations { params, .. }) => params,
            Err(e) => panic!("{e}"),
        };
        assert!((params[0] - 3.0).abs() < 1e-6);
        assert!((params[1] + 2.0).abs() < 1e-6);
    }

    #[test]
    fn rosenbrock_valley() {
        let prob = FitProblem::unbounded(
            |p: &[f64], r: &mut [f64]| {
                r[0] = 10.0 * (p[1] - p[0] * p[0]);
                r[1] = 1.0 - p[0];
            },
            2,
            vec![-1.2, 1.0],
        );
        let fit = least_squares(&prob, &FitConfig::default()).unwrap();
        assert!(fit.iterations <= 200);
        assert!((fit.params[0] - 1.0).abs() < 1e-6 && (fit.params[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn bounds_respected() {
        // unconstrained optimum p = -1 lies outside [0, 5]
        let prob = FitProblem {
            residual: |p: &[f64], r: &mut [f64]| {
                r[0] = p[0] + 1.0;
                r[1] = 0.5 * (p[0] + 1.0);
            },
            n_residuals: 2,
            initial: vec![3.0],
            lower: vec![0.0],
            upper: vec![5.0],
            weights: None,
        };
        let fit = least_squares(&prob, &FitConfig::default()).unwrap();
        assert_eq!(fit.params[0], 0.0);
    }

    #[test]
    fn non_finite_residual_reported() {
        let prob = FitProblem::unbounded(|_: &[f64], r: &mut [f64]| r[0] = f64::NAN, 1, vec![1.0]);
        assert!(matches!(least_squares(&prob, &FitConfig::default()), Err(FitError::NonFinite { .. })));
    }

    #[test]
    fn iteration_budget_reported() {
        let prob = FitProblem::unbounded(
            |p: &[f64], r: &mut [f64]| {
                r[0] = 10.0 * (p[1] - p[0] * p[0]);
                r[1] = 1.0 - p[0];
            },
            2,
            vec![-1.2, 1.0],
        );
        let cfg = FitConfig { max_iterations: 2, ..Default::default() };
        match least_squares(&prob, &cfg) {
            Err(FitError::MaxIterations { params, .. }) => assert_eq!(params.len(), 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    fn grid(c: f64, w: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| c - 5.0 * w + 10.0 * w * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn exact_lorentzian() {
        let (c, w, a, b) = (2.87e9, 3.1e6, 4.0e-3, 1.0e-4);
        let x = grid(c + 0.7 * w, w, 60);
        let y: Vec<f64> = x.iter().map(|&xi| lorentzian(xi, c, w, a, b)).collect();
        let f = fit_lorentzian(&x, &y, None).unwrap();
        assert!(((f.center - c) / w).abs() < 1e-8);
        assert!(((f.hwhm - w) / w).abs() < 1e-8);
        assert!(((f.amplitude - a) / a).abs() < 1e-8);
        assert!(((f.offset - b) / a).abs() < 1e-8);
    }

    #[test]
    fn noisy_lorentzian_centre() {
        let (c, w, a) = (10.0, 0.5, 2.0);
        let x = grid(c, w, 50);
        let noise = Normal::new(0.0, 0.02).unwrap();
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y: Vec<f64> =
                x.iter().map(|&xi| lorentzian(xi, c, w, a, 0.0) * (1.0 + noise.sample(&mut rng))).collect();
            let f = fit_lorentzian(&x, &y, None).unwrap();
            assert!((f.center - c).abs() < 0.02 * w, "seed {seed}: {}", f.center);
        }
    }

    #[test]
    fn monotone_data_flagged() {
        let x: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.0 + 0.1 * v).collect();
        assert!(fit_lorentzian(&x, &y, None).is_err());
    }

    #[test]
    fn scale_equivariance() {
        let x = grid(0.0, 1.0, 41);
        let y: Vec<f64> = x.iter().map(|&v| lorentzian(v, 0.3, 1.0, 1.0, 0.1) + 0.01 * (7.0 * v).sin()).collect();
        let f1 = fit_lorentzian(&x, &y, None).unwrap();
        let y2: Vec<f64> = y.iter().map(|v| 37.5 * v).collect();
        let f2 = fit_lorentzian(&x, &y2, None).unwrap();
        assert!((f1.center - f2.center).abs() < 1e-9);
        assert!((f1.hwhm - f2.hwhm).abs() < 1e-9);
        assert!((37.5 * f1.amplitude - f2.amplitude).abs() < 1e-8 * f2.amplitude);
        assert!((37.5 * f1.offset - f2.offset).abs() < 1e-8 * f2.amplitude);
    }
}
