//! Linearly implicit Rosenbrock 2(3) integrator (the Shampine-Reichelt
//! `ode23s` pair) for stiff autonomous systems, with steady-state detection.
//!
//! The method is L-stable: once transients have decayed the accepted step
//! grows geometrically and each step behaves like a damped Newton update
//! towards the fixed point.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("no steady state within t = {t:e} s after {steps} steps (max residual {residual:e})")]
    NotSteady { t: f64, steps: usize, residual: f64, state: Vec<f64> },
    #[error("step size underflow at t = {t:e}")]
    StepUnderflow { t: f64, state: Vec<f64> },
    #[error("singular iteration matrix at t = {t:e}")]
    Singular { t: f64 },
    #[error("non-finite derivative at t = {t:e}")]
    NonFinite { t: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct OdeConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step (s); chosen from the derivative scale when `None`.
    pub h0: Option<f64>,
    pub max_steps: usize,
    /// Finite-difference Jacobian steps are `1.5e-8 * max(|x_k|, jac_scale)`.
    pub jac_scale: f64,
}

impl Default for OdeConfig {
    fn default() -> Self {
        Self { rtol: 1e-8, atol: 1e-12, h0: None, max_steps: 200_000, jac_scale: 1.0 }
    }
}

/// Steady when |f_k| <= threshold * (|x_k| + floor) for every component.
#[derive(Debug, Clone, Copy)]
pub struct SteadyCriterion {
    /// Rate in 1/s.
    pub threshold: f64,
    pub floor: f64,
    pub t_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyOutcome {
    pub state: Vec<f64>,
    pub t: f64,
    pub steps: usize,
    pub residual: f64,
}

const D: f64 = 0.292_893_218_813_452_48; // 1 / (2 + sqrt 2)
const E32: f64 = 7.414_213_562_373_095; // 6 + sqrt 2

struct Stepper<'a, F> {
    f: &'a F,
    n: usize,
    jac_scale: f64,
    work: Vec<f64>,
}

impl<'a, F: Fn(&[f64], &mut [f64])> Stepper<'a, F> {
    fn eval(&mut self, x: &[f64]) -> DVector<f64> {
        self.work.iter_mut().for_each(|v| *v = 0.0);
        (self.f)(x, &mut self.work);
        DVector::from_column_slice(&self.work)
    }

    fn jacobian(&mut self, x: &[f64], fx: &DVector<f64>) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(self.n, self.n);
        let mut xp = x.to_vec();
        for k in 0..self.n {
            let delta = 1.5e-8 * x[k].abs().max(self.jac_scale);
            xp[k] = x[k] + delta;
            let fp = self.eval(&xp);
            xp[k] = x[k];
            let col = (fp - fx) / delta;
            jac.set_column(k, &col);
        }
        jac
    }
}

fn max_residual(x: &[f64], fx: &DVector<f64>, floor: f64) -> f64 {
    x.iter()
        .zip(fx.iter())
        .map(|(xi, fi)| fi.abs() / (xi.abs() + floor))
        .fold(0.0, f64::max)
}

enum Stop<'c> {
    Time(f64),
    Steady(&'c SteadyCriterion),
}

fn drive<F: Fn(&[f64], &mut [f64])>(
    f: &F,
    x0: &[f64],
    cfg: &OdeConfig,
    stop: Stop<'_>,
) -> Result<SteadyOutcome, OdeError> {
    let n = x0.len();
    let mut st = Stepper { f, n, jac_scale: cfg.jac_scale, work: vec![0.0; n] };
    let mut x = DVector::from_column_slice(x0);
    let mut t = 0.0;
    let mut f0 = st.eval(x.as_slice());
    let t_end = match stop {
        Stop::Time(t) => t,
        Stop::Steady(c) => c.t_max,
    };
    let mut h = cfg.h0.unwrap_or_else(|| {
        let scale = max_residual(x.as_slice(), &f0, cfg.atol.max(1e-300));
        if scale > 0.0 { (0.01 / scale).min(t_end) } else { t_end * 1e-6 }
    });
    let identity = DMatrix::<f64>::identity(n, n);
    let mut steps = 0;
    let mut residual = f64::INFINITY;
    loop {
        if f0.iter().any(|v| !v.is_finite()) {
            return Err(OdeError::NonFinite { t });
        }
        if let Stop::Steady(c) = stop {
            residual = max_residual(x.as_slice(), &f0, c.floor);
            if residual <= c.threshold {
                return Ok(SteadyOutcome { state: x.as_slice().to_vec(), t, steps, residual });
            }
        }
        if t >= t_end {
            return match stop {
                Stop::Time(_) => Ok(SteadyOutcome { state: x.as_slice().to_vec(), t, steps, residual }),
                Stop::Steady(_) => Err(OdeError::NotSteady { t, steps, residual, state: x.as_slice().to_vec() }),
            };
        }
        if steps >= cfg.max_steps {
            return Err(OdeError::NotSteady { t, steps, residual, state: x.as_slice().to_vec() });
        }
        let jac = st.jacobian(x.as_slice(), &f0);
        loop {
            h = h.min(t_end - t);
            if h <= 1e-14 * t.abs().max(1e-300) {
                return Err(OdeError::StepUnderflow { t, state: x.as_slice().to_vec() });
            }
            let w = &identity - &jac * (h * D);
            let lu = w.lu();
            let solve = |rhs: &DVector<f64>| lu.solve(rhs);
            let Some(k1) = solve(&f0) else {
                return Err(OdeError::Singular { t });
            };
            let x1 = &x + &k1 * (0.5 * h);
            let f1 = st.eval(x1.as_slice());
            let Some(mut k2) = solve(&(&f1 - &k1)) else {
                return Err(OdeError::Singular { t });
            };
            k2 += &k1;
            let xn = &x + &k2 * h;
            let f2 = st.eval(xn.as_slice());
            let rhs = &f2 - (&k2 - &f1) * E32 - (&k1 - &f0) * 2.0;
            let Some(k3) = solve(&rhs) else {
                return Err(OdeError::Singular { t });
            };
            let err = (&k1 - &k2 * 2.0 + &k3) * (h / 6.0);
            let mut enorm: f64 = 0.0;
            for i in 0..n {
                let sc = cfg.atol + cfg.rtol * x[i].abs().max(xn[i].abs());
                enorm = enorm.max(err[i].abs() / sc);
            }
            if !enorm.is_finite() {
                h *= 0.1;
                continue;
            }
            let factor = if enorm == 0.0 { 5.0 } else { (0.8 * enorm.powf(-1.0 / 3.0)).clamp(0.2, 5.0) };
            if enorm <= 1.0 {
                t += h;
                x = xn;
                f0 = f2;
                h *= factor;
                steps += 1;
                break;
            }
            h *= factor.min(0.9);
        }
    }
}

/// Integrates `dx/dt = f(x)` from `t = 0` until the steady criterion holds.
pub fn integrate_to_steady<F: Fn(&[f64], &mut [f64])>(
    f: F,
    x0: &[f64],
    cfg: &OdeConfig,
    criterion: &SteadyCriterion,
) -> Result<SteadyOutcome, OdeError> {
    drive(&f, x0, cfg, Stop::Steady(criterion))
}

/// Integrates `dx/dt = f(x)` over `[0, t_end]` and returns the final state.
pub fn integrate_to<F: Fn(&[f64], &mut [f64])>(
    f: F,
    x0: &[f64],
    t_end: f64,
    cfg: &OdeConfig,
) -> Result<Vec<f64>, OdeError> {
    drive(&f, x0, cfg, Stop::Time(t_end)).map(|o| o.state)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let cfg = OdeConfig { rtol: 1e-9, atol: 1e-14, ..Default::default() };
        let x = integrate_to(|x, dx| dx[0] = -2.0 * x[0], &[1.0], 1.5, &cfg).unwrap();
        assert!((x[0] - (-3.0f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn stiff_linear_steady_state() {
        // eigenvalues -1e7 and -1: steady state (1, 2)
        let f = |x: &[f64], dx: &mut [f64]| {
            dx[0] = -1e7 * (x[0] - 1.0);
            dx[1] = -(x[1] - 2.0 * x[0]);
        };
        let crit = SteadyCriterion { threshold: 1e-10, floor: 1e-12, t_max: 1e6 };
        let out = integrate_to_steady(f, &[0.0, 0.0], &OdeConfig::default(), &crit).unwrap();
        assert!((out.state[0] - 1.0).abs() < 1e-9);
        assert!((out.state[1] - 2.0).abs() < 1e-9);
        assert!(out.steps < 2000, "took {} steps", out.steps);
    }

    #[test]
    fn oscillator_never_settles() {
        let f = |x: &[f64], dx: &mut [f64]| {
            dx[0] = x[1];
            dx[1] = -x[0];
        };
        let crit = SteadyCriterion { threshold: 1e-10, floor: 1e-12, t_max: 20.0 };
        let r = integrate_to_steady(f, &[1.0, 0.0], &OdeConfig::default(), &crit);
        assert!(matches!(r, Err(OdeError::NotSteady { .. })));
    }
}
