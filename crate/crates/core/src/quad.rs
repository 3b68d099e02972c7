//! Globally adaptive Gauss-Kronrod (7/15) quadrature for complex integrands.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("quadrature did not converge: estimate {value} with error {error:e} after {subdivisions} subdivisions")]
    NotConverged {
        value: Complex64,
        error: f64,
        subdivisions: usize,
    },
    #[error("integrand returned a non-finite value at x = {0}")]
    NonFinite(f64),
    #[error("invalid interval [{0}, {1}]")]
    BadInterval(f64, f64),
}

#[derive(Debug, Clone, Copy)]
pub struct QuadConfig {
    pub epsabs: f64,
    pub epsrel: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self { epsabs: 0.0, epsrel: 1e-10, max_subdivisions: 2000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: Complex64,
    pub error: f64,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> Result<Segment, QuadError> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let eval = |x: f64| {
        let v = f(x);
        if v.re.is_finite() && v.im.is_finite() {
            Ok(v)
        } else {
            Err(QuadError::NonFinite(x))
        }
    };
    let fc = eval(center)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = eval(center - dx)? + eval(center + dx)?;
        kronrod += s * WGK[j];
        if j % 2 == 1 {
            gauss += s * WG[j / 2];
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).norm();
    Ok(Segment { a, b, value, error })
}

/// Integrates `f` over `[a, b]`, splitting first at every breakpoint that lies
/// strictly inside the interval. Gauss-Kronrod nodes never touch segment
/// endpoints, so integrands with a removable singularity at a breakpoint are
/// safe to pass.
pub fn integrate<F: Fn(f64) -> Complex64>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    config: &QuadConfig,
) -> Result<QuadResult, QuadError> {
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(QuadError::BadInterval(a, b));
    }
    if a == b {
        return Ok(QuadResult { value: Complex64::new(0.0, 0.0), error: 0.0 });
    }
    let mut cuts: Vec<f64> = breakpoints.iter().copied().filter(|&x| x > a && x < b).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(a);
    edges.extend(cuts);
    edges.push(b);

    let mut segments = Vec::new();
    for w in edges.windows(2) {
        segments.push(gk15(&f, w[0], w[1])?);
    }
    let mut subdivisions = 0;
    loop {
        let value: Complex64 = segments.iter().map(|s| s.value).sum();
        let error: f64 = segments.iter().map(|s| s.error).sum();
        let tol = config.epsabs.max(config.epsrel * value.norm());
        if error <= tol {
            return Ok(QuadResult { value, error });
        }
        if subdivisions >= config.max_subdivisions {
            return Err(QuadError::NotConverged { value, error, subdivisions });
        }
        let (idx, _) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("at least one segment");
        let worst = segments.swap_remove(idx);
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval cannot be split further in floating point
            return Err(QuadError::NotConverged { value, error, subdivisions });
        }
        segments.push(gk15(&f, worst.a, mid)?);
        segments.push(gk15(&f, mid, worst.b)?);
        subdivisions += 1;
    }
}

/// Convenience wrapper for real integrands.
pub fn integrate_real<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    config: &QuadConfig,
) -> Result<(f64, f64), QuadError> {
    let r = integrate(|x| Complex64::new(f(x), 0.0), a, b, breakpoints, config)?;
    Ok((r.value.re, r.error))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_exact() {
        let r = integrate_real(|x| 3.0 * x * x, 0.0, 2.0, &[], &QuadConfig::default()).unwrap();
        assert!((r.0 - 8.0).abs() < 1e-13);
    }

    #[test]
    fn lorentzian_peak() {
        let w = 1e-4;
        let cfg = QuadConfig { epsrel: 1e-12, ..Default::default() };
        let r = integrate_real(|x| w / PI / (x * x + w * w), -1.0, 1.0, &[0.0], &cfg).unwrap();
        let exact = 2.0 / PI * (1.0 / w).atan();
        assert!((r.0 - exact).abs() < 1e-11);
    }

    #[test]
    fn complex_integrand() {
        // int_0^pi e^{ix} dx = 2i
        let r = integrate(|x| Complex64::new(0.0, x).exp(), 0.0, PI, &[], &QuadConfig::default()).unwrap();
        assert!((r.value - Complex64::new(0.0, 2.0)).norm() < 1e-12);
    }

    #[test]
    fn non_finite_is_reported() {
        let r = integrate_real(|x| 1.0 / (x - 0.5_f64).abs().sqrt().min(0.0), 0.0, 1.0, &[], &QuadConfig::default());
        assert!(matches!(r, Err(QuadError::NonFinite(_))));
    }

    #[test]
    fn budget_exhaustion() {
        let cfg = QuadConfig { epsabs: 0.0, epsrel: 1e-14, max_subdivisions: 3 };
        let r = integrate_real(|x| (1.0 / x).sin(), 1e-6, 1.0, &[], &cfg);
        assert!(matches!(r, Err(QuadError::NotConverged { .. })));
    }
}
