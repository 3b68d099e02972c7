//! Pumped-ensemble maser map and spectrum sum rule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nvcavity_core::maser::{emission_spectrum, fixed_point_is_stable, operating_map, PumpedParams};
use nvcavity_core::units::{hz, mhz, to_hz};
use nvcavity_core::{SystemParams, ThermalBath};

use crate::Outcome;

fn base(w_hz: f64, gamma_p_hz: f64) -> PumpedParams {
    PumpedParams {
        system: SystemParams {
            omega_c: mhz(2880.0),
            kappa: mhz(1.0),
            gamma_hom: hz(1.0),
            gamma_p: hz(gamma_p_hz),
            g: hz(10.0),
            n_spins: 1e12,
            eta: 0.0,
        },
        w: hz(w_hz),
        delta: 0.0,
        bath: ThermalBath::zero(),
    }
}

fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    let (la, lb) = (a.log10(), b.log10());
    (0..n).map(|k| 10f64.powf(la + (lb - la) * k as f64 / (n - 1) as f64)).collect()
}

fn within(x: f64, target: f64, factor: f64) -> bool {
    x >= target / factor && x <= target * factor
}

pub fn floor_and_region() -> Outcome {
    let p = base(0.0, 1.0);
    let s = &p.system;
    // characteristic scales as ordinary frequency (Hz)
    let floor = to_hz(s.g * s.g / s.kappa);
    let w_hi = to_hz(2.0 * s.coupling_weight() / s.kappa);
    let w_lo = to_hz(s.gamma_hom);
    let gamma_crit = to_hz(s.coupling_weight() / s.kappa);
    let cavity_fwhm = to_hz(2.0 * s.kappa);
    let narrow = (floor * cavity_fwhm).sqrt();

    let w_grid: Vec<f64> = log_grid(1e-2, 1e9, 40).into_iter().map(hz).collect();
    let gp_grid: Vec<f64> = log_grid(1.0, 1e11, 40).into_iter().map(hz).collect();
    let map = match operating_map(&p, &w_grid, &gp_grid) {
        Ok(m) => m,
        Err(e) => return Outcome::error(e),
    };

    let finite: Vec<(usize, f64)> =
        map.linewidth_hz.iter().copied().enumerate().filter(|(_, v)| v.is_finite()).collect();
    let Some(&(k_min, min_lw)) = finite.iter().min_by(|a, b| a.1.total_cmp(&b.1)) else {
        return Outcome::new(false, "map holds no finite linewidth");
    };
    let floor_ok = within(min_lw, floor, 2.0);

    let row0: Vec<usize> = (0..w_grid.len()).filter(|&j| map.at(0, j).1 < narrow).collect();
    let (window_ok, window_txt) = match (row0.first(), row0.last()) {
        (Some(&a), Some(&b)) => {
            let (lo, hi) = (to_hz(w_grid[a]), to_hz(w_grid[b]));
            (
                within(lo, w_lo, 3.0) && within(hi, w_hi, 3.0),
                format!("narrow window {lo:.3e}..{hi:.3e} Hz vs {w_lo:.1e}..{w_hi:.1e} Hz"),
            )
        }
        _ => (false, "no narrow emission at the smallest gamma_p".to_string()),
    };

    let w_mid = (w_lo * w_hi).sqrt();
    let lw = |gp: f64| emission_spectrum(&base(w_mid, gp)).map(|s| s.linewidth_hz);
    let (ratio_ok, ratio_txt) = match (lw(gamma_crit / 10f64.sqrt()), lw(gamma_crit * 10f64.sqrt())) {
        (Ok(a), Ok(b)) => (b / a >= 10.0, format!("degradation x{:.3e} across gamma_p,crit = {gamma_crit:.1e} Hz", b / a)),
        (Err(e), _) | (_, Err(e)) => (false, format!("degradation check failed: {e}")),
    };

    let (i_min, j_min) = (k_min / w_grid.len(), k_min % w_grid.len());
    let stable_min = finite
        .iter()
        .filter(|(k, _)| map.fixed_point_stable[*k])
        .map(|x| x.1)
        .fold(f64::INFINITY, f64::min);
    Outcome::new(
        floor_ok && window_ok && ratio_ok,
        format!(
            "min linewidth {min_lw:.3e} Hz vs g^2/kappa {floor:.1e} Hz (ok: {floor_ok}); {window_txt} (ok: {window_ok}); {ratio_txt} (ok: {ratio_ok})"
        ),
    )
    .note(format!(
        "minimum at w = {:.3e} Hz, gamma_p = {:.3e} Hz; {} failed cells",
        to_hz(w_grid[j_min]),
        to_hz(gp_grid[i_min]),
        map.failures.len()
    ))
    .note(format!(
        "diagnostic: plateau linewidth at w = 1 kHz, gamma_p = 1 Hz is {:.3e} Hz; minimum over stable fixed points {stable_min:.3e} Hz",
        emission_spectrum(&base(1e3, 1.0)).map(|s| s.linewidth_hz).unwrap_or(f64::NAN)
    ))
}

pub fn sum_rule() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    let mut used = 0;
    let mut tries = 0;
    while used < 10 {
        tries += 1;
        if tries > 1000 {
            return Outcome::new(false, format!("only {used} stable operating points found"));
        }
        let w = 10f64.powf(rng.random_range(-2.0..9.0));
        let gp = 10f64.powf(rng.random_range(0.0..11.0));
        let p = base(w, gp);
        let Ok(spec) = emission_spectrum(&p) else { continue };
        if !fixed_point_is_stable(&p, &spec.steady) {
            continue;
        }
        let total = match spec.integral() {
            Ok(v) => v,
            Err(e) => return Outcome::error(format!("w = {w:.3e} Hz, gamma_p = {gp:.3e} Hz: {e}")),
        };
        let want = 2.0 * std::f64::consts::PI * spec.steady.photons;
        worst = worst.max((total / want - 1.0).abs());
        used += 1;
    }
    Outcome::new(
        worst < 0.01,
        format!("10 stable points ({tries} drawn), worst |integral / (2 pi n) - 1| = {worst:.2e} (limit 1%)"),
    )
}
