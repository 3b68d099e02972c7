//! Two-oscillator model, resolvent bridge, poles and width sweeps.

use nvcavity_core::io::add_noise;
use nvcavity_core::oscillator::{
    fit_avoided_crossing, normal_mode_splitting, steady_amplitude, transmission_map, AvoidedCrossingFit, OscillatorSet,
};
use nvcavity_core::resolvent::{
    doublet_guesses, find_poles, sweep_splitting_vs_width, transmission_gcc, CouplingDensity, Family,
};
use nvcavity_core::units::{hz, mhz, to_mhz};
use nvcavity_core::SystemParams;

use crate::{golden_max, Outcome};

fn params(kappa_mhz: f64, gamma_hom: f64, coupling_mhz: f64) -> SystemParams {
    SystemParams {
        omega_c: mhz(2700.0),
        kappa: mhz(kappa_mhz),
        gamma_hom,
        gamma_p: 0.0,
        g: 0.0,
        n_spins: 1e12,
        eta: 1.0,
    }
    .with_collective_coupling(mhz(coupling_mhz))
}

fn grid(center: f64, half: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| center - half + 2.0 * half * k as f64 / (n - 1) as f64).collect()
}

pub fn bridge() -> Outcome {
    let p = params(0.4, mhz(0.3), 9.51);
    let gamma_l = mhz(10.62);
    let d = match CouplingDensity::lorentzian(gamma_l, p.omega_c, p.coupling_weight()) {
        Ok(d) => d,
        Err(e) => return Outcome::error(e),
    };
    let set = OscillatorSet::resonant(&p, gamma_l + p.gamma_hom);
    let probe = grid(p.omega_c, mhz(40.0), 500);
    let t = match transmission_gcc(&d, &p, &probe, p.omega_c) {
        Ok(t) => t,
        Err(e) => return Outcome::error(e),
    };
    let worst = probe
        .iter()
        .zip(&t.values)
        .map(|(&w, &v)| (v / steady_amplitude(&set, &p, w).norm_sqr() - 1.0).abs())
        .fold(0.0f64, f64::max);
    Outcome::new(worst < 1e-6, format!("max relative deviation {worst:.2e} over 500 points (limit 1e-6)"))
}

pub fn splitting_formula() -> Outcome {
    let gamma = mhz(10.92);
    let p = params(0.4, 0.0, 9.51);
    let set = OscillatorSet::resonant(&p, gamma);
    let f = |w: f64| steady_amplitude(&set, &p, w).norm_sqr();
    let span = 3.0 * p.collective_coupling();
    let tol = hz(1.0);
    let lower = golden_max(f, p.omega_c - span, p.omega_c, tol);
    let upper = golden_max(f, p.omega_c, p.omega_c + span, tol);
    let measured = upper - lower;
    let Some(formula) = normal_mode_splitting(&p, p.n_spins, gamma).value() else {
        return Outcome::new(false, "formula reports an unresolved doublet");
    };
    let rel = measured / formula - 1.0;
    Outcome::new(
        rel.abs() < 0.02,
        format!(
            "maxima {:.4} MHz apart, formula {:.4} MHz, deviation {:.2}% (limit 2%)",
            to_mhz(measured),
            to_mhz(formula),
            100.0 * rel
        ),
    )
}

pub fn crossing_fit() -> Outcome {
    let (gamma, coupling) = (mhz(10.92), mhz(9.51));
    let p = params(0.4, 0.0, 9.51);
    let set = OscillatorSet::resonant(&p, gamma);
    let probe = grid(p.omega_c, mhz(30.0), 61);
    let tuning = grid(p.omega_c, mhz(30.0), 21);
    let clean = match transmission_map(&set, &p, &probe, &tuning) {
        Ok(m) => m,
        Err(e) => return Outcome::error(e),
    };
    let init = AvoidedCrossingFit::guess(mhz(8.0), mhz(8.0));
    let mut good = 0;
    let mut worst = (0.0f64, 0.0f64);
    let mut failures = Vec::new();
    for seed in 1..=20u64 {
        let mut data = clean.clone();
        if let Err(e) = add_noise(&mut data.values, 0.01, Some(seed)) {
            return Outcome::error(e);
        }
        match fit_avoided_crossing(&data, &p, &init) {
            Ok(fit) => {
                let eg = (fit.gamma / gamma - 1.0).abs();
                let ec = (fit.g_sqrt_n / coupling - 1.0).abs();
                worst = (worst.0.max(eg), worst.1.max(ec));
                if eg < 0.03 && ec < 0.03 {
                    good += 1;
                }
            }
            Err(e) => failures.push(format!("seed {seed}: {e}")),
        }
    }
    let mut o = Outcome::new(
        good >= 18,
        format!(
            "{good}/20 seeds within 3% (need 18); worst errors gamma {:.2}%, g sqrt(N) {:.2}%",
            100.0 * worst.0,
            100.0 * worst.1
        ),
    );
    for f in failures {
        o = o.note(f);
    }
    o
}

pub fn pole_track() -> Outcome {
    let couplings = [12.0, 16.0, 20.0, 24.0, 30.0];
    let widths = |family: Family| -> Result<Vec<f64>, String> {
        couplings
            .iter()
            .map(|&c| {
                let p = params(0.4, hz(1.0), c);
                let d = CouplingDensity::of_family(family, mhz(10.0), p.omega_c, p.coupling_weight())
                    .map_err(|e| e.to_string())?;
                let set = find_poles(&d, &p, p.omega_c, &doublet_guesses(&d, &p, p.omega_c)).map_err(|e| e.to_string())?;
                set.poles.iter().map(|z| z.im.abs()).reduce(f64::max).ok_or_else(|| "no pole".to_string())
            })
            .collect()
    };
    let (q, lor) = match (widths(Family::QGaussian(1.39)), widths(Family::Lorentzian)) {
        (Ok(q), Ok(l)) => (q, l),
        (Err(e), _) | (_, Err(e)) => return Outcome::error(e),
    };
    let q_dec = q.windows(2).all(|w| w[1] < w[0]);
    let l_nondec = lor.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-9));
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{:.4}", to_mhz(*x))).collect::<Vec<_>>().join(", ");
    Outcome::new(
        q_dec && l_nondec,
        format!("q-Gaussian strictly decreasing: {q_dec}, Lorentzian non-decreasing: {l_nondec}"),
    )
    .note(format!("|Im pole| / 2pi (MHz), q = 1.39: [{}]", fmt(&q)))
    .note(format!("|Im pole| / 2pi (MHz), Lorentzian: [{}]", fmt(&lor)))
}

pub fn width_asymmetry() -> Outcome {
    let p = params(0.4, hz(1.0), 10.0);
    let probe = grid(p.omega_c, mhz(20.0), 2001);
    let split = |family: Family, widths: &[f64]| -> Result<Vec<Option<f64>>, String> {
        let pts = sweep_splitting_vs_width(family, &p, widths, &probe).map_err(|e| e.to_string())?;
        Ok(pts.iter().map(|x| x.doublet.splitting()).collect())
    };
    let small = [0.0, mhz(2.0)];
    let (q, lor) = match (split(Family::QGaussian(1.39), &small), split(Family::Lorentzian, &small)) {
        (Ok(q), Ok(l)) => (q, l),
        (Err(e), _) | (_, Err(e)) => return Outcome::error(e),
    };
    let (Some(q0), Some(q2), Some(l0), Some(l2)) = (q[0], q[1], lor[0], lor[1]) else {
        return Outcome::new(false, "doublet not resolved at small width");
    };
    let q_up = q2 > q0;
    let l_down = l2 < l0;
    let mut o = Outcome::new(
        q_up && l_down,
        format!(
            "gamma_q/2pi = 2 MHz vs 0: q = 1.39 {:.4} vs {:.4} MHz (larger: {q_up}); q = 2 {:.4} vs {:.4} MHz (smaller: {l_down})",
            to_mhz(q2),
            to_mhz(q0),
            to_mhz(l2),
            to_mhz(l0)
        ),
    );
    let wide = [mhz(5.0), mhz(10.0), mhz(12.0), mhz(15.0)];
    if let Ok(s) = split(Family::Lorentzian, &wide) {
        let txt: Vec<String> = wide
            .iter()
            .zip(&s)
            .map(|(w, v)| match v {
                Some(v) => format!("{:.0} MHz -> {:.4}", to_mhz(*w), to_mhz(*v)),
                None => format!("{:.0} MHz -> unresolved", to_mhz(*w)),
            })
            .collect();
        o = o.note(format!("diagnostic, q = 2 splitting at larger widths: {}", txt.join(", ")));
    }
    o
}
