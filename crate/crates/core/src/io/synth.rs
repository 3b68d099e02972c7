//! Synthetic data with seeded multiplicative Gaussian noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::SystemParams;
use crate::oscillator::{transmission_map, OscillatorSet};
use crate::resolvent::{synthesize_scans, CouplingDensity, Scan, ScanKey};

use super::scan::ScanTable;

fn rng_for(level: f64, seed: Option<u64>) -> Result<Option<ChaCha8Rng>> {
    if !(level >= 0.0) || !level.is_finite() {
        return Err(Error::invalid(format!("noise level must be finite and >= 0, got {level}")));
    }
    if level == 0.0 {
        return Ok(None);
    }
    let seed = seed.ok_or_else(|| Error::invalid("noise > 0 needs a seed"))?;
    Ok(Some(ChaCha8Rng::seed_from_u64(seed)))
}

/// Multiplies each value by 1 + level * xi, xi standard normal, drawn in
/// slice order. Returns the noise variance of each sample.
pub fn add_noise(values: &mut [f64], level: f64, seed: Option<u64>) -> Result<Vec<f64>> {
    let Some(mut rng) = rng_for(level, seed)? else {
        return Ok(vec![0.0; values.len()]);
    };
    Ok(values
        .iter_mut()
        .map(|v| {
            let xi: f64 = StandardNormal.sample(&mut rng);
            let var = (level * *v).powi(2);
            *v *= 1.0 + level * xi;
            var
        })
        .collect())
}

/// Shift-keyed scans of `density` with optional noise. With noise the
/// variance column holds (level * clean value)^2.
pub fn synthesize_scan(
    density: &CouplingDensity,
    params: &SystemParams,
    shifts: &[f64],
    probe: &[f64],
    level: f64,
    seed: Option<u64>,
) -> Result<ScanTable> {
    rng_for(level, seed)?;
    let mut scans = synthesize_scans(density, params, params.omega_c, shifts, probe)?;
    let mut all: Vec<f64> = scans.iter().flat_map(|s| s.power.iter().copied()).collect();
    let var = add_noise(&mut all, level, seed)?;
    let n = probe.len();
    for (i, s) in scans.iter_mut().enumerate() {
        s.power.copy_from_slice(&all[i * n..(i + 1) * n]);
        if level > 0.0 {
            s.variance = Some(var[i * n..(i + 1) * n].to_vec());
        }
    }
    let mut provenance = vec![format!(
        "synthetic resolvent scans, noise {level}{}",
        seed.map(|s| format!(", seed {s}")).unwrap_or_default()
    )];
    provenance.push("f_shift_MHz: cavity minus ensemble frequency".into());
    ScanTable::from_scans(&scans, provenance)
}

/// Avoided-crossing map of the oscillator model with optional noise, one
/// scan per near-resonant centre in `tuning` (absolute, rad/s).
pub fn synthesize_crossing(
    set: &OscillatorSet,
    params: &SystemParams,
    probe: &[f64],
    tuning: &[f64],
    level: f64,
    seed: Option<u64>,
) -> Result<ScanTable> {
    rng_for(level, seed)?;
    let mut map = transmission_map(set, params, probe, tuning)?;
    let var = add_noise(&mut map.values, level, seed)?;
    let n = probe.len();
    let scans: Vec<Scan> = tuning
        .iter()
        .enumerate()
        .map(|(i, &wa)| Scan {
            key: ScanKey::Shift(params.omega_c - wa),
            probe: probe.to_vec(),
            power: map.row(i).to_vec(),
            variance: (level > 0.0).then(|| var[i * n..(i + 1) * n].to_vec()),
        })
        .collect();
    let provenance = vec![
        format!(
            "synthetic oscillator-model crossing, noise {level}{}",
            seed.map(|s| format!(", seed {s}")).unwrap_or_default()
        ),
        "f_shift_MHz: cavity minus ensemble frequency".into(),
    ];
    ScanTable::from_scans(&scans, provenance)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_is_exact_and_seed_is_deterministic() {
        let mut a = vec![1.0, 2.0, 3.0];
        add_noise(&mut a, 0.0, None).unwrap();
        assert_eq!(a, vec![1.0, 2.0, 3.0]);
        let mut b = vec![1.0; 100];
        let mut c = vec![1.0; 100];
        add_noise(&mut b, 0.02, Some(9)).unwrap();
        add_noise(&mut c, 0.02, Some(9)).unwrap();
        assert_eq!(b, c);
        assert!(add_noise(&mut c, 0.02, None).is_err());
    }

    #[test]
    fn noise_level_statistics() {
        let n = 20_000;
        let mut v = vec![3.5; n];
        add_noise(&mut v, 0.02, Some(2024)).unwrap();
        let dev: Vec<f64> = v.iter().map(|x| x / 3.5 - 1.0).collect();
        let mean = dev.iter().sum::<f64>() / n as f64;
        let sd = (dev.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((0.018..=0.022).contains(&sd), "{sd}");
    }

    #[test]
    fn crossing_table_holds_the_forward_model() {
        use crate::units::mhz;
        let p = SystemParams {
            omega_c: mhz(2700.0),
            kappa: mhz(0.4),
            gamma_hom: 0.0,
            gamma_p: 0.0,
            g: 0.0,
            n_spins: 1e12,
            eta: 1.0,
        }
        .with_collective_coupling(mhz(9.51));
        let set = OscillatorSet::resonant(&p, mhz(10.92));
        let probe: Vec<f64> = (0..5).map(|k| p.omega_c + mhz(k as f64 - 2.0)).collect();
        let tuning: Vec<f64> = (0..3).map(|k| p.omega_c + mhz(4.0 * k as f64 - 4.0)).collect();
        let t = synthesize_crossing(&set, &p, &probe, &tuning, 0.0, None).unwrap();
        let map = transmission_map(&set, &p, &probe, &tuning).unwrap();
        // rows sort by shift = f_c - f_a1, so the last tuning value comes first
        assert_eq!(t.rows[0].power, map.row(2)[0]);
        assert!((t.rows[0].tuning + 4.0).abs() < 1e-9);
        assert!(!t.has_variance());
        let noisy = synthesize_crossing(&set, &p, &probe, &tuning, 0.01, Some(1)).unwrap();
        assert!(noisy.has_variance());
        assert_eq!(noisy, synthesize_crossing(&set, &p, &probe, &tuning, 0.01, Some(1)).unwrap());
    }
}
