//! Gridded transmission spectra and peak extraction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `|<a>|^2` sampled on a probe grid, optionally for each value of a tuning
/// parameter. Values are stored row-major with one row per tuning value.
/// Masked (failed) samples hold NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionSpectrum {
    pub probe: Vec<f64>,
    pub tuning: Option<Vec<f64>>,
    pub values: Vec<f64>,
}

pub(crate) fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid(format!("{name} grid is empty")));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("{name} grid has non-finite entries")));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid(format!("{name} grid must be strictly increasing")));
    }
    Ok(())
}

impl TransmissionSpectrum {
    pub fn line(probe: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_grid("probe", &probe)?;
        if values.len() != probe.len() {
            return Err(Error::invalid("value count differs from probe grid"));
        }
        Ok(Self { probe, tuning: None, values })
    }

    pub fn map(probe: Vec<f64>, tuning: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_grid("probe", &probe)?;
        check_grid("tuning", &tuning)?;
        if values.len() != probe.len() * tuning.len() {
            return Err(Error::invalid("value count differs from grid size"));
        }
        Ok(Self { probe, tuning: Some(tuning), values })
    }

    pub fn rows(&self) -> usize {
        self.tuning.as_ref().map_or(1, |t| t.len())
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.probe.len();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn masked_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_nan()).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    pub position: f64,
    pub height: f64,
}

/// Classification of a spectrum into one line or a resolved doublet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Doublet {
    Resolved { lower: Peak, upper: Peak },
    Single(Peak),
}

impl Doublet {
    pub fn splitting(&self) -> Option<f64> {
        match self {
            Doublet::Resolved { lower, upper } => Some(upper.position - lower.position),
            Doublet::Single(_) => None,
        }
    }
}

/// A dip between two maxima counts only when it is deeper than this
/// fraction of the lower of the two peak heights.
pub const VISIBILITY_DIP: f64 = 0.05;

/// Vertex of the parabola through three equally or unequally spaced points.
fn refine(x: &[f64], y: &[f64], i: usize) -> Peak {
    if i == 0 || i + 1 >= x.len() {
        return Peak { position: x[i], height: y[i] };
    }
    let (x0, x1, x2) = (x[i - 1], x[i], x[i + 1]);
    let (y0, y1, y2) = (y[i - 1], y[i], y[i + 1]);
    let d0 = (y1 - y0) / (x1 - x0);
    let d1 = (y2 - y1) / (x2 - x1);
    let c = (d1 - d0) / (x2 - x0);
    if !(c < 0.0) {
        return Peak { position: x1, height: y1 };
    }
    let b = d0 - c * (x0 + x1);
    let xv = (-b / (2.0 * c)).clamp(x0, x2);
    let yv = y1 + (xv - x1) * (d0 + c * (xv - x0));
    Peak { position: xv, height: yv }
}

/// Local maxima that survive the visibility rule, with quadratic sub-grid
/// refinement. Peaks lower than `min_rel_height` times the global maximum
/// are discarded. NaN samples are skipped.
pub fn find_peaks(x: &[f64], y: &[f64], min_rel_height: f64) -> Vec<Peak> {
    let pts: Vec<(f64, f64)> =
        x.iter().zip(y).filter(|(_, v)| v.is_finite()).map(|(a, b)| (*a, *b)).collect();
    if pts.len() < 3 {
        return pts.first().map(|&(a, b)| vec![Peak { position: a, height: b }]).unwrap_or_default();
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let n = xs.len();
    let top = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut idx: Vec<usize> = (0..n)
        .filter(|&i| {
            let left = i == 0 || ys[i] > ys[i - 1];
            let right = i + 1 == n || ys[i] >= ys[i + 1];
            left && right && ys[i] >= min_rel_height * top
        })
        .collect();
    loop {
        let mut merged = false;
        for k in 0..idx.len().saturating_sub(1) {
            let (a, b) = (idx[k], idx[k + 1]);
            let dip = ys[a..=b].iter().cloned().fold(f64::INFINITY, f64::min);
            let lower = ys[a].min(ys[b]);
            if dip > (1.0 - VISIBILITY_DIP) * lower {
                idx.remove(if ys[a] < ys[b] { k } else { k + 1 });
                merged = true;
                break;
            }
        }
        if !merged {
            break;
        }
    }
    idx.into_iter().map(|i| refine(&xs, &ys, i)).collect()
}

/// Picks the two highest visible peaks, or reports a single line.
pub fn doublet(x: &[f64], y: &[f64]) -> Result<Doublet> {
    let mut peaks = find_peaks(x, y, 0.01);
    match peaks.len() {
        0 => Err(Error::numerical("spectrum has no finite maximum")),
        1 => Ok(Doublet::Single(peaks[0])),
        _ => {
            peaks.sort_by(|a, b| b.height.total_cmp(&a.height));
            let (p, q) = (peaks[0], peaks[1]);
            let (lower, upper) = if p.position < q.position { (p, q) } else { (q, p) };
            Ok(Doublet::Resolved { lower, upper })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_lorentz(x: f64, sep: f64, w: f64) -> f64 {
        1.0 / (1.0 + ((x - sep / 2.0) / w).powi(2)) + 1.0 / (1.0 + ((x + sep / 2.0) / w).powi(2))
    }

    #[test]
    fn quadratic_refinement_is_exact_for_parabola() {
        let x: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.0 - (v - 0.537).powi(2)).collect();
        let p = find_peaks(&x, &y, 0.0);
        assert_eq!(p.len(), 1);
        assert!((p[0].position - 0.537).abs() < 1e-12);
        assert!((p[0].height - 1.0).abs() < 1e-12);
    }

    #[test]
    fn doublet_resolution_rule() {
        let x: Vec<f64> = (0..801).map(|i| -4.0 + i as f64 * 0.01).collect();
        let y: Vec<f64> = x.iter().map(|&v| two_lorentz(v, 3.0, 0.5)).collect();
        let d = doublet(&x, &y).unwrap();
        assert!((d.splitting().unwrap() - 3.0).abs() < 0.1);
        // separation below the Lorentzian merging point
        let y: Vec<f64> = x.iter().map(|&v| two_lorentz(v, 0.5, 0.5)).collect();
        assert!(matches!(doublet(&x, &y).unwrap(), Doublet::Single(_)));
    }

    #[test]
    fn masked_samples_skipped() {
        let x: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let mut y: Vec<f64> = x.iter().map(|v| -(v - 20.0f64).powi(2)).collect();
        y[5] = f64::NAN;
        let p = find_peaks(&x, &y, 0.0);
        assert_eq!(p.len(), 1);
        assert!((p[0].position - 20.0).abs() < 1e-9);
    }
}
