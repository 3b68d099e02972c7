//! Cavity transmission for an arbitrary coupling density via the cavity
//! self-energy (level shift), its complex poles, and the inverse problem of
//! recovering the density from field-tuned transmission scans.
//!
//! In the low-excitation limit the cavity Green's function is
//! G+(w) = 1/(w - w_c + i kappa - R+(w)) with
//! R(z) = integral of rho(w')/(z - w' + i gamma_hom/2) dw'.

mod density;
mod poles;
mod qgauss;
mod reconstruct;
mod shift;
#[cfg(test)]
mod tests;

pub use density::{CouplingDensity, DensityKind, Family, TRUNCATION};
pub use poles::{doublet_guesses, find_poles, PoleSet};
pub use qgauss::{a_from, fit_qgaussian, fwhm_q, qgauss_eval, QGaussFit};
pub use reconstruct::{
    extract_all, extract_level_shift, rearrange_scans, reconstruct_density, synthesize_scans, Extraction,
    RearrangedMap, Scan, ScanKey,
};
pub use shift::{
    level_shift, level_shift_by_quadrature, level_shift_complex, level_shift_table, transmission_gcc,
    transmission_value, LevelShiftSample,
};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::model::SystemParams;
use crate::spectrum::{doublet, Doublet};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WidthSweepPoint {
    pub gamma_q: f64,
    pub doublet: Doublet,
}

/// Transmission peaks on resonance (ensemble at omega_c) for each width in
/// `gamma_q`; zero width is the delta density. The coupling weight is
/// g^2 N from `params`.
pub fn sweep_splitting_vs_width(
    family: Family,
    params: &SystemParams,
    gamma_q: &[f64],
    probe: &[f64],
) -> Result<Vec<WidthSweepPoint>> {
    params.validate()?;
    gamma_q
        .par_iter()
        .map(|&w| {
            let d = CouplingDensity::of_family(family, w, params.omega_c, params.coupling_weight())?;
            let t = transmission_gcc(&d, params, probe, params.omega_c)?;
            Ok(WidthSweepPoint { gamma_q: w, doublet: doublet(&t.probe, &t.values)? })
        })
        .collect()
}
