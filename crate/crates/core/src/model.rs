//! Parameter types shared by every model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cavity and ensemble constants, all rates in rad/s.
///
/// `kappa` is the cavity field decay rate, i.e. the half width of the bare
/// cavity line; the full width at half maximum is `2 kappa`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub omega_c: f64,
    pub kappa: f64,
    pub gamma_hom: f64,
    pub gamma_p: f64,
    /// Single-spin coupling.
    pub g: f64,
    /// Spin count; may be ~1e12.
    pub n_spins: f64,
    /// Probe drive amplitude.
    pub eta: f64,
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("kappa", self.kappa),
            ("gamma_hom", self.gamma_hom),
            ("gamma_p", self.gamma_p),
            ("g", self.g),
            ("eta", self.eta),
        ];
        for (name, v) in rates {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.n_spins >= 1.0) {
            return Err(Error::invalid(format!("N must be >= 1, got {}", self.n_spins)));
        }
        if !(self.omega_c > 0.0) {
            return Err(Error::invalid("omega_c must be > 0"));
        }
        Ok(())
    }

    /// Collective coupling g sqrt(N).
    pub fn collective_coupling(&self) -> f64 {
        self.g * self.n_spins.sqrt()
    }

    /// g^2 N, the total coupling weight.
    pub fn coupling_weight(&self) -> f64 {
        self.g * self.g * self.n_spins
    }

    /// Returns a copy with `g` chosen so that g sqrt(N) equals `omega`.
    pub fn with_collective_coupling(mut self, omega: f64) -> Self {
        self.g = omega / self.n_spins.sqrt();
        self
    }
}

/// Thermal environment of cavity and spins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalBath {
    /// Kelvin.
    pub temperature: f64,
}

impl ThermalBath {
    pub fn new(temperature: f64) -> Result<Self> {
        if !(temperature >= 0.0) || !temperature.is_finite() {
            return Err(Error::invalid(format!("temperature must be >= 0, got {temperature}")));
        }
        Ok(Self { temperature })
    }

    pub const fn zero() -> Self {
        Self { temperature: 0.0 }
    }
}
