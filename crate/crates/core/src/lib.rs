//! Forward and inverse models for a cavity mode coupled to a large,
//! inhomogeneously broadened NV spin ensemble.
//!
//! All internal quantities are angular frequencies in rad/s. Conversion to
//! ordinary frequency (MHz) happens only in [`io`] and [`units`].

pub mod cumulant;
pub mod error;
pub mod fitting;
pub mod io;
pub mod levels;
pub mod maser;
pub mod model;
pub mod ode;
pub mod oscillator;
pub mod quad;
pub mod resolvent;
pub mod spectrum;
pub mod thermal;
pub mod units;

pub use error::{Error, Result};
pub use model::{SystemParams, ThermalBath};
pub use spectrum::TransmissionSpectrum;
