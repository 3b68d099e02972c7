//! Finite-temperature moment hierarchy with second-order cumulant closure,
//! and a brute-force Liouvillian solver for a handful of spins.
//!
//! Frame rotating at the probe frequency:
//! H = Δc a†a + (Δs/2) Σ σz + g Σ (σ+ a + a† σ-) + iη (a† - a),
//! with Δc = ωc - ωp and Δs = ωs - ωp. Dissipators: cavity `a` at
//! 2κ(n̄c + 1) and `a†` at 2κ n̄c; per spin `σ-` at γh(n̄s + 1), `σ+` at
//! γh n̄s and `σz` at γp/2, so that coherences decay at
//! Γ⊥ = γh/2 + γh n̄s + γp and populations at Γ∥ = γh(1 + 2 n̄s).

mod hierarchy;
mod oracle;

pub use hierarchy::{
    integrate_to_steady, moment_derivatives, probe_spectrum, rabi_vs_temperature, HierarchyConfig,
    MomentState, ProbeSpectrum, RabiPoint, SteadyMoments,
};
pub use oracle::{exact_oracle, ExactSteady, Liouvillian};

#[cfg(test)]
mod tests;
