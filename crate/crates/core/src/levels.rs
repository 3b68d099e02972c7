//! NV ground-state spin-1 Hamiltonian and Zeeman tuning for fields in the
//! (001) plane.
//!
//! NV frame convention: z along the NV axis, x obtained by Gram-Schmidt of
//! the lab [001] direction against z (lab [100] if the axis is along [001]),
//! y = z × x.

use std::f64::consts::PI;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{hz, mhz, BOHR_MAGNETON, HBAR};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroFieldParams {
    /// Zero-field splitting, rad/s.
    pub d: f64,
    /// Strain splitting, rad/s.
    pub e: f64,
    pub g_factor: f64,
}

impl Default for ZeroFieldParams {
    fn default() -> Self {
        Self { d: mhz(2880.0), e: mhz(5.0), g_factor: 2.0 }
    }
}

impl ZeroFieldParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.d > 0.0) || !(self.e >= 0.0) || !(self.g_factor > 0.0) {
            return Err(Error::invalid("zero-field parameters need D > 0, E >= 0, g > 0"));
        }
        Ok(())
    }

    /// Zeeman rate g mu_B / hbar in rad/s per tesla.
    pub fn gyromagnetic(&self) -> f64 {
        self.g_factor * BOHR_MAGNETON / HBAR
    }
}

/// Field magnitude (T) and in-plane angle from [100] (rad).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    pub magnitude: f64,
    pub phi: f64,
}

impl FieldConfig {
    pub fn lab_vector(&self) -> Vector3<f64> {
        Vector3::new(self.phi.cos(), self.phi.sin(), 0.0) * self.magnitude
    }
}

/// The four NV axis directions, normalized.
pub fn orientation_axes() -> [Vector3<f64>; 4] {
    let s = 1.0 / 3f64.sqrt();
    [
        Vector3::new(1.0, 1.0, 1.0) * s,
        Vector3::new(-1.0, -1.0, 1.0) * s,
        Vector3::new(-1.0, 1.0, -1.0) * s,
        Vector3::new(1.0, -1.0, -1.0) * s,
    ]
}

/// Spin-1 matrices (S_x, S_y, S_z) in the basis m = +1, 0, -1.
pub fn spin1_operators() -> [Matrix3<Complex64>; 3] {
    let r = 1.0 / 2f64.sqrt();
    let c = |v: f64| Complex64::new(v, 0.0);
    let i = |v: f64| Complex64::new(0.0, v);
    let z = c(0.0);
    let sx = Matrix3::new(z, c(r), z, c(r), z, c(r), z, c(r), z);
    let sy = Matrix3::new(z, i(-r), z, i(r), z, i(-r), z, i(r), z);
    let sz = Matrix3::new(c(1.0), z, z, z, z, z, z, z, c(-1.0));
    [sx, sy, sz]
}

fn nv_frame(axis: &Vector3<f64>) -> Result<[Vector3<f64>; 3]> {
    let norm = axis.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::invalid("NV axis must have non-zero finite norm"));
    }
    let z = axis / norm;
    let mut reference = Vector3::new(0.0, 0.0, 1.0);
    if z.cross(&reference).norm() < 1e-8 {
        reference = Vector3::new(1.0, 0.0, 0.0);
    }
    let x = (reference - z * z.dot(&reference)).normalize();
    let y = z.cross(&x);
    Ok([x, y, z])
}

/// H = g mu_B B.S + D S_z^2 + E (S_x^2 - S_y^2) in rad/s, with `b_lab` in
/// tesla expressed in the NV frame of `axis`.
pub fn build_hamiltonian(zfp: &ZeroFieldParams, b_lab: &Vector3<f64>, axis: &Vector3<f64>) -> Result<Matrix3<Complex64>> {
    let [ex, ey, ez] = nv_frame(axis)?;
    let gamma = zfp.gyromagnetic();
    let b = [b_lab.dot(&ex), b_lab.dot(&ey), b_lab.dot(&ez)];
    let [sx, sy, sz] = spin1_operators();
    let mut h = &sz * &sz * Complex64::from(zfp.d) + (&sx * &sx - &sy * &sy) * Complex64::from(zfp.e);
    for (s, bk) in [sx, sy, sz].iter().zip(b) {
        h += s * Complex64::from(gamma * bk);
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrientationLevels {
    /// Ascending eigenvalues, rad/s.
    pub eigenvalues: [f64; 3],
    pub omega_plus: f64,
    pub omega_minus: f64,
    /// |cos| of the angle between axis and field.
    pub cos_angle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    MinusI,
    PlusI,
    MinusII,
    PlusII,
}

/// Levels for all four orientations.
///
/// Subensemble I is the pair with the larger |cos| (smaller angle to the
/// field, hence the stronger Zeeman tuning).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelDiagram {
    pub orientations: [OrientationLevels; 4],
    pub subensemble_i: [usize; 2],
    pub subensemble_ii: [usize; 2],
    /// Set when all four angles coincide so that I/II cannot be told apart.
    pub ambiguous: bool,
}

impl LevelDiagram {
    pub fn transition(&self, branch: Branch) -> f64 {
        let (k, plus) = match branch {
            Branch::MinusI => (self.subensemble_i[0], false),
            Branch::PlusI => (self.subensemble_i[0], true),
            Branch::MinusII => (self.subensemble_ii[0], false),
            Branch::PlusII => (self.subensemble_ii[0], true),
        };
        let o = &self.orientations[k];
        if plus { o.omega_plus } else { o.omega_minus }
    }
}

/// Levels of one orientation for an arbitrary lab-frame field `b` (tesla).
pub fn orientation_levels(zfp: &ZeroFieldParams, b: &Vector3<f64>, axis: &Vector3<f64>) -> Result<OrientationLevels> {
    let h = build_hamiltonian(zfp, b, axis)?;
    let eig = SymmetricEigen::new(h);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues = order.map(|i| eig.eigenvalues[i]);
    // |m = 0> is the middle basis vector, which is also the zero-field
    // eigenvector because the E term only couples m = +1 and -1.
    let zero = (0..3)
        .max_by(|&i, &j| eig.eigenvectors[(1, i)].norm_sqr().total_cmp(&eig.eigenvectors[(1, j)].norm_sqr()))
        .unwrap();
    let e0 = eig.eigenvalues[zero];
    let mut rest: Vec<f64> = (0..3).filter(|&i| i != zero).map(|i| eig.eigenvalues[i]).collect();
    rest.sort_by(f64::total_cmp);
    let bn = b.norm();
    let cos_angle = if bn > 0.0 { (b.dot(axis) / (bn * axis.norm())).abs() } else { 0.0 };
    Ok(OrientationLevels { eigenvalues, omega_plus: rest[1] - e0, omega_minus: rest[0] - e0, cos_angle })
}

pub fn transition_frequencies(zfp: &ZeroFieldParams, field: &FieldConfig) -> Result<LevelDiagram> {
    zfp.validate()?;
    if !(field.magnitude >= 0.0) || !field.magnitude.is_finite() {
        return Err(Error::invalid("field magnitude must be finite and >= 0"));
    }
    let b = field.lab_vector();
    let axes = orientation_axes();
    let mut orientations = [OrientationLevels { eigenvalues: [0.0; 3], omega_plus: 0.0, omega_minus: 0.0, cos_angle: 0.0 }; 4];
    for (o, axis) in orientations.iter_mut().zip(axes.iter()) {
        *o = orientation_levels(zfp, &b, axis)?;
    }
    let mut idx = [0usize, 1, 2, 3];
    idx.sort_by(|&i, &j| orientations[j].cos_angle.total_cmp(&orientations[i].cos_angle).then(i.cmp(&j)));
    let gap = orientations[idx[1]].cos_angle - orientations[idx[2]].cos_angle;
    let mut subensemble_i = [idx[0], idx[1]];
    let mut subensemble_ii = [idx[2], idx[3]];
    subensemble_i.sort_unstable();
    subensemble_ii.sort_unstable();
    Ok(LevelDiagram { orientations, subensemble_i, subensemble_ii, ambiguous: gap < 1e-9 })
}

/// Field magnitude at which `branch` reaches `target`, by bisection on the
/// first bracketing segment of a scan over `[0, b_max]`.
pub fn field_for_resonance(zfp: &ZeroFieldParams, phi: f64, target: f64, branch: Branch, b_max: f64) -> Result<f64> {
    let tol = hz(1e3);
    let eval = |b: f64| -> Result<f64> {
        Ok(transition_frequencies(zfp, &FieldConfig { magnitude: b, phi })?.transition(branch) - target)
    };
    let f0 = eval(0.0)?;
    if f0.abs() < tol {
        return Ok(0.0);
    }
    let n = 400;
    let (mut lo, mut flo) = (0.0, f0);
    for k in 1..=n {
        let b = b_max * k as f64 / n as f64;
        let fb = eval(b)?;
        if flo.signum() != fb.signum() {
            let mut hi = b;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let fm = eval(mid)?;
                if fm.abs() < 0.01 * tol {
                    return Ok(mid);
                }
                if fm.signum() == flo.signum() {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            return Ok(0.5 * (lo + hi));
        }
        lo = b;
        flo = fb;
    }
    Err(Error::Range(format!(
        "{branch:?} does not reach {:.6} MHz for B in [0, {:.3} mT] at phi = {:.3} deg",
        target / mhz(1.0),
        b_max * 1e3,
        phi * 180.0 / PI
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn spin_algebra() {
        let [sx, sy, sz] = spin1_operators();
        let comm = &sx * &sy - &sy * &sx - &sz * Complex64::i();
        assert!(comm.norm() < 1e-14);
        let casimir = &sx * &sx + &sy * &sy + &sz * &sz - Matrix3::identity() * Complex64::from(2.0);
        assert!(casimir.norm() < 1e-14);
        for s in [sx, sy, sz] {
            let mut ev: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().cloned().collect();
            ev.sort_by(f64::total_cmp);
            for (a, b) in ev.iter().zip([-1.0, 0.0, 1.0]) {
                assert!(close(*a, b, 1e-12));
            }
        }
    }

    #[test]
    fn zero_field_and_trace() {
        let zfp = ZeroFieldParams::default();
        let axis = orientation_axes()[2];
        let h = build_hamiltonian(&zfp, &Vector3::zeros(), &axis).unwrap();
        let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().cloned().collect();
        ev.sort_by(f64::total_cmp);
        assert!(close(ev[0], 0.0, 1e-3));
        assert!(close(ev[1], zfp.d - zfp.e, 1e-3));
        assert!(close(ev[2], zfp.d + zfp.e, 1e-3));
        let b = Vector3::new(3e-3, -7e-3, 2e-3);
        let h = build_hamiltonian(&zfp, &b, &axis).unwrap();
        assert!(close(h.trace().re, 2.0 * zfp.d, 1e-3));
        assert!((h.adjoint() - h).norm() < 1e-6);
    }

    #[test]
    fn aligned_field_is_diagonal() {
        let zfp = ZeroFieldParams { e: 0.0, ..Default::default() };
        let axis = orientation_axes()[0];
        let b = 0.01;
        let h = build_hamiltonian(&zfp, &(axis * b), &axis).unwrap();
        let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().cloned().collect();
        ev.sort_by(f64::total_cmp);
        let z = zfp.gyromagnetic() * b;
        assert!(close(ev[0], 0.0, 1e-2));
        assert!(close(ev[1], zfp.d - z, 1e-2));
        assert!(close(ev[2], zfp.d + z, 1e-2));
    }

    #[test]
    fn zero_axis_rejected() {
        let zfp = ZeroFieldParams::default();
        assert!(build_hamiltonian(&zfp, &Vector3::zeros(), &Vector3::zeros()).is_err());
    }

    #[test]
    fn pair_structure() {
        let zfp = ZeroFieldParams::default();
        let d = transition_frequencies(&zfp, &FieldConfig { magnitude: 5e-3, phi: 22.5f64.to_radians() }).unwrap();
        assert!(!d.ambiguous);
        let [a, b] = d.subensemble_i;
        assert!(close(d.orientations[a].omega_minus, d.orientations[b].omega_minus, 1.0));
        assert!(d.transition(Branch::MinusI) < d.transition(Branch::MinusII));
        assert!(d.transition(Branch::PlusI) > d.transition(Branch::PlusII));
        let d0 = transition_frequencies(&zfp, &FieldConfig { magnitude: 5e-3, phi: 0.0 }).unwrap();
        assert!(d0.ambiguous);
    }

    #[test]
    fn resonance_field() {
        let zfp = ZeroFieldParams { e: 0.0, ..Default::default() };
        let phi = 22.5f64.to_radians();
        let target = mhz(2700.0);
        let b = field_for_resonance(&zfp, phi, target, Branch::MinusI, 0.05).unwrap();
        let d = transition_frequencies(&zfp, &FieldConfig { magnitude: b, phi }).unwrap();
        assert!((d.transition(Branch::MinusI) - target).abs() < hz(1e3));
        let zfp = ZeroFieldParams::default();
        assert_eq!(field_for_resonance(&zfp, phi, zfp.d - zfp.e, Branch::MinusI, 0.05).unwrap(), 0.0);
        assert!(matches!(
            field_for_resonance(&zfp, phi, mhz(2950.0), Branch::MinusI, 0.05),
            Err(Error::Range(_))
        ));
    }
}
