use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::Serialize;

#[cfg(test)]
use super::hierarchy::ThirdOrder;
use super::hierarchy::{Coefficients, MomentState};
use crate::error::{Error, Result};
use crate::model::{SystemParams, ThermalBath};

type Mat = DMatrix<C64>;

/// Largest Hilbert dimension accepted by the dense solver.
const MAX_DIM: usize = 96;

/// Full master equation for a few spins and a truncated cavity.
/// Spin basis per site: index 0 = ground, 1 = excited.
pub struct Liouvillian {
    pub n_spins: usize,
    pub cutoff: usize,
    dim: usize,
    a: Mat,
    sm: Vec<Mat>,
    sz: Vec<Mat>,
    h: Mat,
    jumps: Vec<(f64, Mat)>,
}

fn embed(cavity: &Mat, site: Option<(usize, &Mat)>, n_spins: usize) -> Mat {
    let eye2 = Mat::identity(2, 2);
    let mut out = cavity.clone();
    for k in 0..n_spins {
        let factor = match site {
            Some((j, op)) if j == k => op,
            _ => &eye2,
        };
        out = out.kronecker(factor);
    }
    out
}

fn trace_prod(op: &Mat, rho: &Mat) -> C64 {
    // Tr(op rho) without forming the product
    let d = op.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..d {
        for k in 0..d {
            acc += op[(i, k)] * rho[(k, i)];
        }
    }
    acc
}

impl Liouvillian {
    pub fn new(
        n_spins: usize,
        cutoff: usize,
        params: &SystemParams,
        omega_s: f64,
        bath: ThermalBath,
        omega_p: f64,
    ) -> Result<Self> {
        if n_spins == 0 || cutoff == 0 {
            return Err(Error::invalid("oracle needs at least one spin and cutoff >= 1"));
        }
        let dim = (cutoff + 1) << n_spins;
        if dim > MAX_DIM {
            return Err(Error::invalid(format!("Hilbert dimension {dim} exceeds {MAX_DIM}")));
        }
        let p = SystemParams { n_spins: n_spins as f64, ..*params };
        let c = Coefficients::new(&p, omega_s, bath, omega_p);
        let nbar_s = crate::thermal::n_bar(bath, omega_s);
        let nc = cutoff + 1;
        let mut ac = Mat::zeros(nc, nc);
        for k in 1..nc {
            ac[(k - 1, k)] = C64::from((k as f64).sqrt());
        }
        let id_c = Mat::identity(nc, nc);
        let mut sm1 = Mat::zeros(2, 2);
        sm1[(0, 1)] = C64::from(1.0);
        let mut sz1 = Mat::zeros(2, 2);
        sz1[(0, 0)] = C64::from(-1.0);
        sz1[(1, 1)] = C64::from(1.0);
        let a = embed(&ac, None, n_spins);
        let sm: Vec<Mat> = (0..n_spins).map(|j| embed(&id_c, Some((j, &sm1)), n_spins)).collect();
        let sz: Vec<Mat> = (0..n_spins).map(|j| embed(&id_c, Some((j, &sz1)), n_spins)).collect();
        let ad = a.adjoint();
        let i = C64::new(0.0, 1.0);
        let mut h = &ad * &a * C64::from(c.delta_c) + (&ad - &a) * (i * c.eta);
        for j in 0..n_spins {
            let spj = sm[j].adjoint();
            h += &sz[j] * C64::from(0.5 * c.delta_s);
            h += (&spj * &a + &ad * &sm[j]) * C64::from(c.g);
        }
        let mut jumps = vec![(2.0 * c.kappa * (c.nbar_c + 1.0), a.clone()), (2.0 * c.kappa * c.nbar_c, ad.clone())];
        for j in 0..n_spins {
            jumps.push((params.gamma_hom * (nbar_s + 1.0), sm[j].clone()));
            jumps.push((params.gamma_hom * nbar_s, sm[j].adjoint()));
            jumps.push((0.5 * params.gamma_p, sz[j].clone()));
        }
        jumps.retain(|(r, _)| *r > 0.0);
        Ok(Self { n_spins, cutoff, dim, a, sm, sz, h, jumps })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// dρ/dt.
    pub fn apply(&self, rho: &Mat) -> Mat {
        let i = C64::new(0.0, 1.0);
        let mut out = (&self.h * rho - rho * &self.h) * (-i);
        for (r, l) in &self.jumps {
            let ld = l.adjoint();
            let ldl = &ld * l;
            out += (l * rho * &ld - (&ldl * rho + rho * &ldl) * C64::from(0.5)) * C64::from(*r);
        }
        out
    }

    /// Superoperator acting on column-stacked density matrices.
    pub fn superoperator(&self) -> Mat {
        let d = self.dim;
        let id = Mat::identity(d, d);
        let i = C64::new(0.0, 1.0);
        let mut sup = (id.kronecker(&self.h) - self.h.transpose().kronecker(&id)) * (-i);
        for (r, l) in &self.jumps {
            let ldl = l.adjoint() * l;
            let term = l.conjugate().kronecker(l)
                - (id.kronecker(&ldl) + ldl.transpose().kronecker(&id)) * C64::from(0.5);
            sup += term * C64::from(*r);
        }
        sup
    }

    /// Unique steady state, with the trace condition replacing the first
    /// row of the linear system.
    pub fn steady_state(&self) -> Result<Mat> {
        use faer::linalg::solvers::Solve;
        let d = self.dim;
        let sup = self.superoperator();
        let m = faer::Mat::<C64>::from_fn(d * d, d * d, |i, j| {
            if i == 0 {
                let on_diagonal = j % (d + 1) == 0;
                C64::new(if on_diagonal { 1.0 } else { 0.0 }, 0.0)
            } else {
                sup[(i, j)]
            }
        });
        let mut rhs = faer::Mat::<C64>::zeros(d * d, 1);
        rhs[(0, 0)] = C64::new(1.0, 0.0);
        let v = m.partial_piv_lu().solve(&rhs);
        let values: Vec<C64> = (0..d * d).map(|k| v[(k, 0)]).collect();
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::numerical("Liouvillian steady-state system is singular"));
        }
        let rho = Mat::from_column_slice(d, d, &values);
        Ok((&rho + rho.adjoint()) * C64::from(0.5))
    }

    /// Population of the highest retained Fock level.
    pub fn top_population(&self, rho: &Mat) -> f64 {
        let block = 1usize << self.n_spins;
        let start = self.cutoff * block;
        (start..start + block).map(|k| rho[(k, k)].re).sum()
    }

    /// Moments for spin 0 and the pair (0, 1); pair moments are zero when
    /// there is a single spin.
    pub fn moments(&self, rho: &Mat) -> MomentState {
        let t = |op: &Mat| trace_prod(op, rho);
        let ad = self.a.adjoint();
        let sp0 = self.sm[0].adjoint();
        let zero = C64::new(0.0, 0.0);
        let (sp_sm, sm_sm, z_sm, z_z) = if self.n_spins > 1 {
            (
                t(&(&sp0 * &self.sm[1])).re,
                t(&(&self.sm[0] * &self.sm[1])),
                t(&(&self.sz[0] * &self.sm[1])),
                t(&(&self.sz[0] * &self.sz[1])).re,
            )
        } else {
            (0.0, zero, zero, 0.0)
        };
        MomentState {
            a: t(&self.a),
            s: t(&self.sm[0]),
            z: t(&self.sz[0]).re,
            n: t(&(&ad * &self.a)).re,
            aa: t(&(&self.a * &self.a)),
            a_sp: t(&(&self.a * &sp0)),
            a_sm: t(&(&self.a * &self.sm[0])),
            a_z: t(&(&self.a * &self.sz[0])),
            sp_sm,
            sm_sm,
            z_sm,
            z_z,
        }
    }

    /// Exact third-order moments entering the second-order equations.
    #[cfg(test)]
    pub(crate) fn third_order(&self, rho: &Mat) -> ThirdOrder {
        assert!(self.n_spins > 1, "pair moments need two spins");
        let t = |op: Mat| trace_prod(&op, rho);
        let a = &self.a;
        let ad = a.adjoint();
        let (sm0, sm1) = (&self.sm[0], &self.sm[1]);
        let sp0 = sm0.adjoint();
        let (sz0, sz1) = (&self.sz[0], &self.sz[1]);
        ThirdOrder {
            ad_a_z: t(&ad * a * sz0).re,
            aa_z: t(a * a * sz0),
            aa_sp: t(a * a * &sp0),
            ad_a_sm: t(&ad * a * sm0),
            a_sp_z: t(a * &sp0 * sz1),
            a_z_sm: t(a * sz0 * sm1),
            a_sp_sm: t(a * &sp0 * sm1),
            ad_sm_sm: t(&ad * sm0 * sm1),
            a_z_z: t(a * sz0 * sz1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactSteady {
    pub moments: MomentState,
    pub top_fock_population: f64,
    /// False when the top Fock level holds more than 1e-8 of the population.
    pub cutoff_adequate: bool,
}

/// Steady moments of the full master equation for `n_spins` spins.
pub fn exact_oracle(
    n_spins: usize,
    cutoff: usize,
    params: &SystemParams,
    omega_s: f64,
    bath: ThermalBath,
    omega_p: f64,
) -> Result<ExactSteady> {
    let l = Liouvillian::new(n_spins, cutoff, params, omega_s, bath, omega_p)?;
    let rho = l.steady_state()?;
    let top = l.top_population(&rho);
    Ok(ExactSteady { moments: l.moments(&rho), top_fock_population: top, cutoff_adequate: top <= 1e-8 })
}
