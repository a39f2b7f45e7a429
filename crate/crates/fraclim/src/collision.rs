//! Tabulated linear BGK operator L f = ν(K f − f), K f = M φ·U_ν.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::params::{eval_collision_freq, eval_equilibrium, Conservation, ModelParams};
pub use crate::vgrid::Scalar;
use crate::vgrid::VelocityGrid;

#[derive(Debug, Clone)]
pub struct CollisionData {
    pub d: usize,
    pub p: usize,
    pub conservation: Conservation,
    pub grid: VelocityGrid,
    pub weights: Vec<f64>,
    pub m: Vec<f64>,
    pub nu: Vec<f64>,
    /// φ per node, row-major (node, component).
    pub phi: Vec<f64>,
    /// ζ per node, row-major.
    pub zeta: Vec<f64>,
    pub a: DMatrix<f64>,
    pub a_inv: DMatrix<f64>,
}

pub const MAX_CONDITION: f64 = 1e12;

pub fn assemble(params: &ModelParams, grid: &VelocityGrid) -> Result<CollisionData> {
    let d = params.d;
    assert_eq!(grid.d, d, "grid dimension must match params");
    let p = params.p();
    let n = grid.len();
    let mut m = Vec::with_capacity(n);
    let mut nu = Vec::with_capacity(n);
    let mut phi = Vec::with_capacity(n * p);
    let mut zeta = Vec::with_capacity(n * p);
    let energy = params.conservation == Conservation::MassMomentumEnergy;
    for i in 0..n {
        let v = grid.node(i);
        let mi = eval_equilibrium(params, v);
        let ni = eval_collision_freq(params, v);
        if !(mi.is_finite() && ni.is_finite()) {
            return Err(Error::NonFiniteIntegrand { node: i });
        }
        m.push(mi);
        nu.push(ni);
        phi.push(1.0);
        zeta.push(1.0);
        phi.extend_from_slice(v);
        zeta.extend_from_slice(v);
        if energy {
            let r2 = grid.speed2()[i];
            phi.push(0.5 * (r2 - d as f64));
            zeta.push((r2 - d as f64) / d as f64);
        }
    }
    let flat = grid.symmetric_sum_vec(p * p, |i, out: &mut [f64]| {
        let wi = nu[i] * m[i];
        let row = &phi[i * p..(i + 1) * p];
        for r in 0..p {
            for c in 0..p {
                out[r * p + c] += wi * row[r] * row[c];
            }
        }
    });
    let a = DMatrix::<f64>::from_row_slice(p, p, &flat);
    let eig = SymmetricEigen::new(a.clone());
    let (lo, hi) = eig.eigenvalues.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| (lo.min(x), hi.max(x.abs())));
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularA { condition });
    }
    let a_inv = a.clone().cholesky().ok_or(Error::SingularA { condition })?.inverse();
    Ok(CollisionData { d, p, conservation: params.conservation, grid: grid.clone(), weights: grid.weights().to_vec(), m, nu, phi, zeta, a, a_inv })
}

impl CollisionData {
    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn phi_row(&self, i: usize) -> &[f64] {
        &self.phi[i * self.p..(i + 1) * self.p]
    }

    pub fn zeta_row(&self, i: usize) -> &[f64] {
        &self.zeta[i * self.p..(i + 1) * self.p]
    }

    /// Index of the energy component, if present.
    pub fn energy_index(&self) -> Option<usize> {
        match self.conservation {
            Conservation::MassMomentumEnergy => Some(self.d + 1),
            Conservation::MassMomentum => None,
        }
    }

    fn apply_a_inv<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        (0..self.p)
            .map(|r| {
                let mut acc = T::zero();
                for (c, xc) in x.iter().enumerate() {
                    acc += *xc * self.a_inv[(r, c)];
                }
                acc
            })
            .collect()
    }

    /// Mφ·U at every node.
    pub fn macro_part<T: Scalar>(&self, u: &[T]) -> Vec<T> {
        (0..self.len())
            .map(|i| {
                let row = self.phi_row(i);
                let mut acc = T::zero();
                for (uj, pj) in u.iter().zip(row) {
                    acc += *uj * *pj;
                }
                acc * self.m[i]
            })
            .collect()
    }

    /// ‖ν^{1/2} K‖ in L²(M⁻¹): largest singular value from the tables.
    pub fn continuity_constant(&self) -> f64 {
        let p = self.p;
        let mut s = DMatrix::<f64>::zeros(p, p);
        for i in 0..self.len() {
            let wi = self.weights[i] * self.nu[i] * self.nu[i] * self.m[i];
            let row = self.phi_row(i);
            for r in 0..p {
                for c in 0..p {
                    s[(r, c)] += wi * row[r] * row[c];
                }
            }
        }
        let t = &self.a_inv * &s;
        let op = &t * &t;
        let ev = op.complex_eigenvalues();
        ev.iter().map(|z| z.norm()).fold(0.0, f64::max).sqrt()
    }
}

fn check_finite<T: Scalar>(f: &[T]) -> Result<()> {
    match f.iter().position(|x| !x.finite()) {
        Some(node) => Err(Error::NonFiniteIntegrand { node }),
        None => Ok(()),
    }
}

fn weighted_projection<T: Scalar>(f: &[T], cd: &CollisionData, table: &[f64], with_nu: bool) -> Result<Vec<T>> {
    assert_eq!(f.len(), cd.len());
    check_finite(f)?;
    let p = cd.p;
    Ok(cd.grid.symmetric_sum_vec(p, |i, out: &mut [T]| {
        let fi = if with_nu { f[i] * cd.nu[i] } else { f[i] };
        for (o, t) in out.iter_mut().zip(&table[i * p..(i + 1) * p]) {
            *o += fi * *t;
        }
    }))
}

/// U = quad(ζ f) = (ρ, m, θ), or (ρ, m) without energy.
pub fn moments<T: Scalar>(f: &[T], cd: &CollisionData) -> Result<Vec<T>> {
    weighted_projection(f, cd, &cd.zeta, false)
}

/// quad(φ f).
pub fn phi_moments<T: Scalar>(f: &[T], cd: &CollisionData) -> Result<Vec<T>> {
    weighted_projection(f, cd, &cd.phi, false)
}

/// quad(ν φ f).
pub fn nu_phi_moments<T: Scalar>(f: &[T], cd: &CollisionData) -> Result<Vec<T>> {
    weighted_projection(f, cd, &cd.phi, true)
}

/// U_ν = A⁻¹ quad(ν φ f).
pub fn moments_nu<T: Scalar>(f: &[T], cd: &CollisionData) -> Result<Vec<T>> {
    Ok(cd.apply_a_inv(&nu_phi_moments(f, cd)?))
}

pub fn apply_k<T: Scalar>(f: &[T], cd: &CollisionData) -> Result<Vec<T>> {
    Ok(cd.macro_part(&moments_nu(f, cd)?))
}

pub fn apply_l<T: Scalar>(f: &[T], cd: &CollisionData) -> Result<Vec<T>> {
    let kf = apply_k(f, cd)?;
    Ok(kf.into_iter().zip(f).zip(&cd.nu).map(|((k, f), nu)| (k - *f) * *nu).collect())
}

/// quad(Lf · f / M) for real f.
pub fn dissipation(f: &[f64], cd: &CollisionData) -> Result<f64> {
    let lf = apply_l(f, cd)?;
    Ok(cd.grid.symmetric_sum(|i| lf[i] * f[i] / cd.m[i]))
}

/// −quad(ν (f − Kf)² / M) for real f.
pub fn dissipation_rhs(f: &[f64], cd: &CollisionData) -> Result<f64> {
    let kf = apply_k(f, cd)?;
    Ok(-cd.grid.symmetric_sum(|i| cd.nu[i] * (f[i] - kf[i]).powi(2) / cd.m[i]))
}

/// Discrete L²(M⁻¹) norm of nodal values.
pub fn minv_norm<T: Scalar>(f: &[T], cd: &CollisionData) -> f64 {
    (0..cd.len()).map(|i| cd.weights[i] * f[i].norm_sqr() / cd.m[i]).sum::<f64>().sqrt()
}

/// Solve A x = b for a small right-hand side.
pub fn solve_a(cd: &CollisionData, b: &[f64]) -> Vec<f64> {
    let x = &cd.a_inv * DVector::from_column_slice(b);
    x.iter().cloned().collect()
}
