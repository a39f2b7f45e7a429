//! Weighted norms, micro–macro splits and the macroscopic residuals of a run.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::collision::{moments, moments_nu, CollisionData, Scalar};
use crate::kinetic::{PhaseField, Trajectory};
use crate::spectral::{ScalarField, VectorField};
use crate::{Error, Result};

/// f = Mφ·U_ν + g_ν = Mφ·U + g.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroMacro<T> {
    pub u_nu: Vec<T>,
    pub macro_nu: Vec<T>,
    pub g_nu: Vec<T>,
    pub u: Vec<T>,
    pub macro_u: Vec<T>,
    pub g: Vec<T>,
}

pub fn micro_macro<T: Scalar>(f: &[T], cd: &CollisionData) -> Result<MicroMacro<T>> {
    let u_nu = moments_nu(f, cd)?;
    let macro_nu = cd.macro_part(&u_nu);
    let g_nu = f.iter().zip(&macro_nu).map(|(a, b)| *a - *b).collect();
    let u = moments(f, cd)?;
    let macro_u = cd.macro_part(&u);
    let g = f.iter().zip(&macro_u).map(|(a, b)| *a - *b).collect();
    Ok(MicroMacro { u_nu, macro_nu, g_nu, u, macro_u, g })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormWeight {
    Minv,
    NuMinv,
    M,
}

/// Tables below this value are treated as underflowed.
pub const WEIGHT_FLOOR: f64 = 1e-300;
/// |f| above this is not allowed where the table underflows.
pub const UNDERFLOW_TOL: f64 = 1e-200;

fn node_weight(cd: &CollisionData, i: usize, weight: NormWeight, fi: f64) -> Result<f64> {
    let m = cd.m[i];
    match weight {
        NormWeight::M => Ok(m),
        NormWeight::Minv | NormWeight::NuMinv => {
            if m < WEIGHT_FLOOR {
                if fi > UNDERFLOW_TOL {
                    return Err(Error::WeightUnderflow { node: i });
                }
                return Ok(0.0);
            }
            let nu = if weight == NormWeight::NuMinv { cd.nu[i] } else { 1.0 };
            Ok(nu / m)
        }
    }
}

/// (∫ |f|² ω dv)^{1/2} for one node vector.
pub fn weighted_norm_nodes<T: Scalar>(f: &[T], cd: &CollisionData, weight: NormWeight) -> Result<f64> {
    let mut acc = 0.0;
    for (i, fi) in f.iter().enumerate() {
        let a = fi.norm_sqr();
        acc += cd.weights[i] * a * node_weight(cd, i, weight, a.sqrt())?;
    }
    Ok(acc.sqrt())
}

/// (∫∫ |f|² ω dv dx)^{1/2} over the box, by Parseval.
pub fn weighted_norm(f: &PhaseField, cd: &CollisionData, weight: NormWeight) -> Result<f64> {
    let mut acc = 0.0;
    for mode in 0..f.lattice.len() {
        acc += weighted_norm_nodes::<Complex64>(f.mode(mode), cd, weight)?.powi(2);
    }
    Ok((acc * f.lattice.volume()).sqrt())
}

/// m = solenoidal + ∇p.
pub fn leray_decompose(m: &VectorField) -> Result<(VectorField, ScalarField)> {
    let lat = m.lattice;
    if lat.d != 2 {
        return Err(Error::UnsupportedCombination("Leray decomposition needs d = 2".into()));
    }
    let mut p = ScalarField::zeros(lat);
    for idx in 0..lat.len() {
        let k = lat.wavevector(idx);
        let k2 = k[0] * k[0] + k[1] * k[1];
        if k2 == 0.0 {
            continue;
        }
        let dot = m.comps[0].coeffs[idx] * k[0] + m.comps[1].coeffs[idx] * k[1];
        p.coeffs[idx] = Complex64::new(0.0, -1.0) * dot / k2;
    }
    let solenoidal = m.sub(&VectorField::gradient(&p));
    Ok((solenoidal, p))
}

/// Relative slack applied to every bound check.
pub const BOUND_SLACK: f64 = 1e-8;

/// Residual series of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDiagnostics {
    pub epsilon: f64,
    pub gamma: f64,
    pub dt: f64,
    pub times: Vec<f64>,
    /// ‖f‖ in L²(M⁻¹) at the recorded times.
    pub f_norm: Vec<f64>,
    /// (∫₀ᵗ ‖g_ν‖² in L²(νM⁻¹))^{1/2} at the recorded times.
    pub g_nu_norm_accum: Vec<f64>,
    /// ‖ρ + θ‖ in L²_x (ζ-moments); empty without energy conservation.
    pub boussinesq_residual: Vec<f64>,
    /// ‖∫₀ᵗ (ρ_ν + θ_ν) dt‖ in L²_x, the time-integrated form tested against smooth functions.
    pub boussinesq_weak: Vec<f64>,
    /// ‖div m‖ in L²_x.
    pub incompressibility_residual: Vec<f64>,
    /// ‖U_ν − U‖ in L²_x over all components.
    pub u_vs_unu_gap: Vec<f64>,
    pub f_norm_steps: Vec<f64>,
    pub g_nu_accum_steps: Vec<f64>,
    pub slack: f64,
}

fn momentum(u: &[ScalarField], d: usize) -> VectorField {
    VectorField { lattice: u[0].lattice, comps: u[1..=d].to_vec() }
}

/// Assembles the residual series and checks the a priori bounds.
pub fn theorem_residuals(traj: &Trajectory, gamma: f64) -> Result<RunDiagnostics> {
    let diag = collect_residuals(traj, gamma);
    diag.check_bounds()?;
    Ok(diag)
}

/// Residual series without bound checks.
pub fn collect_residuals(traj: &Trajectory, gamma: f64) -> RunDiagnostics {
    let mut diag = RunDiagnostics {
        epsilon: traj.epsilon,
        gamma,
        dt: traj.dt,
        times: Vec::new(),
        f_norm: Vec::new(),
        g_nu_norm_accum: Vec::new(),
        boussinesq_residual: Vec::new(),
        boussinesq_weak: Vec::new(),
        incompressibility_residual: Vec::new(),
        u_vs_unu_gap: Vec::new(),
        f_norm_steps: traj.f_norm_steps.clone(),
        g_nu_accum_steps: traj.g_nu_accum_steps.clone(),
        slack: BOUND_SLACK,
    };
    for snap in &traj.snapshots {
        let d = snap.u[0].lattice.d;
        let p = snap.u.len();
        diag.times.push(snap.t);
        diag.f_norm.push(snap.f_norm);
        diag.g_nu_norm_accum.push(snap.g_nu_accum);
        if p == d + 2 {
            diag.boussinesq_residual.push(snap.u[0].add(&snap.u[d + 1]).l2_norm());
            diag.boussinesq_weak.push(snap.u_nu_integral[0].add(&snap.u_nu_integral[d + 1]).l2_norm());
        }
        diag.incompressibility_residual.push(momentum(&snap.u, d).divergence().l2_norm());
        let gap: f64 = snap.u.iter().zip(&snap.u_nu).map(|(a, b)| b.sub(a).l2_norm().powi(2)).sum();
        diag.u_vs_unu_gap.push(gap.sqrt());
    }
    diag
}

impl RunDiagnostics {
    /// Step-wise monotonicity of ‖f‖ and ∫‖g_ν‖² ≤ ε^γ ‖f_in‖².
    pub fn check_bounds(&self) -> Result<()> {
        let all = [
            &self.f_norm,
            &self.g_nu_norm_accum,
            &self.boussinesq_residual,
            &self.boussinesq_weak,
            &self.incompressibility_residual,
            &self.u_vs_unu_gap,
        ];
        for series in all {
            if let Some(j) = series.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(Error::BoundViolation { bound: "nonnegative finite residual".into(), time: self.times.get(j).copied().unwrap_or(f64::NAN), margin: f64::NAN });
            }
        }
        for (s, w) in self.f_norm_steps.windows(2).enumerate() {
            if w[1] > w[0] * (1.0 + self.slack) {
                return Err(Error::BoundViolation {
                    bound: "‖f(t)‖ non-increasing".into(),
                    time: (s + 1) as f64 * self.dt,
                    margin: w[1] / w[0] - 1.0,
                });
            }
        }
        let Some(&f0) = self.f_norm_steps.first() else { return Ok(()) };
        let cap = self.epsilon.powf(self.gamma / 2.0) * f0 * (1.0 + self.slack);
        for (s, g) in self.g_nu_accum_steps.iter().enumerate() {
            if *g > cap {
                return Err(Error::BoundViolation {
                    bound: "(∫‖g_ν‖²)^{1/2} ≤ ε^{γ/2}‖f_in‖".into(),
                    time: s as f64 * self.dt,
                    margin: g / cap - 1.0,
                });
            }
        }
        Ok(())
    }

    /// Ratio of the accumulated g_ν norm to ε^{γ/2}‖f_in‖ at the last step.
    pub fn g_nu_bound_ratio(&self) -> f64 {
        let f0 = self.f_norm_steps.first().copied().unwrap_or(0.0);
        let g = self.g_nu_accum_steps.last().copied().unwrap_or(0.0);
        g / (self.epsilon.powf(self.gamma / 2.0) * f0)
    }
}

/// Constants C_j = value_j / ε_j^p and their spread max/min − 1.
pub fn bound_constants(values: &[f64], eps: &[f64], power: f64) -> (Vec<f64>, f64) {
    let c: Vec<f64> = values.iter().zip(eps).map(|(v, e)| v / e.powf(power)).collect();
    let max = c.iter().cloned().fold(f64::MIN, f64::max);
    let min = c.iter().cloned().fold(f64::MAX, f64::min);
    let spread = if min > 0.0 { max / min - 1.0 } else { f64::INFINITY };
    (c, spread)
}
