//! Fractional Laplacian on the periodic box, the limiting fractional heat and
//! Stokes solvers, and the diffusivity constants measured from the kinetic
//! dispersion relation.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma as gamma_fn;

use crate::collision::CollisionData;
use crate::kinetic::{slow_spectrum, HydroMode};
use crate::params::{stable_radial_moment, Conservation, Family, ModelParams};
use crate::quadrature::composite_legendre;
use crate::spectral::{Lattice, ScalarField, VectorField};
use crate::vgrid::VelocityGrid;
use crate::{Error, Result};

/// Multiplies mode k by |k|^γ.
pub fn frac_laplacian_spectral(field: &ScalarField, gamma: f64) -> ScalarField {
    assert!(gamma > 0.0 && gamma <= 2.0, "γ must lie in (0, 2]");
    let lat = field.lattice;
    let coeffs = (0..lat.len())
        .map(|i| {
            let k = lat.wavenumber(i);
            if k == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                field.coeffs[i] * k.powf(gamma)
            }
        })
        .collect();
    ScalarField { lattice: lat, coeffs }
}

/// C_{d,γ} = 4^{γ/2} Γ((d+γ)/2) / (π^{d/2} |Γ(−γ/2)|).
pub fn singular_constant(d: usize, gamma: f64) -> f64 {
    let df = d as f64;
    4f64.powf(gamma / 2.0) * gamma_fn((df + gamma) / 2.0)
        / (std::f64::consts::PI.powf(df / 2.0) * gamma_fn(-gamma / 2.0).abs())
}

/// Radius below which the second difference is replaced by its quadratic model.
const INNER_CUTOFF: f64 = 1e-3;
/// Outer smooth cutoff radius (the window decays over [R, 2R]).
const OUTER_RADIUS: f64 = 16.0;
/// Relative tolerance of the refinement loop.
pub const SINGULAR_TOL: f64 = 1e-6;
const MAX_REFINEMENTS: usize = 5;

/// C^∞ window equal to 1 on [0, 1] and 0 on [2, ∞).
fn window(t: f64) -> f64 {
    if t <= 1.0 {
        return 1.0;
    }
    if t >= 2.0 {
        return 0.0;
    }
    let u = t - 1.0;
    let a = (-1.0 / u).exp();
    let b = (-1.0 / (1.0 - u)).exp();
    b / (a + b)
}

struct SingularRule {
    /// Inner nodes in r on [δ, 1] with weights including r^{-1-γ}.
    inner: Vec<(f64, f64)>,
    /// Outer nodes in r on [1, 2R] with weights including r^{-1-γ} and the window.
    outer: Vec<(f64, f64)>,
    /// Angles in [0, π) with trapezoid weights (d = 2 only).
    angles: Vec<(f64, f64)>,
}

impl SingularRule {
    fn new(d: usize, gamma: f64, level: usize) -> Self {
        let q = 1.0 / (2.0 - gamma);
        let s0 = INNER_CUTOFF.powf(1.0 / q);
        let npan_in = 8 << level;
        let edges: Vec<f64> = (0..=npan_in).map(|j| s0 + (1.0 - s0) * j as f64 / npan_in as f64).collect();
        let (s, w) = composite_legendre(&edges, 8);
        // r = s^q, r^{-1-γ} dr = q s^{-qγ-1} ds
        let inner = s.iter().zip(&w).map(|(s, w)| (s.powf(q), w * q * s.powf(-q * gamma - 1.0))).collect();
        let width = 0.25 / (1 << level) as f64;
        let npan_out = ((2.0 * OUTER_RADIUS - 1.0) / width).round() as usize;
        let edges: Vec<f64> = (0..=npan_out).map(|j| 1.0 + j as f64 * width).collect();
        let (r, w) = composite_legendre(&edges, 8);
        let outer = r
            .iter()
            .zip(&w)
            .map(|(r, w)| (*r, w * r.powf(-1.0 - gamma) * window(r / OUTER_RADIUS)))
            .collect();
        let angles = if d == 2 {
            let n = 256 << level;
            let h = std::f64::consts::PI / n as f64;
            (0..n).map(|j| (j as f64 * h, h)).collect()
        } else {
            vec![(0.0, 1.0)]
        };
        SingularRule { inner, outer, angles }
    }
}

/// Integral over directions u ∈ [0, π) (or the single direction in d = 1) and
/// radii of r^{-1-γ} times the second difference, for one point x.
fn singular_at<F: Fn([f64; 2]) -> f64>(h: &F, x: [f64; 2], mean: f64, gamma: f64, rule: &SingularRule) -> f64 {
    let hx = h(x);
    let mut total = 0.0;
    for &(theta, wa) in &rule.angles {
        let dir = [theta.cos(), theta.sin()];
        let pair = |r: f64| h([x[0] + r * dir[0], x[1] + r * dir[1]]) + h([x[0] - r * dir[0], x[1] - r * dir[1]]);
        let sd = pair(INNER_CUTOFF) - 2.0 * hx;
        let mut acc = sd / (INNER_CUTOFF * INNER_CUTOFF) * INNER_CUTOFF.powf(2.0 - gamma) / (2.0 - gamma);
        for &(r, w) in &rule.inner {
            acc += w * (pair(r) - 2.0 * hx);
        }
        for &(r, w) in &rule.outer {
            acc += w * (pair(r) - 2.0 * mean);
        }
        acc += 2.0 * (mean - hx) / gamma;
        total += wa * acc;
    }
    total
}

/// Box mean of h by the trapezoid rule (exact for trigonometric polynomials of
/// degree below 128).
fn box_mean<F: Fn([f64; 2]) -> f64>(h: &F, lattice: &Lattice) -> f64 {
    let fine = Lattice::new(lattice.d, 128, lattice.length);
    (0..fine.len()).map(|i| h(fine.point(i))).sum::<f64>() / fine.len() as f64
}

/// (−Δ)^{γ/2} h at the lattice points by the principal-value integral
/// −C_{d,γ} ∫ r^{-1-γ} (h(x+rω) + h(x−rω) − 2h(x)) dr dω (ω over a half sphere).
pub fn frac_laplacian_singular<F>(h: F, gamma: f64, lattice: &Lattice) -> Result<Vec<f64>>
where
    F: Fn([f64; 2]) -> f64 + Sync,
{
    if !(gamma > 1.0 && gamma < 2.0) {
        return Err(Error::RegimeViolation("1<γ<2".into()));
    }
    let d = lattice.d;
    let cst = singular_constant(d, gamma);
    let mean = box_mean(&h, lattice);
    let scale = (0..lattice.len()).map(|i| h(lattice.point(i)).abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let eval = |level: usize| -> Vec<f64> {
        let rule = SingularRule::new(d, gamma, level);
        (0..lattice.len())
            .into_par_iter()
            .map(|i| -cst * singular_at(&h, lattice.point(i), mean, gamma, &rule))
            .collect()
    };
    let mut prev = eval(0);
    for level in 1..=MAX_REFINEMENTS {
        let next = eval(level);
        let change = next.iter().zip(&prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let size = next.iter().map(|a| a.abs()).fold(0.0, f64::max).max(scale);
        if change <= SINGULAR_TOL * size {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::QuadratureDiverged(format!(
        "singular-integral Laplacian did not reach {SINGULAR_TOL:e} relative after {MAX_REFINEMENTS} refinements"
    )))
}

/// Exact per-mode solution of ∂t θ = −κ(−Δ)^{γ/2} θ.
pub fn solve_fractional_heat(theta0: &ScalarField, kappa: f64, gamma: f64, t: f64) -> ScalarField {
    assert!(kappa > 0.0 && t >= 0.0, "need κ > 0 and t ≥ 0");
    let lat = theta0.lattice;
    let coeffs = (0..lat.len())
        .map(|i| theta0.coeffs[i] * (-kappa * lat.wavenumber(i).powf(gamma) * t).exp())
        .collect();
    ScalarField { lattice: lat, coeffs }
}

/// Tolerance on the divergence of Stokes input data.
pub const DIVERGENCE_TOL: f64 = 1e-10;

/// Leray projection P_k = I − k⊗k/|k|² applied mode by mode.
pub fn leray_project(m: &VectorField) -> VectorField {
    let lat = m.lattice;
    let mut out = m.clone();
    for idx in 0..lat.len() {
        let k = lat.wavevector(idx);
        let k2: f64 = k[..lat.d].iter().map(|x| x * x).sum();
        if k2 == 0.0 {
            continue;
        }
        let dot: Complex64 = (0..lat.d).map(|j| m.comps[j].coeffs[idx] * k[j]).sum();
        for j in 0..lat.d {
            out.comps[j].coeffs[idx] -= dot * (k[j] / k2);
        }
    }
    out
}

/// Exact solution of ∂t m = −κ(−Δ)^{γ/2} m + ∇p, div m = 0.
pub fn solve_fractional_stokes(m0: &VectorField, kappa: f64, gamma: f64, t: f64) -> Result<VectorField> {
    if m0.lattice.d != 2 {
        return Err(Error::UnsupportedCombination("fractional Stokes needs d = 2".into()));
    }
    let div = m0.divergence().l2_norm();
    let size = m0.l2_norm().max(f64::MIN_POSITIVE);
    if div > DIVERGENCE_TOL * size.max(1.0) {
        return Err(Error::NotDivergenceFree(div));
    }
    let projected = leray_project(m0);
    Ok(VectorField {
        lattice: m0.lattice,
        comps: projected.comps.iter().map(|c| solve_fractional_heat(c, kappa, gamma, t)).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Theta,
    Momentum,
}

impl Branch {
    /// θ-branch when energy is conserved, otherwise the transverse momentum branch.
    pub fn default_for(params: &ModelParams) -> Branch {
        match params.conservation {
            Conservation::MassMomentumEnergy => Branch::Theta,
            Conservation::MassMomentum => Branch::Momentum,
        }
    }
}

impl std::str::FromStr for Branch {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theta" => Ok(Branch::Theta),
            "momentum" => Ok(Branch::Momentum),
            other => Err(Error::InvalidConfig(format!("unknown branch `{other}`"))),
        }
    }
}

/// Symbol sample of one branch at wavenumber k (wave vector along e₁).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchSample {
    pub k: f64,
    pub lambda: Complex64,
    pub score: f64,
    pub runner_up: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaFit {
    pub gamma_fit: f64,
    pub kappa_fit: f64,
    pub branch: Branch,
    /// Max relative deviation of −Re λ from κ k^γ over the fitted points.
    pub residual: f64,
    /// κ fitted with γ held at the model value.
    pub kappa_at_model_gamma: f64,
    pub residual_at_model_gamma: f64,
    /// c₀Γ(γ+1)/(1−β) for the heavy-tail family.
    pub analytic_candidate: Option<f64>,
    pub samples: Vec<BranchSample>,
}

fn branch_score(mode: &HydroMode, branch: Branch, d: usize, dir: [f64; 2]) -> f64 {
    let u = &mode.u;
    let tiny = f64::MIN_POSITIVE;
    match branch {
        Branch::Theta => u[d + 1].norm() / u[1..=d].iter().zip(dir).map(|(x, e)| x * e).sum::<Complex64>().norm().max(tiny),
        Branch::Momentum => {
            let transverse = u[2] * dir[0] - u[1] * dir[1];
            let longitudinal = u[1] * dir[0] + u[2] * dir[1];
            let others: f64 = u[0].norm_sqr() + longitudinal.norm_sqr() + u[3..].iter().map(|x| x.norm_sqr()).sum::<f64>();
            transverse.norm() / others.sqrt().max(tiny)
        }
    }
}

/// Branch eigenvalue at wave vector k e₁ with its separation scores.
pub fn branch_sample(k: f64, branch: Branch, cd: &CollisionData, grid: &VelocityGrid) -> Result<BranchSample> {
    branch_sample_along(k, [1.0, 0.0], branch, cd, grid)
}

/// Branch eigenvalue at wave vector k·dir (unit `dir`, second entry ignored for d = 1).
pub fn branch_sample_along(
    k: f64,
    dir: [f64; 2],
    branch: Branch,
    cd: &CollisionData,
    grid: &VelocityGrid,
) -> Result<BranchSample> {
    match (branch, cd.conservation, cd.d) {
        (Branch::Theta, Conservation::MassMomentum, _) => {
            return Err(Error::UnsupportedCombination("θ-branch needs energy conservation".into()))
        }
        (Branch::Momentum, _, 1) => return Err(Error::UnsupportedCombination("momentum branch needs d = 2".into())),
        _ => {}
    }
    let dir = if cd.d == 1 { [1.0, 0.0] } else { dir };
    let norm = (dir[0] * dir[0] + dir[1] * dir[1]).sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::InvalidConfig("wave direction must be nonzero".into()));
    }
    let dir = [dir[0] / norm, dir[1] / norm];
    let kv: Vec<f64> = dir[..cd.d].iter().map(|e| k * e).collect();
    let modes = slow_spectrum(&kv, cd, grid)?;
    let mut scored: Vec<(f64, Complex64)> = modes.iter().map(|m| (branch_score(m, branch, cd.d, dir), m.lambda)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (best, lambda) = scored[0];
    let second = scored.get(1).map_or(0.0, |s| s.0);
    if best < 2.0 * second {
        return Err(Error::BranchAmbiguous { best, second });
    }
    Ok(BranchSample { k, lambda, score: best, runner_up: second })
}

/// Least-squares fit of log(−Re λ) = log κ + γ log k.
fn power_fit(samples: &[BranchSample]) -> (f64, f64) {
    let n = samples.len() as f64;
    let xs: Vec<f64> = samples.iter().map(|s| s.k.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| (-s.lambda.re).ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let g = sxy / sxx;
    (g, (my - g * mx).exp())
}

/// Least-squares κ at fixed γ: log κ = mean(log(−Re λ) − γ log k).
pub fn kappa_at_gamma(samples: &[BranchSample], gamma: f64) -> f64 {
    let n = samples.len() as f64;
    (samples.iter().map(|s| (-s.lambda.re).ln() - gamma * s.k.ln()).sum::<f64>() / n).exp()
}

fn max_relative_deviation(samples: &[BranchSample], gamma: f64, kappa: f64) -> f64 {
    samples
        .iter()
        .map(|s| (kappa * s.k.powf(gamma) / (-s.lambda.re) - 1.0).abs())
        .fold(0.0, f64::max)
}

fn check_klist(k_list: &[f64]) -> Result<()> {
    if k_list.len() < 4 {
        return Err(Error::InvalidConfig("k_list needs at least 4 points".into()));
    }
    if k_list.iter().any(|k| !(*k > 0.0 && *k <= 1.0)) {
        return Err(Error::InvalidConfig("k_list must lie in (0, 1]".into()));
    }
    let ratios: Vec<f64> = k_list.windows(2).map(|w| w[1] / w[0]).collect();
    if ratios.iter().any(|r| (r - ratios[0]).abs() > 1e-9 * ratios[0] || *r == 1.0) {
        return Err(Error::InvalidConfig("k_list must be geometrically spaced".into()));
    }
    Ok(())
}

/// Fits the branch dispersion relation −Re λ(k) ≈ κ k^γ over `k_list` (wave vectors along e₁).
pub fn estimate_kappa(
    params: &ModelParams,
    cd: &CollisionData,
    grid: &VelocityGrid,
    k_list: &[f64],
    branch: Branch,
) -> Result<KappaFit> {
    estimate_kappa_along(params, cd, grid, k_list, [1.0, 0.0], branch)
}

/// Same fit with wave vectors along `dir`.
pub fn estimate_kappa_along(
    params: &ModelParams,
    cd: &CollisionData,
    grid: &VelocityGrid,
    k_list: &[f64],
    dir: [f64; 2],
    branch: Branch,
) -> Result<KappaFit> {
    check_klist(k_list)?;
    let samples: Vec<BranchSample> =
        k_list.par_iter().map(|k| branch_sample_along(*k, dir, branch, cd, grid)).collect::<Result<Vec<_>>>()?;
    if samples.iter().any(|s| !(s.lambda.re < 0.0)) {
        return Err(Error::EigSolveFailure("branch eigenvalue is not damped".into()));
    }
    let (gamma_fit, kappa_fit) = power_fit(&samples);
    let kappa_model = kappa_at_gamma(&samples, params.gamma);
    Ok(KappaFit {
        gamma_fit,
        kappa_fit,
        branch,
        residual: max_relative_deviation(&samples, gamma_fit, kappa_fit),
        kappa_at_model_gamma: kappa_model,
        residual_at_model_gamma: max_relative_deviation(&samples, params.gamma, kappa_model),
        analytic_candidate: analytic_candidate(params),
        samples,
    })
}

/// c₀Γ(γ+1)/(1−β) for heavy-tail parameters.
pub fn analytic_candidate(params: &ModelParams) -> Option<f64> {
    (params.family == Family::HeavyTail && !params.unit_frequency)
        .then(|| params.c0 * gamma_fn(params.gamma + 1.0) / (1.0 - params.beta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassicalCoefficients {
    /// ∫ v₁²v₂² M/ν (d = 2 only).
    pub mu0: Option<f64>,
    /// ∫ |v|²(|v|²−(d+2))²/(4d) M/ν.
    pub kappa0: f64,
}

impl ClassicalCoefficients {
    /// Diffusivity of the temperature branch, κ₀/(1 + d/2).
    pub fn thermal_diffusivity(&self, d: usize) -> f64 {
        self.kappa0 / (1.0 + d as f64 / 2.0)
    }
}

/// Classical viscosity and conductivity integrals, checked for finiteness.
pub fn classical_coefficients(params: &ModelParams) -> Result<ClassicalCoefficients> {
    let d = params.d;
    let df = d as f64;
    let w = |r: f64| params.equilibrium_radial(r) / params.collision_freq_radial(r);
    let kappa0 = stable_radial_moment(params, "κ₀ integrand |v|²(|v|²−(d+2))² M/ν", |r| {
        let r2 = r * r;
        r2 * (r2 - (df + 2.0)).powi(2) / (4.0 * df) * w(r)
    })?;
    if !(kappa0 > 0.0) {
        return Err(Error::MomentDiverged { what: "κ₀ is not positive".into(), change: kappa0 });
    }
    let mu0 = if d == 2 {
        // angular mean of cos²θ sin²θ is 1/8
        Some(stable_radial_moment(params, "μ₀ integrand v₁²v₂² M/ν", |r| r.powi(4) / 8.0 * w(r))?)
    } else {
        None
    };
    Ok(ClassicalCoefficients { mu0, kappa0 })
}

/// Geometric list of `n` wavenumbers from `kmin` to `kmax`.
pub fn geometric_klist(kmin: f64, kmax: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && kmin > 0.0 && kmax > kmin);
    let r = (kmax / kmin).powf(1.0 / (n - 1) as f64);
    (0..n).map(|j| kmin * r.powi(j as i32)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::assemble;
    use crate::params::{validate_assumptions, RawParams};
    use crate::vgrid::build_grid;

    fn cos_field(lat: Lattice, k: f64) -> ScalarField {
        ScalarField::from_fn(lat, |x| (k * x[0]).cos())
    }

    #[test]
    fn spectral_multiplier_on_cosine() {
        let lat = Lattice::periodic(1, 16);
        let out = frac_laplacian_spectral(&cos_field(lat, 2.0), 1.5);
        let want = cos_field(lat, 2.0).scaled(2f64.powf(1.5));
        assert!(out.sub(&want).l2_norm() < 1e-12);
    }

    #[test]
    fn spectral_multiplier_kills_constants_and_matches_laplacian() {
        let lat = Lattice::periodic(2, 8);
        let c = ScalarField::from_fn(lat, |_| 3.0);
        assert!(frac_laplacian_spectral(&c, 1.3).l2_norm() < 1e-14);
        let h = ScalarField::from_fn(lat, |x| x[0].sin() * (2.0 * x[1]).cos());
        let lap = frac_laplacian_spectral(&h, 2.0);
        assert!(lap.sub(&h.scaled(5.0)).l2_norm() < 1e-12 * h.l2_norm());
    }

    #[test]
    fn singular_constant_matches_equivalent_form() {
        for d in [1, 2] {
            for g in [1.2, 1.5, 1.8] {
                let df = d as f64;
                let alt = g * 2f64.powf(g - 1.0) * gamma_fn((df + g) / 2.0)
                    / (std::f64::consts::PI.powf(df / 2.0) * gamma_fn(1.0 - g / 2.0));
                assert!((singular_constant(d, g) / alt - 1.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn singular_matches_spectral_on_cosines() {
        let lat = Lattice::periodic(1, 8);
        let out = frac_laplacian_singular(|x| (3.0 * x[0]).cos() + x[0].cos(), 1.2, &lat).unwrap();
        for (i, v) in out.iter().enumerate() {
            let x = lat.point(i)[0];
            let want = x.cos() + 3f64.powf(1.2) * (3.0 * x).cos();
            assert!((v - want).abs() < 1e-4 * 3f64.powf(1.2), "{v} vs {want}");
        }
    }

    #[test]
    fn singular_of_constant_is_zero() {
        let lat = Lattice::periodic(2, 4);
        let out = frac_laplacian_singular(|_| 2.5, 1.5, &lat).unwrap();
        assert!(out.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn heat_solver_decays_unit_mode() {
        let lat = Lattice::periodic(1, 8);
        let out = solve_fractional_heat(&cos_field(lat, 1.0), 1.0, 1.5, 1.0);
        assert!(out.sub(&cos_field(lat, 1.0).scaled((-1f64).exp())).l2_norm() < 1e-14);
    }

    #[test]
    fn heat_solver_is_a_semigroup_and_conserves_mass() {
        let lat = Lattice::periodic(2, 8);
        let h = ScalarField::from_fn(lat, |x| 1.0 + x[0].sin() + (x[0] + 2.0 * x[1]).cos());
        let a = solve_fractional_heat(&solve_fractional_heat(&h, 0.7, 1.4, 0.3), 0.7, 1.4, 0.2);
        let b = solve_fractional_heat(&h, 0.7, 1.4, 0.5);
        assert!(a.sub(&b).l2_norm() < 1e-14);
        assert!((b.coeffs[0] - h.coeffs[0]).norm() == 0.0);
    }

    #[test]
    fn stokes_solver_examples() {
        let lat = Lattice::periodic(2, 8);
        let psi = ScalarField::from_fn(lat, |x| x[0].sin() * x[1].sin());
        let m = VectorField::from_stream_function(&psi);
        let out = solve_fractional_stokes(&m, 1.0, 1.5, 0.4).unwrap();
        assert!(out.divergence().l2_norm() < 1e-12);
        let shear = VectorField { lattice: lat, comps: vec![ScalarField::from_fn(lat, |x| x[1].sin()), ScalarField::zeros(lat)] };
        let out = solve_fractional_stokes(&shear, 1.0, 1.5, 1.0).unwrap();
        assert!(out.sub(&VectorField { lattice: lat, comps: vec![shear.comps[0].scaled((-1f64).exp()), ScalarField::zeros(lat)] }).l2_norm() < 1e-13);
        let grad = VectorField::gradient(&ScalarField::from_fn(lat, |x| x[0].cos()));
        assert!(matches!(solve_fractional_stokes(&grad, 1.0, 1.5, 1.0), Err(Error::NotDivergenceFree(_))));
        assert!(leray_project(&grad).l2_norm() < 1e-13);
    }

    #[test]
    fn leray_is_idempotent() {
        let lat = Lattice::periodic(2, 8);
        let m = VectorField {
            lattice: lat,
            comps: vec![
                ScalarField::from_fn(lat, |x| (x[0] + x[1]).sin() + x[1].cos()),
                ScalarField::from_fn(lat, |x| (2.0 * x[0]).cos() * x[1].sin()),
            ],
        };
        let p = leray_project(&m);
        assert!(leray_project(&p).sub(&p).l2_norm() < 1e-12 * m.l2_norm());
        assert!(p.divergence().l2_norm() < 1e-12 * m.l2_norm());
    }

    #[test]
    fn classical_coefficients_of_maxwellian() {
        let c1 = classical_coefficients(&ModelParams::classical_control(1)).unwrap();
        assert!((c1.kappa0 - 1.5).abs() < 1e-8);
        let c2 = classical_coefficients(&ModelParams::classical_control(2)).unwrap();
        assert!((c2.mu0.unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn classical_coefficients_diverge_for_heavy_tail() {
        let raw = RawParams::heavy_tail(Conservation::MassMomentumEnergy, 1, 5.5, 0.0);
        let p = crate::params::calibrate_moments(
            &validate_assumptions(&raw).unwrap(),
            &build_grid(1, validate_assumptions(&raw).unwrap().default_grid_spec()).unwrap(),
        )
        .unwrap();
        assert!(matches!(classical_coefficients(&p), Err(Error::MomentDiverged { .. })));
    }

    #[test]
    fn classical_symbol_gives_quadratic_exponent() {
        let p = ModelParams::classical_control(1);
        let g = build_grid(1, p.default_grid_spec()).unwrap();
        let cd = assemble(&p, &g).unwrap();
        let fit = estimate_kappa(&p, &cd, &g, &geometric_klist(1.0 / 64.0, 1.0 / 8.0, 4), Branch::Theta).unwrap();
        assert!((fit.gamma_fit - 2.0).abs() < 0.05, "{fit:?}");
        let pred = classical_coefficients(&p).unwrap().thermal_diffusivity(1);
        assert!((fit.kappa_fit / pred - 1.0).abs() < 0.1);
    }

    #[test]
    fn klist_validation() {
        assert!(check_klist(&[0.1, 0.2, 0.4]).is_err());
        assert!(check_klist(&[0.1, 0.2, 0.4, 1.6]).is_err());
        assert!(check_klist(&geometric_klist(0.01, 0.1, 5)).is_ok());
    }
}
