//! Auxiliary function χ^ε solving νχ − εv·∇χ = νφ and the singular-integral
//! limits it generates.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collision::CollisionData;
use crate::fractional::frac_laplacian_spectral;
use crate::params::{gaussian_radius, Conservation, Family, ModelParams};
use crate::quadrature::{composite_legendre, LaguerreRule};
use crate::spectral::{Lattice, ScalarField};
use crate::vgrid::VelocityGrid;
use crate::{Error, Result};

/// One term a cos(k·x) + b sin(k·x).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierTerm {
    pub k: [f64; 2],
    pub cos: f64,
    pub sin: f64,
}

/// Smooth test function c + g·x + Σ (a cos(k·x) + b sin(k·x)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxTestFunction {
    pub d: usize,
    pub constant: f64,
    pub slope: [f64; 2],
    pub terms: Vec<FourierTerm>,
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

impl AuxTestFunction {
    /// Σ_j a_j cos(j x₁).
    pub fn from_cosines(d: usize, amps: &[f64]) -> Self {
        let terms = amps
            .iter()
            .enumerate()
            .filter(|(_, a)| **a != 0.0)
            .map(|(j, a)| FourierTerm { k: [(j + 1) as f64, 0.0], cos: *a, sin: 0.0 })
            .collect();
        AuxTestFunction { d, constant: 0.0, slope: [0.0; 2], terms }
    }

    pub fn constant(d: usize, c: f64) -> Self {
        AuxTestFunction { d, constant: c, slope: [0.0; 2], terms: Vec::new() }
    }

    pub fn linear(d: usize, c: f64, slope: [f64; 2]) -> Self {
        AuxTestFunction { d, constant: c, slope, terms: Vec::new() }
    }

    pub fn is_periodic(&self) -> bool {
        self.slope == [0.0; 2]
    }

    pub fn value(&self, x: [f64; 2]) -> f64 {
        self.terms.iter().fold(self.constant + dot(self.slope, x), |acc, t| {
            let ph = dot(t.k, x);
            acc + t.cos * ph.cos() + t.sin * ph.sin()
        })
    }

    pub fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        self.terms.iter().fold(self.slope, |acc, t| {
            let ph = dot(t.k, x);
            let s = -t.cos * ph.sin() + t.sin * ph.cos();
            [acc[0] + s * t.k[0], acc[1] + s * t.k[1]]
        })
    }

    pub fn hessian(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
        let mut h = [[0.0; 2]; 2];
        for t in &self.terms {
            let ph = dot(t.k, x);
            let s = -(t.cos * ph.cos() + t.sin * ph.sin());
            for i in 0..2 {
                for j in 0..2 {
                    h[i][j] += s * t.k[i] * t.k[j];
                }
            }
        }
        h
    }

    /// Upper bound of |φ| used as a residual scale.
    fn amplitude(&self) -> f64 {
        self.constant.abs() + self.terms.iter().map(|t| t.cos.hypot(t.sin)).sum::<f64>()
    }

    fn gradient_amplitude(&self) -> f64 {
        self.slope[0].hypot(self.slope[1])
            + self.terms.iter().map(|t| t.cos.hypot(t.sin) * t.k[0].hypot(t.k[1])).sum::<f64>()
    }

    /// ∫₀^∞ e^{-s} φ(x + b s) ds in closed form.
    pub fn resolvent(&self, x: [f64; 2], b: [f64; 2]) -> f64 {
        self.terms.iter().fold(self.constant + dot(self.slope, x) + dot(self.slope, b), |acc, t| {
            let ph = Complex64::new(0.0, dot(t.k, x)).exp();
            let r = ph / Complex64::new(1.0, -dot(t.k, b));
            acc + t.cos * r.re + t.sin * r.im
        })
    }

    /// Samples on the lattice points.
    pub fn samples(&self, lattice: &Lattice) -> Vec<f64> {
        (0..lattice.len()).map(|i| self.value(lattice.point(i))).collect()
    }
}

/// Default size of the exponential-weight rule.
pub const CHI_NODES: usize = 64;
/// Largest exponential-weight rule tried before the closed form takes over.
pub const CHI_MAX_NODES: usize = 128;
/// Relative tolerance on the defining-equation residual.
pub const CHI_TOL: f64 = 1e-9;

/// How χ^ε was obtained at one point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChiMethod {
    Laguerre(usize),
    Resolvent,
}

/// Pre-built exponential-weight rules.
#[derive(Debug, Clone)]
pub struct ChiEvaluator {
    rules: Vec<LaguerreRule>,
}

impl Default for ChiEvaluator {
    fn default() -> Self {
        Self::new()
    }
}

impl ChiEvaluator {
    pub fn new() -> Self {
        let mut rules = Vec::new();
        let mut n = CHI_NODES;
        while n <= CHI_MAX_NODES {
            rules.push(LaguerreRule::new(n));
            n *= 2;
        }
        ChiEvaluator { rules }
    }

    /// χ and ∇χ with the rule of the given index.
    fn quadrature(&self, phi: &AuxTestFunction, x: [f64; 2], b: [f64; 2], level: usize) -> (f64, [f64; 2]) {
        let rule = &self.rules[level];
        let mut chi = 0.0;
        let mut grad = [0.0; 2];
        for (s, w) in rule.nodes.iter().zip(&rule.weights) {
            let y = [x[0] + b[0] * s, x[1] + b[1] * s];
            chi += w * phi.value(y);
            let g = phi.gradient(y);
            grad[0] += w * g[0];
            grad[1] += w * g[1];
        }
        (chi, grad)
    }

    /// χ^ε = ∫₀^∞ e^{-s} φ(x + εvs/ν) ds with the rule doubled until
    /// ν(χ − φ) − εv·∇χ vanishes to tolerance; the closed form is used when
    /// the largest rule still fails.
    pub fn eval(&self, phi: &AuxTestFunction, eps: f64, nu: f64, v: [f64; 2], x: [f64; 2]) -> (f64, ChiMethod) {
        if eps == 0.0 {
            return (phi.value(x), ChiMethod::Laguerre(0));
        }
        let b = [eps * v[0] / nu, eps * v[1] / nu];
        let bn = b[0].hypot(b[1]);
        let scale = phi.amplitude() + bn * phi.gradient_amplitude() + f64::MIN_POSITIVE;
        let phx = phi.value(x);
        for (level, rule) in self.rules.iter().enumerate() {
            let (chi, grad) = self.quadrature(phi, x, b, level);
            // divided by ν: (χ − φ) − b·∇χ
            let residual = (chi - phx - dot(b, grad)).abs();
            if residual <= CHI_TOL * scale {
                return (chi, ChiMethod::Laguerre(rule.len()));
            }
        }
        (phi.resolvent(x, b), ChiMethod::Resolvent)
    }
}

/// χ^ε(x, v) for the model's collision frequency.
pub fn eval_chi(phi: &AuxTestFunction, eps: f64, params: &ModelParams, v: &[f64], x: [f64; 2]) -> Result<f64> {
    let r = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    let nu = params.collision_freq_radial(r);
    if !(nu > 0.0) {
        return Err(Error::RegimeViolation("ν(v)>0".into()));
    }
    let mut vv = [0.0; 2];
    vv[..v.len()].copy_from_slice(v);
    Ok(ChiEvaluator::new().eval(phi, eps, nu, vv, x).0)
}

/// Radial rule of a dedicated limit grid: radii with weights r^{d−1} dr.
#[derive(Debug, Clone)]
struct AuxGrid {
    radii: Vec<(f64, f64)>,
    /// Directions over a half circle (d = 2), or the single direction e₁.
    dirs: Vec<([f64; 2], f64)>,
}

impl AuxGrid {
    fn finish(d: usize, edges: Vec<f64>, level: usize) -> AuxGrid {
        let (r, w) = composite_legendre(&edges, 8);
        let radii = r.iter().zip(&w).map(|(r, w)| (*r, w * r.powi(d as i32 - 1))).collect();
        let dirs = if d == 2 {
            let n = 64 << level;
            let h = std::f64::consts::PI / n as f64;
            (0..n).map(|j| ([(j as f64 * h).cos(), (j as f64 * h).sin()], h)).collect()
        } else {
            vec![([1.0, 0.0], 1.0)]
        };
        AuxGrid { radii, dirs }
    }

    /// Panels up to the tail start, then geometric panels to where εv ~ 10⁶.
    fn heavy(params: &ModelParams, eps: f64, level: usize) -> AuxGrid {
        let per = 1usize << level;
        let mut edges = vec![0.0];
        let push_uniform = |a: f64, b: f64, n: usize, edges: &mut Vec<f64>| {
            for j in 1..=n {
                edges.push(a + (b - a) * j as f64 / n as f64);
            }
        };
        push_uniform(0.0, 0.8, 2 * per, &mut edges);
        push_uniform(0.8, 1.0, per, &mut edges);
        let ts = params.tail_start.max(1.0);
        if ts > 1.0 {
            push_uniform(1.0, ts, 2 * per, &mut edges);
        }
        let v_max = 1e6 / eps;
        let octaves = (v_max / ts).log2().ceil() as usize;
        let n = 2 * per * octaves;
        let ratio = (v_max / ts).powf(1.0 / n as f64);
        let mut r = ts;
        for _ in 0..n {
            r *= ratio;
            edges.push(r);
        }
        AuxGrid::finish(params.d, edges, level)
    }

    /// Geometric panels toward the origin, then the blend zone and the bulk.
    fn gaussian(params: &ModelParams, level: usize) -> AuxGrid {
        let per = 1usize << level;
        let r_min: f64 = 1e-6;
        let decades = 6;
        let n = 8 * per * decades;
        let ratio = (1.0 / r_min).powf(1.0 / n as f64);
        let mut edges = vec![0.0, r_min];
        let mut r = r_min;
        for _ in 0..n {
            r *= ratio;
            edges.push(r);
        }
        *edges.last_mut().expect("nonempty") = 1.0;
        let radius = gaussian_radius(params.d);
        for j in 1..=2 * per {
            edges.push(1.0 + 0.2 * j as f64 / (2 * per) as f64);
        }
        let m = (((radius - 1.2) / 0.25).ceil() as usize) * per;
        for j in 1..=m {
            edges.push(1.2 + (radius - 1.2) * j as f64 / m as f64);
        }
        AuxGrid::finish(params.d, edges, level)
    }

    /// Nodes of the half space; each stands for the pair (v, −v).
    fn pairs(&self) -> impl Iterator<Item = ([f64; 2], f64)> + '_ {
        self.radii
            .iter()
            .flat_map(move |(r, wr)| self.dirs.iter().map(move |(u, wu)| ([r * u[0], r * u[1]], wr * wu)))
    }
}

/// Relative tolerance of the limit-grid refinement.
pub const AUX_TOL: f64 = 1e-6;
const AUX_MAX_LEVEL: usize = 4;

/// ε^{−γ} ∫ kernel(v) ν-weighted (χ^ε − φ) over the dedicated grid, at the lattice points.
fn limit_field<K>(phi: &AuxTestFunction, eps: f64, params: &ModelParams, grid: &AuxGrid, lattice: &Lattice, kernel: K) -> Vec<f64>
where
    K: Fn([f64; 2], f64) -> f64 + Sync,
{
    let chi = ChiEvaluator::new();
    let nodes: Vec<([f64; 2], f64, f64, f64)> = grid
        .pairs()
        .map(|(v, w)| {
            let r = v[0].hypot(v[1]);
            let nu = params.collision_freq_radial(r);
            (v, w, nu, kernel(v, r))
        })
        .collect();
    let scale = eps.powf(-params.gamma);
    (0..lattice.len())
        .into_par_iter()
        .map(|i| {
            let x = lattice.point(i);
            let phx = phi.value(x);
            let mut acc = 0.0;
            for &(v, w, nu, kern) in &nodes {
                if kern == 0.0 {
                    continue;
                }
                let (cp, _) = chi.eval(phi, eps, nu, v, x);
                let (cm, _) = chi.eval(phi, eps, nu, [-v[0], -v[1]], x);
                acc += w * kern * ((cp - phx) + (cm - phx));
            }
            scale * acc
        })
        .collect()
}

fn refine<G, F>(make_grid: G, eval: F) -> Result<Vec<f64>>
where
    G: Fn(usize) -> AuxGrid,
    F: Fn(&AuxGrid) -> Vec<f64>,
{
    let mut prev = eval(&make_grid(0));
    for level in 1..=AUX_MAX_LEVEL {
        let next = eval(&make_grid(level));
        let size = next.iter().map(|x| x.abs()).fold(0.0, f64::max);
        let change = next.iter().zip(&prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if change <= AUX_TOL * size || change < 1e-13 {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::QuadratureDiverged(format!("limit integral did not settle to {AUX_TOL:e} relative")))
}

fn check_lattice(phi: &AuxTestFunction, params: &ModelParams, lattice: &Lattice) -> Result<()> {
    if phi.d != params.d || lattice.d != params.d {
        return Err(Error::InvalidConfig("test function, lattice and params must share d".into()));
    }
    if !phi.is_periodic() {
        return Err(Error::InvalidConfig("limit integrals need a periodic test function".into()));
    }
    Ok(())
}

/// ε^{−γ} ∫ ν̃ M̃ |v|⁴/(2d) (χ^ε − φ) dv at the lattice points.
pub fn frac_limit_heavy(phi: &AuxTestFunction, eps: f64, params: &ModelParams, lattice: &Lattice) -> Result<Vec<f64>> {
    if params.family != Family::HeavyTail || params.conservation != Conservation::MassMomentumEnergy {
        return Err(Error::UnsupportedCombination("frac_limit_heavy needs heavy-tail energy parameters".into()));
    }
    check_lattice(phi, params, lattice)?;
    let two_d = 2.0 * params.d as f64;
    refine(
        |level| AuxGrid::heavy(params, eps, level),
        |grid| {
            limit_field(phi, eps, params, grid, lattice, |_, r| {
                params.collision_freq_radial(r) * params.equilibrium_radial(r) * r.powi(4) / two_d
            })
        },
    )
}

/// ε^{−γ} ∫ ν* M* (χ^ε − φ) dv at the lattice points.
pub fn frac_limit_gauss(phi: &AuxTestFunction, eps: f64, params: &ModelParams, lattice: &Lattice) -> Result<Vec<f64>> {
    if params.family != Family::GaussianDegenerate {
        return Err(Error::UnsupportedCombination("frac_limit_gauss needs Gaussian-family parameters".into()));
    }
    check_lattice(phi, params, lattice)?;
    refine(
        |level| AuxGrid::gaussian(params, level),
        |grid| {
            limit_field(phi, eps, params, grid, lattice, |_, r| {
                params.collision_freq_radial(r) * params.equilibrium_radial(r)
            })
        },
    )
}

/// First-order replacement of (χ^ε − φ): ε v·∇φ/ν, integrated against the
/// Gaussian-family kernel. Vanishes by parity.
pub fn first_order_gauss(phi: &AuxTestFunction, eps: f64, params: &ModelParams, lattice: &Lattice) -> Vec<f64> {
    let grid = AuxGrid::gaussian(params, 0);
    (0..lattice.len())
        .map(|i| {
            let x = lattice.point(i);
            let g = phi.gradient(x);
            let sweep = |sign: f64| -> f64 {
                grid.pairs()
                    .map(|(v, w)| {
                        let r = v[0].hypot(v[1]);
                        let nu = params.collision_freq_radial(r);
                        let vs = [sign * v[0], sign * v[1]];
                        w * nu * params.equilibrium_radial(r) * eps * dot(vs, g) / nu
                    })
                    .sum()
            };
            (sweep(1.0) + sweep(-1.0))
                * eps.powf(-params.gamma)
        })
        .collect()
}

/// Result of comparing a limit integral with −κ(−Δ)^{γ/2}φ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitComparison {
    pub eps: f64,
    pub kappa_fit: f64,
    pub l2_error: f64,
}

/// Least-squares κ with output ≈ −κ (−Δ)^{γ/2}φ and the relative L² error.
pub fn compare_with_target(output: &[f64], phi: &AuxTestFunction, gamma: f64, lattice: &Lattice, eps: f64) -> LimitComparison {
    let h = ScalarField::from_samples(*lattice, &phi.samples(lattice));
    let target = frac_laplacian_spectral(&h, gamma).to_samples();
    let tt: f64 = target.iter().map(|t| t * t).sum();
    let ot: f64 = output.iter().zip(&target).map(|(o, t)| o * t).sum();
    let kappa = -ot / tt;
    let err: f64 = output.iter().zip(&target).map(|(o, t)| (o + kappa * t).powi(2)).sum::<f64>().sqrt();
    let l2_error = err / (kappa.abs() * tt.sqrt());
    LimitComparison { eps, kappa_fit: kappa, l2_error }
}

/// Least-squares slope of log y against log x.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuxLimitReport {
    pub family: Family,
    pub gamma: f64,
    pub rows: Vec<LimitComparison>,
    /// Fitted order of the relative error in ε (None for a single ε).
    pub order: Option<f64>,
    pub strictly_decreasing: bool,
}

/// Runs the family's limit integral over an ε-sweep.
pub fn aux_limit_sweep(phi: &AuxTestFunction, params: &ModelParams, eps_list: &[f64], lattice: &Lattice) -> Result<AuxLimitReport> {
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let out = match params.family {
            Family::HeavyTail => frac_limit_heavy(phi, eps, params, lattice)?,
            Family::GaussianDegenerate => frac_limit_gauss(phi, eps, params, lattice)?,
        };
        rows.push(compare_with_target(&out, phi, params.gamma, lattice, eps));
    }
    let order = (rows.len() >= 2).then(|| {
        let e: Vec<f64> = rows.iter().map(|r| r.eps).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.l2_error).collect();
        log_log_slope(&e, &y)
    });
    let strictly_decreasing = rows.windows(2).all(|w| w[1].l2_error < w[0].l2_error);
    Ok(AuxLimitReport { family: params.family, gamma: params.gamma, rows, order, strictly_decreasing })
}

/// Test moment ψ in the momentum/energy integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMoment {
    /// v_i (0-based component).
    Velocity(usize),
    /// (|v|² − (d+2))/2.
    Energy,
}

impl TestMoment {
    fn eval(self, v: &[f64]) -> f64 {
        match self {
            TestMoment::Velocity(i) => v[i],
            TestMoment::Energy => 0.5 * (v.iter().map(|x| x * x).sum::<f64>() - (v.len() as f64 + 2.0)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoussinesqCheck {
    pub eps: f64,
    /// c_j = ∫ ψ M (φ·U) v_j dv on the solver grid.
    pub i1_coeffs: Vec<f64>,
    /// I₁(x) = c·∇φ(x) at the lattice points.
    pub i1_field: Vec<f64>,
    /// L² norm of ε^{−γ}∫ψM(φ·U)ν(χ−φ) − ε^{1−γ}I₁.
    pub remainder_norm: f64,
    /// remainder_norm / ε^{2−γ}.
    pub remainder_constant: f64,
}

fn phi_basis(v: &[f64], d: usize) -> Vec<f64> {
    let s2: f64 = v.iter().map(|x| x * x).sum();
    let mut out = Vec::with_capacity(d + 2);
    out.push(1.0);
    out.extend_from_slice(&v[..d]);
    out.push(0.5 * (s2 - d as f64));
    out
}

fn discrete_l2(values: &[f64], lattice: &Lattice) -> f64 {
    (values.iter().map(|x| x * x).sum::<f64>() * lattice.volume() / lattice.len() as f64).sqrt()
}

/// First-order and remainder parts of ε^{−γ}∫ψ M(φ·U) ν(χ^ε − φ) dv for a
/// constant moment vector U.
pub fn boussinesq_integrand_check(
    phi: &AuxTestFunction,
    eps: f64,
    params: &ModelParams,
    cd: &CollisionData,
    psi: TestMoment,
    u: &[f64],
    lattice: &Lattice,
) -> Result<BoussinesqCheck> {
    if params.conservation != Conservation::MassMomentumEnergy || params.family != Family::HeavyTail {
        return Err(Error::UnsupportedCombination("the Boussinesq check needs heavy-tail energy parameters".into()));
    }
    check_lattice(phi, params, lattice)?;
    let d = params.d;
    if u.len() != d + 2 {
        return Err(Error::InvalidConfig(format!("U must have {} components", d + 2)));
    }
    if let TestMoment::Velocity(i) = psi {
        if i >= d {
            return Err(Error::InvalidConfig("velocity component out of range".into()));
        }
    }
    let grid: &VelocityGrid = &cd.grid;
    let weight = |v: &[f64], m: f64| -> f64 {
        let b: f64 = phi_basis(v, d).iter().zip(u).map(|(a, b)| a * b).sum();
        psi.eval(v) * m * b
    };
    let i1_coeffs = grid.symmetric_sum_vec(d, |i, out: &mut [f64]| {
        let v = grid.node(i);
        let s = weight(v, cd.m[i]);
        for j in 0..d {
            out[j] += s * v[j];
        }
    });
    let field_from = |c: &[f64]| -> Vec<f64> {
        (0..lattice.len())
            .map(|idx| {
                let g = phi.gradient(lattice.point(idx));
                (0..d).map(|j| c[j] * g[j]).sum()
            })
            .collect()
    };
    let i1_field = field_from(&i1_coeffs);
    let chi = ChiEvaluator::new();
    let scale = eps.powf(-params.gamma);
    let full_and_first = |grid: &AuxGrid| -> Vec<f64> {
        let nodes: Vec<([f64; 2], f64, f64, f64, f64)> = grid
            .pairs()
            .map(|(v, w)| {
                let r = v[0].hypot(v[1]);
                let m = params.equilibrium_radial(r);
                let neg = [-v[0], -v[1]];
                (v, w, params.collision_freq_radial(r), weight(&v[..d], m), weight(&neg[..d], m))
            })
            .collect();
        let mut c_aux = vec![0.0; d];
        for (v, w, _, kp, km) in &nodes {
            for j in 0..d {
                c_aux[j] += w * (kp - km) * v[j];
            }
        }
        let first = field_from(&c_aux);
        (0..lattice.len())
            .into_par_iter()
            .map(|idx| {
                let x = lattice.point(idx);
                let phx = phi.value(x);
                let mut acc = 0.0;
                for &(v, w, nu, kp, km) in &nodes {
                    let (cp, _) = chi.eval(phi, eps, nu, v, x);
                    let (cm, _) = chi.eval(phi, eps, nu, [-v[0], -v[1]], x);
                    acc += w * nu * (kp * (cp - phx) + km * (cm - phx));
                }
                scale * acc - eps.powf(1.0 - params.gamma) * first[idx]
            })
            .collect()
    };
    let remainder = refine(|level| AuxGrid::heavy(params, eps, level), full_and_first)?;
    let remainder_norm = discrete_l2(&remainder, lattice);
    Ok(BoussinesqCheck {
        eps,
        i1_coeffs,
        i1_field,
        remainder_norm,
        remainder_constant: remainder_norm / eps.powf(2.0 - params.gamma),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::assemble;
    use crate::params::{calibrate_moments, validate_assumptions, RawParams};
    use crate::vgrid::build_grid;

    fn heavy() -> (ModelParams, CollisionData) {
        let raw = RawParams::heavy_tail(Conservation::MassMomentumEnergy, 1, 5.5, 0.0);
        let p = validate_assumptions(&raw).unwrap();
        let g = build_grid(1, p.default_grid_spec()).unwrap();
        let p = calibrate_moments(&p, &g).unwrap();
        let cd = assemble(&p, &g).unwrap();
        (p, cd)
    }

    fn gauss() -> ModelParams {
        validate_assumptions(&RawParams::gaussian(1, 3.5)).unwrap()
    }

    #[test]
    fn chi_at_zero_eps_is_phi() {
        let phi = AuxTestFunction::from_cosines(1, &[1.0, 0.3]);
        let (p, _) = heavy();
        let x = [0.7, 0.0];
        assert_eq!(eval_chi(&phi, 0.0, &p, &[1.3], x).unwrap(), phi.value(x));
    }

    #[test]
    fn chi_of_linear_function() {
        let phi = AuxTestFunction::linear(1, 0.5, [2.0, 0.0]);
        let (p, _) = heavy();
        let (eps, v) = (0.1, 1.7);
        let chi = eval_chi(&phi, eps, &p, &[v], [0.3, 0.0]).unwrap();
        let nu = p.collision_freq_radial(v);
        assert!((chi - phi.value([0.3, 0.0]) - eps * v / nu * 2.0).abs() < 1e-12);
    }

    #[test]
    fn chi_deviation_is_bounded_by_gradient() {
        let phi = AuxTestFunction::from_cosines(1, &[1.0, 0.3]);
        let p = gauss();
        let ev = ChiEvaluator::new();
        for v in [0.5, 1.0, 2.0, 4.0] {
            let nu = p.collision_freq_radial(v);
            for x in [0.0, 0.4, 1.9] {
                let (chi, _) = ev.eval(&phi, 0.05, nu, [v, 0.0], [x, 0.0]);
                let bound = phi.gradient_amplitude() * 0.05 * v / nu;
                assert!((chi - phi.value([x, 0.0])).abs() <= bound + 1e-14);
            }
        }
    }

    #[test]
    fn quadrature_matches_resolvent_where_resolved() {
        let phi = AuxTestFunction::from_cosines(1, &[1.0, 0.5]);
        let ev = ChiEvaluator::new();
        for b in [0.01, 0.3, 1.0] {
            let (chi, method) = ev.eval(&phi, b, 1.0, [1.0, 0.0], [0.2, 0.0]);
            assert!(matches!(method, ChiMethod::Laguerre(_)));
            assert!((chi - phi.resolvent([0.2, 0.0], [b, 0.0])).abs() < 1e-10);
        }
    }

    #[test]
    fn chi_satisfies_defining_equation() {
        let phi = AuxTestFunction::from_cosines(1, &[1.0, 0.5]);
        let ev = ChiEvaluator::new();
        let (eps, nu, v, x) = (0.1, 1.0, 3.0, 0.4);
        let h = 1e-5;
        let c = |x: f64| ev.eval(&phi, eps, nu, [v, 0.0], [x, 0.0]).0;
        let dchi = (c(x + h) - c(x - h)) / (2.0 * h);
        let res = nu * (c(x) - phi.value([x, 0.0])) - eps * v * dchi;
        assert!(res.abs() < 1e-8, "{res}");
    }

    #[test]
    fn expansion_is_second_order() {
        let phi = AuxTestFunction::from_cosines(1, &[1.0, 0.5]);
        let ev = ChiEvaluator::new();
        let (nu, v) = (1.0, 1.5);
        let defect = |eps: f64| {
            (0..16)
                .map(|j| {
                    let x = [j as f64 * 0.4, 0.0];
                    let chi = ev.eval(&phi, eps, nu, [v, 0.0], x).0;
                    (nu * (chi - phi.value(x)) - eps * v * phi.gradient(x)[0]).abs()
                })
                .fold(0.0, f64::max)
        };
        let r = defect(0.02) / defect(0.01);
        assert!((r - 4.0).abs() < 0.1, "{r}");
    }

    #[test]
    fn limits_vanish_on_constants() {
        let (p, _) = heavy();
        let lat = Lattice::periodic(1, 8);
        let c = AuxTestFunction::constant(1, 2.0);
        for eps in [0.2, 0.025] {
            assert!(frac_limit_heavy(&c, eps, &p, &lat).unwrap().iter().all(|x| x.abs() < 1e-10));
            assert!(frac_limit_gauss(&c, eps, &gauss(), &lat).unwrap().iter().all(|x| x.abs() < 1e-10));
        }
    }

    #[test]
    fn limits_are_linear_in_phi() {
        let p = gauss();
        let lat = Lattice::periodic(1, 8);
        let a = AuxTestFunction::from_cosines(1, &[1.0]);
        let b = AuxTestFunction::from_cosines(1, &[0.0, 1.0]);
        let ab = AuxTestFunction::from_cosines(1, &[2.0, -1.0]);
        let fa = frac_limit_gauss(&a, 0.1, &p, &lat).unwrap();
        let fb = frac_limit_gauss(&b, 0.1, &p, &lat).unwrap();
        let fab = frac_limit_gauss(&ab, 0.1, &p, &lat).unwrap();
        for i in 0..lat.len() {
            assert!((fab[i] - (2.0 * fa[i] - fb[i])).abs() < 1e-5 * fa[i].abs().max(1.0));
        }
    }

    #[test]
    fn first_order_term_vanishes_by_parity() {
        let lat = Lattice::periodic(1, 8);
        let phi = AuxTestFunction::from_cosines(1, &[1.0, 0.3]);
        assert!(first_order_gauss(&phi, 0.1, &gauss(), &lat).iter().all(|x| x.abs() < 1e-10));
    }

    #[test]
    fn boussinesq_first_order_coefficients() {
        let (p, cd) = heavy();
        let lat = Lattice::periodic(1, 8);
        let phi = AuxTestFunction::from_cosines(1, &[1.0, 0.3]);
        let (rho, theta) = (0.7, -0.2);
        let chk = boussinesq_integrand_check(&phi, 0.1, &p, &cd, TestMoment::Velocity(0), &[rho, 0.0, theta], &lat).unwrap();
        for (i, v) in chk.i1_field.iter().enumerate() {
            let want = (rho + theta) * phi.gradient(lat.point(i))[0];
            assert!((v - want).abs() < 1e-9, "{v} vs {want}");
        }
        let chk = boussinesq_integrand_check(&phi, 0.1, &p, &cd, TestMoment::Energy, &[0.0, 1.0, 0.0], &lat).unwrap();
        assert!(chk.i1_field.iter().all(|v| v.abs() < 1e-10));
    }
}
