//! Equilibrium families, collision frequencies and the admissible parameter
//! regimes.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vgrid::{build_grid, quad, GridSpec, Mapping, VelocityGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    GaussianDegenerate,
    HeavyTail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conservation {
    MassMomentumEnergy,
    MassMomentum,
}

impl Conservation {
    /// Number of conserved moments for dimension `d`.
    pub fn size(self, d: usize) -> usize {
        match self {
            Conservation::MassMomentumEnergy => d + 2,
            Conservation::MassMomentum => d + 1,
        }
    }
}

/// User-facing parameters before the exponent γ is derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawParams {
    pub family: Family,
    pub conservation: Conservation,
    pub d: usize,
    pub alpha: f64,
    pub beta: f64,
    pub c0_initial: f64,
    /// Radius where the heavy tail c0·|v|^{-(α+d)} takes over.
    pub tail_start: f64,
}

impl RawParams {
    pub fn heavy_tail(conservation: Conservation, d: usize, alpha: f64, beta: f64) -> Self {
        RawParams { family: Family::HeavyTail, conservation, d, alpha, beta, c0_initial: 1.0, tail_start: DEFAULT_TAIL_START }
    }

    pub fn gaussian(d: usize, beta: f64) -> Self {
        RawParams {
            family: Family::GaussianDegenerate,
            conservation: Conservation::MassMomentumEnergy,
            d,
            alpha: 0.0,
            beta,
            c0_initial: 1.0,
            tail_start: DEFAULT_TAIL_START,
        }
    }
}

pub const DEFAULT_TAIL_START: f64 = 2.0;

/// Inner edge of the heavy-tail frequency blend; the power law is exact from 1.
const HEAVY_BLEND_START: f64 = 0.8;
/// Outer edge of the Gaussian frequency blend; the power law is exact up to 1.
const GAUSS_BLEND_END: f64 = 1.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub family: Family,
    pub conservation: Conservation,
    pub d: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub c0: f64,
    /// Coefficients of Σ a_j |v|^{2j} on |v| < tail_start (heavy tail only).
    pub interior_coeffs: Vec<f64>,
    pub tail_start: f64,
    /// ν ≡ 1 regardless of family (classical control and test operators).
    pub unit_frequency: bool,
}

fn require(cond: bool, name: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::RegimeViolation(name.to_string()))
    }
}

pub fn validate_assumptions(raw: &RawParams) -> Result<ModelParams> {
    if !(raw.d == 1 || raw.d == 2) {
        return Err(Error::UnsupportedCombination(format!("dimension d={} (supported: 1, 2)", raw.d)));
    }
    let (a, b, d) = (raw.alpha, raw.beta, raw.d as f64);
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::RegimeViolation("finite exponents".into()));
    }
    let gamma = match (raw.family, raw.conservation) {
        (Family::HeavyTail, Conservation::MassMomentumEnergy) => {
            require(a > 5.0, "α>5")?;
            require(b < 1.0, "β<1")?;
            require(5.0 < a + b, "5<α+β")?;
            require(a + b < 6.0, "α+β<6")?;
            require(b < (a - 4.0) / 2.0, "β<(α−4)/2")?;
            (a - b - 4.0) / (1.0 - b)
        }
        (Family::HeavyTail, Conservation::MassMomentum) => {
            require(a > 3.0, "α>3")?;
            require(b < 1.0, "β<1")?;
            require(3.0 < a + b, "3<α+β")?;
            require(a + b < 4.0, "α+β<4")?;
            require(b < (a - 2.0) / 2.0, "β<(α−2)/2")?;
            (a - b - 2.0) / (1.0 - b)
        }
        (Family::GaussianDegenerate, Conservation::MassMomentum) => {
            return Err(Error::UnsupportedCombination(
                "the degenerate Gaussian family requires mass-momentum-energy conservation".into(),
            ));
        }
        (Family::GaussianDegenerate, Conservation::MassMomentumEnergy) => {
            require(d + 2.0 < b, "d+2<β")?;
            require(b < d + 3.0, "β<d+3")?;
            (b + d) / (b - 1.0)
        }
    };
    require(gamma > 1.0 && gamma < 2.0, "1<γ<2")?;
    let mut params = ModelParams {
        family: raw.family,
        conservation: raw.conservation,
        d: raw.d,
        alpha: raw.alpha,
        beta: raw.beta,
        gamma,
        c0: 0.0,
        interior_coeffs: Vec::new(),
        tail_start: raw.tail_start,
        unit_frequency: false,
    };
    if raw.family == Family::HeavyTail {
        require(raw.c0_initial > 0.0, "c0>0")?;
        require(raw.tail_start >= 1.0 && raw.tail_start.is_finite(), "tail_start≥1")?;
        params.c0 = raw.c0_initial;
        params.interior_coeffs = matched_quadratic(raw.c0_initial, raw.alpha + d, raw.tail_start);
    }
    Ok(params)
}

/// a0 + a1 r² meeting c0 r^{-s} with value and slope at r = R.
fn matched_quadratic(c0: f64, s: f64, r: f64) -> Vec<f64> {
    let a1 = -0.5 * s * c0 * r.powf(-s - 2.0);
    let a0 = c0 * r.powf(-s) - a1 * r * r;
    vec![a0, a1]
}

impl ModelParams {
    /// Maxwellian equilibrium with ν ≡ 1 and γ = 2: the classical diffusive control.
    pub fn classical_control(d: usize) -> Self {
        ModelParams {
            family: Family::GaussianDegenerate,
            conservation: Conservation::MassMomentumEnergy,
            d,
            alpha: 0.0,
            beta: 0.0,
            gamma: 2.0,
            c0: 0.0,
            interior_coeffs: Vec::new(),
            tail_start: DEFAULT_TAIL_START,
            unit_frequency: true,
        }
    }

    /// Same equilibrium, ν replaced by 1.
    pub fn with_unit_frequency(mut self) -> Self {
        self.unit_frequency = true;
        self
    }

    /// Number of conserved moments.
    pub fn p(&self) -> usize {
        self.conservation.size(self.d)
    }

    pub fn default_grid_spec(&self) -> GridSpec {
        match self.family {
            Family::HeavyTail => GridSpec { n_per_axis: 256, mapping: Mapping::AlgebraicMap { scale: 2.0 } },
            Family::GaussianDegenerate => {
                GridSpec { n_per_axis: 256, mapping: Mapping::Truncated { radius: gaussian_radius(self.d) } }
            }
        }
    }

    pub fn equilibrium_radial(&self, r: f64) -> f64 {
        match self.family {
            Family::GaussianDegenerate => {
                (-0.5 * r * r).exp() / (2.0 * std::f64::consts::PI).powf(self.d as f64 / 2.0)
            }
            Family::HeavyTail => {
                if r >= self.tail_start {
                    self.c0 * r.powf(-(self.alpha + self.d as f64))
                } else {
                    let r2 = r * r;
                    self.interior_coeffs.iter().rev().fold(0.0, |acc, a| acc * r2 + a)
                }
            }
        }
    }

    pub fn collision_freq_radial(&self, r: f64) -> f64 {
        if self.unit_frequency {
            return 1.0;
        }
        let b = self.beta;
        match self.family {
            Family::HeavyTail => {
                if b == 0.0 || r <= HEAVY_BLEND_START {
                    1.0
                } else if r >= 1.0 {
                    r.powf(b)
                } else {
                    let h = 1.0 - HEAVY_BLEND_START;
                    hermite((r - HEAVY_BLEND_START) / h, 1.0, 0.0, 1.0, b * h)
                }
            }
            Family::GaussianDegenerate => {
                if r <= 1.0 {
                    r.powf(b)
                } else if r >= GAUSS_BLEND_END {
                    1.0
                } else {
                    let h = GAUSS_BLEND_END - 1.0;
                    hermite((r - 1.0) / h, 1.0, b * h, 1.0, 0.0)
                }
            }
        }
    }
}

/// Cubic Hermite interpolant on t ∈ [0,1] with end values and scaled slopes.
fn hermite(t: f64, p0: f64, m0: f64, p1: f64, m1: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * p0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * p1 + (t3 - t2) * m1
}

fn radius(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn eval_equilibrium(params: &ModelParams, v: &[f64]) -> f64 {
    params.equilibrium_radial(radius(v))
}

pub fn eval_collision_freq(params: &ModelParams, v: &[f64]) -> f64 {
    params.collision_freq_radial(radius(v))
}

/// Moment targets ∫|v|^{2k} M for k = 0, 1, 2.
pub fn moment_targets(d: usize) -> [f64; 3] {
    let d = d as f64;
    [1.0, d, d * (d + 2.0)]
}

/// Quadrature of (1, |v|², |v|⁴) against M.
pub fn equilibrium_moments(params: &ModelParams, grid: &VelocityGrid) -> Result<[f64; 3]> {
    let mut out = [0.0; 3];
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = quad(grid, |v| {
            let r2: f64 = v.iter().map(|x| x * x).sum();
            r2.powi(k as i32) * eval_equilibrium(params, v)
        })?;
    }
    Ok(out)
}

pub fn calibrate_moments(params: &ModelParams, grid: &VelocityGrid) -> Result<ModelParams> {
    if params.family == Family::GaussianDegenerate {
        return Ok(params.clone());
    }
    let energy = params.conservation == Conservation::MassMomentumEnergy;
    let npoly = if energy { 4 } else { 3 };
    let nmom = if energy { 3 } else { 2 };
    let s = params.alpha + params.d as f64;
    let big_r = params.tail_start;
    let n = npoly + 1;
    let targets = moment_targets(params.d);

    // Per-node basis values: tail indicator times r^{-s}, then interior r^{2j}.
    let basis = |r: f64, out: &mut [f64]| {
        if r >= big_r {
            out[0] = r.powf(-s);
            out[1..].iter_mut().for_each(|x| *x = 0.0);
        } else {
            out[0] = 0.0;
            for (j, slot) in out[1..].iter_mut().enumerate() {
                *slot = r.powi(2 * j as i32);
            }
        }
    };
    let mut mat = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    mat[(0, 0)] = -big_r.powf(-s);
    mat[(1, 0)] = s * big_r.powf(-s - 1.0);
    for j in 0..npoly {
        mat[(0, j + 1)] = big_r.powi(2 * j as i32);
        mat[(1, j + 1)] = if j == 0 { 0.0 } else { 2.0 * j as f64 * big_r.powi(2 * j as i32 - 1) };
    }
    let mut buf = vec![0.0; n];
    for k in 0..nmom {
        let mut row = vec![0.0; n];
        for i in 0..grid.len() {
            let r2 = grid.speed2()[i];
            basis(r2.sqrt(), &mut buf);
            let wk = grid.weights()[i] * r2.powi(k as i32);
            for (acc, b) in row.iter_mut().zip(&buf) {
                *acc += wk * b;
            }
        }
        for (j, x) in row.into_iter().enumerate() {
            mat[(2 + k, j)] = x;
        }
        rhs[2 + k] = targets[k];
    }
    // Row equilibration before judging the conditioning.
    for i in 0..n {
        let scale = mat.row(i).amax();
        if scale > 0.0 {
            mat.row_mut(i).scale_mut(1.0 / scale);
            rhs[i] /= scale;
        }
    }
    let sv = mat.singular_values();
    let condition = sv.max() / sv.min();
    if !condition.is_finite() || condition > 1e14 {
        return Err(Error::SingularCalibration { condition });
    }
    let lu = mat.clone().lu();
    let mut x = lu.solve(&rhs).ok_or(Error::SingularCalibration { condition })?;
    // One step of iterative refinement.
    let resid = &rhs - &mat * &x;
    if let Some(dx) = lu.solve(&resid) {
        x += dx;
    }
    let mut out = params.clone();
    out.c0 = x[0];
    out.interior_coeffs = x.iter().skip(1).cloned().collect();
    if out.c0 <= 0.0 {
        return Err(Error::NonPositiveEquilibrium { min: out.c0, radius: big_r });
    }
    let samples = 2000;
    for j in 0..=samples {
        let r = big_r * j as f64 / samples as f64;
        let m = out.equilibrium_radial(r);
        if m <= 0.0 {
            return Err(Error::NonPositiveEquilibrium { min: m, radius: r });
        }
    }
    Ok(out)
}

/// Surface measure of the unit sphere in ℝ^d.
pub fn sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        _ => unreachable!("dimension checked at validation"),
    }
}

/// Radial integral ∫ g(|v|) dv over ℝ^d, evaluated with a one-dimensional grid.
pub fn radial_quad<G: Fn(f64) -> f64>(d: usize, grid1: &VelocityGrid, g: G) -> Result<f64> {
    let half = quad(grid1, |x| {
        let r = x[0].abs();
        r.powi(d as i32 - 1) * g(r)
    })?;
    Ok(0.5 * sphere_area(d) * half)
}

/// Radial grids for moment-stability checks: base, refined and enlarged.
fn sentinel_specs(params: &ModelParams) -> [GridSpec; 3] {
    let n = 1 << 14;
    match params.family {
        Family::HeavyTail => [
            GridSpec { n_per_axis: n, mapping: Mapping::AlgebraicMap { scale: 2.0 } },
            GridSpec { n_per_axis: 2 * n, mapping: Mapping::AlgebraicMap { scale: 2.0 } },
            GridSpec { n_per_axis: n, mapping: Mapping::AlgebraicMap { scale: 4.0 } },
        ],
        Family::GaussianDegenerate => {
            let r = gaussian_radius(params.d);
            [
                GridSpec { n_per_axis: n, mapping: Mapping::Truncated { radius: r } },
                GridSpec { n_per_axis: 2 * n, mapping: Mapping::Truncated { radius: r } },
                GridSpec { n_per_axis: n, mapping: Mapping::Truncated { radius: 1.25 * r } },
            ]
        }
    }
}

/// Truncation radius of Gaussian-family grids.
pub fn gaussian_radius(d: usize) -> f64 {
    (8.0 * (d as f64).sqrt()).max(10.0)
}

/// Relative change tolerated between the sentinel grids.
pub const MOMENT_STABILITY_TOL: f64 = 0.01;

/// ∫ g(|v|) dv with a finiteness check: the value must agree within 1%
/// across grid refinement and domain enlargement.
pub fn stable_radial_moment<G: Fn(f64) -> f64>(params: &ModelParams, what: &str, g: G) -> Result<f64> {
    let specs = sentinel_specs(params);
    let mut values = [0.0; 3];
    for (slot, spec) in values.iter_mut().zip(specs) {
        let grid = build_grid(1, spec)?;
        *slot = radial_quad(params.d, &grid, &g)?;
    }
    let base = values[0];
    let change = values[1..]
        .iter()
        .map(|v| ((v - base) / base.abs().max(f64::MIN_POSITIVE)).abs())
        .fold(0.0, f64::max);
    if !change.is_finite() || change > MOMENT_STABILITY_TOL {
        return Err(Error::MomentDiverged { what: what.to_string(), change });
    }
    Ok(base)
}

/// ∫ |v|^k M/ν dv, or `MomentDiverged` if the integral is not finite.
pub fn frequency_weighted_moment(params: &ModelParams, k: i32) -> Result<f64> {
    stable_radial_moment(params, &format!("∫|v|^{k} M/ν"), |r| {
        r.powi(k) * params.equilibrium_radial(r) / params.collision_freq_radial(r)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn energy(alpha: f64, beta: f64) -> RawParams {
        RawParams::heavy_tail(Conservation::MassMomentumEnergy, 1, alpha, beta)
    }

    #[test]
    fn heavy_tail_energy_gamma() {
        let p = validate_assumptions(&energy(5.5, 0.0)).unwrap();
        assert!((p.gamma - 1.5).abs() < 1e-15);
    }

    #[test]
    fn gaussian_gamma() {
        let p = validate_assumptions(&RawParams::gaussian(1, 3.5)).unwrap();
        assert!((p.gamma - 1.8).abs() < 1e-15);
    }

    #[test]
    fn mass_momentum_gamma() {
        let raw = RawParams::heavy_tail(Conservation::MassMomentum, 2, 3.5, 0.0);
        assert!((validate_assumptions(&raw).unwrap().gamma - 1.5).abs() < 1e-15);
    }

    #[test]
    fn too_heavy_alpha_is_rejected() {
        assert_eq!(validate_assumptions(&energy(7.0, 0.0)), Err(Error::RegimeViolation("α+β<6".into())));
    }

    #[test]
    fn gaussian_mass_momentum_is_unsupported() {
        let mut raw = RawParams::gaussian(1, 3.5);
        raw.conservation = Conservation::MassMomentum;
        assert!(matches!(validate_assumptions(&raw), Err(Error::UnsupportedCombination(_))));
    }

    #[test]
    fn gaussian_beta_window() {
        assert_eq!(
            validate_assumptions(&RawParams::gaussian(2, 3.5)),
            Err(Error::RegimeViolation("d+2<β".into()))
        );
        assert!(validate_assumptions(&RawParams::gaussian(2, 4.5)).is_ok());
    }

    #[test]
    fn equilibrium_values() {
        let g = validate_assumptions(&RawParams::gaussian(1, 3.5)).unwrap();
        assert!((eval_equilibrium(&g, &[0.0]) - 0.398_942_280_401_432_7).abs() < 1e-15);
        let mut h = validate_assumptions(&energy(5.5, 0.0)).unwrap();
        h.c0 = 1.7;
        assert!((eval_equilibrium(&h, &[2.0]) - 1.7 * 2f64.powf(-6.5)).abs() < 1e-15);
        assert_eq!(eval_equilibrium(&h, &[-0.3]), eval_equilibrium(&h, &[0.3]));
    }

    #[test]
    fn collision_frequency_values() {
        let g = validate_assumptions(&RawParams::gaussian(1, 3.5)).unwrap();
        assert!((eval_collision_freq(&g, &[0.5]) - 0.5f64.powf(3.5)).abs() < 1e-15);
        let h = validate_assumptions(&energy(5.5, 0.0)).unwrap();
        for r in [0.0, 0.5, 0.9, 1.0, 3.0, 100.0] {
            assert_eq!(eval_collision_freq(&h, &[r]), 1.0);
        }
        let h = validate_assumptions(&energy(5.2, 0.5)).unwrap();
        assert!((eval_collision_freq(&h, &[4.0]) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn blends_are_c1() {
        let g = validate_assumptions(&RawParams::gaussian(1, 3.5)).unwrap();
        let h = validate_assumptions(&energy(5.2, 0.5)).unwrap();
        for (p, r0) in [(&g, 1.0), (&g, 1.2), (&h, 0.8), (&h, 1.0)] {
            let e = 1e-7;
            let f = |r: f64| p.collision_freq_radial(r);
            assert!((f(r0 + e) - f(r0 - e)).abs() < 1e-6);
            let sl = (f(r0 + 2.0 * e) - f(r0 + e)) / e;
            let sr = (f(r0 - e) - f(r0 - 2.0 * e)) / e;
            assert!((sl - sr).abs() < 1e-5, "slope jump at {r0}");
        }
    }

    #[test]
    fn calibration_hits_targets_d1() {
        let p = validate_assumptions(&energy(5.5, 0.0)).unwrap();
        let grid = build_grid(1, p.default_grid_spec()).unwrap();
        let c = calibrate_moments(&p, &grid).unwrap();
        let m = equilibrium_moments(&c, &grid).unwrap();
        for (a, b) in m.iter().zip(moment_targets(1)) {
            assert!((a - b).abs() <= 1e-10 * b, "{a} vs {b}");
        }
        assert_eq!(c.interior_coeffs.len(), 4);
    }

    #[test]
    fn calibration_hits_targets_mass_momentum_d2() {
        let raw = RawParams::heavy_tail(Conservation::MassMomentum, 2, 3.5, 0.0);
        let p = validate_assumptions(&raw).unwrap();
        let grid = build_grid(2, GridSpec { n_per_axis: 32, mapping: Mapping::AlgebraicMap { scale: 2.0 } }).unwrap();
        let c = calibrate_moments(&p, &grid).unwrap();
        let m = equilibrium_moments(&c, &grid).unwrap();
        assert!((m[0] - 1.0).abs() < 1e-10);
        assert!((m[1] - 2.0).abs() < 2e-10);
    }

    #[test]
    fn calibration_leaves_gaussian_unchanged() {
        let p = validate_assumptions(&RawParams::gaussian(1, 3.5)).unwrap();
        let grid = build_grid(1, p.default_grid_spec()).unwrap();
        assert_eq!(calibrate_moments(&p, &grid).unwrap(), p);
    }

    #[test]
    fn classical_control_is_outside_the_fractional_regime() {
        let p = ModelParams::classical_control(1);
        assert_eq!(p.gamma, 2.0);
        assert_eq!(eval_collision_freq(&p, &[0.3]), 1.0);
    }
}
