//! Spectral-in-x, implicit-in-t solver for ε^γ ∂t f + ε v·∇x f = L f, and the
//! hydrodynamic dispersion relation of the generator −i v·k + L.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collision::{moments, CollisionData};
use crate::error::{Error, Result};
use crate::spectral::{Lattice, ScalarField, VectorField};
use crate::vgrid::VelocityGrid;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ImplicitEuler,
    CrankNicolsonStabilized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub dt: f64,
    pub t_final: f64,
    pub n_modes: usize,
    pub domain_length: f64,
    pub scheme: Scheme,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::InvalidConfig(format!("epsilon = {} must lie in (0, 1]", self.epsilon)));
        }
        if self.n_modes < 2 || self.n_modes % 2 == 1 {
            return Err(Error::InvalidConfig(format!("n_modes = {} must be even", self.n_modes)));
        }
        if !(self.t_final >= 0.0 && self.domain_length > 0.0) {
            return Err(Error::InvalidConfig("t_final must be nonnegative and domain_length positive".into()));
        }
        Ok(())
    }

    pub fn lattice(&self, d: usize) -> Lattice {
        Lattice::new(d, self.n_modes, self.domain_length)
    }
}

/// f̂(k, v) for every mode of the lattice, stored mode-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseField {
    pub lattice: Lattice,
    pub nv: usize,
    pub data: Vec<Complex64>,
}

impl PhaseField {
    pub fn zeros(lattice: Lattice, nv: usize) -> Self {
        PhaseField { lattice, nv, data: vec![c(0.0); lattice.len() * nv] }
    }

    pub fn mode(&self, idx: usize) -> &[Complex64] {
        &self.data[idx * self.nv..(idx + 1) * self.nv]
    }

    pub fn mode_mut(&mut self, idx: usize) -> &mut [Complex64] {
        &mut self.data[idx * self.nv..(idx + 1) * self.nv]
    }

    /// Largest |f̂(−k, v) − conj f̂(k, v)| over non-Nyquist modes; zero for real f(x, v).
    pub fn reality_defect(&self) -> f64 {
        let lat = self.lattice;
        let h = (lat.n / 2) as i64;
        let mut worst = 0.0f64;
        for idx in 0..lat.len() {
            let km = lat.integer_mode(idx);
            if km[0] == -h || km[1] == -h {
                continue;
            }
            let neg = lat.negated(idx);
            let (a, b) = (self.mode(idx), self.mode(neg));
            for i in 0..self.nv {
                worst = worst.max((b[i] - a[i].conj()).norm());
            }
        }
        worst
    }
}

/// Which limit constraints the initial moments must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preparation {
    /// div m = 0 and ρ + θ = 0.
    FourierLimit,
    /// div m = 0.
    StokesLimit,
    None,
}

/// Initial moment fields U_in = (ρ, m, θ) (or (ρ, m)) as Fourier series.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub components: Vec<ScalarField>,
    pub preparation: Preparation,
}

impl InitialData {
    pub fn lattice(&self) -> Lattice {
        self.components[0].lattice
    }

    pub fn momentum(&self) -> VectorField {
        let lat = self.lattice();
        VectorField { lattice: lat, comps: self.components[1..=lat.d].to_vec() }
    }

    /// θ = a(x), ρ = −a(x), m = 0.
    pub fn boussinesq(lattice: Lattice, theta: &ScalarField) -> Self {
        let zero = ScalarField::zeros(lattice);
        let mut components = vec![theta.scaled(-1.0)];
        components.extend(std::iter::repeat_n(zero, lattice.d));
        components.push(theta.clone());
        InitialData { components, preparation: Preparation::FourierLimit }
    }

    /// ρ = rho, m = curl of the stream function (d = 2), mass–momentum moments.
    pub fn stokes(rho: &ScalarField, psi: &ScalarField) -> Self {
        let m = VectorField::from_stream_function(psi);
        let mut components = vec![rho.clone()];
        components.extend(m.comps);
        InitialData { components, preparation: Preparation::StokesLimit }
    }
}

pub const PREPARATION_TOL: f64 = 1e-12;

pub fn check_prepared(data: &InitialData, cd: &CollisionData) -> Result<()> {
    let lat = data.lattice();
    if data.components.len() != cd.p || lat.d != cd.d {
        return Err(Error::IllPrepared(format!(
            "expected {} moment fields in d = {}, got {} in d = {}",
            cd.p,
            cd.d,
            data.components.len(),
            lat.d
        )));
    }
    let scale = data.components.iter().map(|c| c.l2_norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    if data.preparation == Preparation::None {
        return Ok(());
    }
    let div = data.momentum().divergence().l2_norm() / scale;
    if div > PREPARATION_TOL {
        return Err(Error::IllPrepared(format!("divergence of m_in is {div:.3e} (relative)")));
    }
    if data.preparation == Preparation::FourierLimit {
        let e = cd.energy_index().ok_or_else(|| {
            Error::IllPrepared("the Fourier limit needs mass-momentum-energy moments".into())
        })?;
        let res = data.components[0].add(&data.components[e]).l2_norm() / scale;
        if res > PREPARATION_TOL {
            return Err(Error::IllPrepared(format!("ρ_in + θ_in is {res:.3e} (relative)")));
        }
    }
    Ok(())
}

/// f̂(k, v) = M(v) φ(v)·Û_in(k).
pub fn lift_initial(data: &InitialData, cd: &CollisionData, grid: &VelocityGrid) -> Result<PhaseField> {
    check_prepared(data, cd)?;
    let lat = data.lattice();
    let nv = grid.len();
    let mut f = PhaseField::zeros(lat, nv);
    for idx in 0..lat.len() {
        let u: Vec<Complex64> = data.components.iter().map(|c| c.coeffs[idx]).collect();
        if u.iter().all(|x| x.norm() == 0.0) {
            continue;
        }
        f.mode_mut(idx).copy_from_slice(&cd.macro_part(&u));
    }
    Ok(f)
}

/// Per-mode implicit operator: the diagonal D⁻¹ and the reduced p×p system.
#[derive(Debug, Clone)]
pub struct ModeStepper {
    scheme: Scheme,
    tau: f64,
    /// i ε v·k + ν per node.
    rate: Vec<Complex64>,
    dinv: Vec<Complex64>,
    reduced: nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl ModeStepper {
    pub fn new(k: &[f64], cfg: &SolverConfig, gamma: f64, cd: &CollisionData, grid: &VelocityGrid, mode: usize) -> Result<Self> {
        let tau = cfg.dt / cfg.epsilon.powf(gamma);
        let implicit_tau = match cfg.scheme {
            Scheme::ImplicitEuler => tau,
            Scheme::CrankNicolsonStabilized => 0.5 * tau,
        };
        let n = cd.len();
        let p = cd.p;
        let mut rate = Vec::with_capacity(n);
        let mut dinv = Vec::with_capacity(n);
        for i in 0..n {
            let vk: f64 = grid.node(i).iter().zip(k).map(|(v, k)| v * k).sum();
            let r = Complex64::new(cd.nu[i], cfg.epsilon * vk);
            rate.push(r);
            dinv.push((c(1.0) + r * implicit_tau).inv());
        }
        // quad(νφ ⊗ τνD⁻¹Mφ)
        let mut q = DMatrix::<Complex64>::zeros(p, p);
        for i in 0..n {
            let row = cd.phi_row(i);
            let s = dinv[i] * (cd.weights[i] * cd.nu[i] * cd.nu[i] * cd.m[i] * implicit_tau);
            for r in 0..p {
                let sr = s * row[r];
                for cc in 0..p {
                    q[(r, cc)] += sr * row[cc];
                }
            }
        }
        let a_inv = cd.a_inv.map(c);
        let reduced = DMatrix::<Complex64>::identity(p, p) - a_inv * q;
        let lu = reduced.lu();
        if !lu.is_invertible() {
            return Err(Error::ReducedSystemSingular { mode });
        }
        Ok(ModeStepper { scheme: cfg.scheme, tau, rate, dinv, reduced: lu })
    }

    fn implicit_tau(&self) -> f64 {
        match self.scheme {
            Scheme::ImplicitEuler => self.tau,
            Scheme::CrankNicolsonStabilized => 0.5 * self.tau,
        }
    }

    /// One time step, in place.
    pub fn step(&self, f: &mut [Complex64], cd: &CollisionData, mode: usize) -> Result<()> {
        let p = cd.p;
        let n = cd.len();
        let it = self.implicit_tau();
        if self.scheme == Scheme::CrankNicolsonStabilized {
            let unu = nu_weighted_moments(f, cd);
            for i in 0..n {
                let row = cd.phi_row(i);
                let mut gain = c(0.0);
                for j in 0..p {
                    gain += unu[j] * row[j];
                }
                f[i] = (c(1.0) - self.rate[i] * it) * f[i] + gain * (it * cd.nu[i] * cd.m[i]);
            }
        }
        let mut b = vec![c(0.0); p];
        for i in 0..n {
            let s = self.dinv[i] * f[i] * (cd.weights[i] * cd.nu[i]);
            for (bj, pj) in b.iter_mut().zip(cd.phi_row(i)) {
                *bj += s * *pj;
            }
        }
        let rhs = DVector::from_iterator(p, (0..p).map(|r| (0..p).map(|cc| b[cc] * cd.a_inv[(r, cc)]).sum::<Complex64>()));
        let u = self.reduced.solve(&rhs).ok_or(Error::ReducedSystemSingular { mode })?;
        for i in 0..n {
            let row = cd.phi_row(i);
            let mut gain = c(0.0);
            for j in 0..p {
                gain += u[j] * row[j];
            }
            f[i] = self.dinv[i] * (f[i] + gain * (it * cd.nu[i] * cd.m[i]));
        }
        Ok(())
    }
}

fn nu_weighted_moments(f: &[Complex64], cd: &CollisionData) -> Vec<Complex64> {
    let p = cd.p;
    let b = cd.grid.symmetric_sum_vec(p, |i, out: &mut [Complex64]| {
        let s = f[i] * cd.nu[i];
        for (o, pj) in out.iter_mut().zip(cd.phi_row(i)) {
            *o += s * *pj;
        }
    });
    (0..p).map(|r| (0..p).map(|cc| b[cc] * cd.a_inv[(r, cc)]).sum()).collect()
}

fn zeta_moments(f: &[Complex64], cd: &CollisionData) -> Vec<Complex64> {
    cd.grid.symmetric_sum_vec(cd.p, |i, out: &mut [Complex64]| {
        for (o, zj) in out.iter_mut().zip(cd.zeta_row(i)) {
            *o += f[i] * *zj;
        }
    })
}

/// Σ_v w |f|²/M, Σ_v w ν |f − Kf|²/M and U_ν for one mode.
fn mode_norms(f: &[Complex64], cd: &CollisionData) -> (f64, f64, Vec<Complex64>) {
    let unu = nu_weighted_moments(f, cd);
    let mut fn2 = 0.0;
    let mut gn2 = 0.0;
    for i in 0..cd.len() {
        let row = cd.phi_row(i);
        let mut k = c(0.0);
        for j in 0..cd.p {
            k += unu[j] * row[j];
        }
        let g = f[i] - k * cd.m[i];
        fn2 += cd.weights[i] * f[i].norm_sqr() / cd.m[i];
        gn2 += cd.weights[i] * cd.nu[i] * g.norm_sqr() / cd.m[i];
    }
    (fn2, gn2, unu)
}

/// Moments at one recorded time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    /// U = quad(ζ f) per component.
    pub u: Vec<ScalarField>,
    /// U_ν per component.
    pub u_nu: Vec<ScalarField>,
    pub f_norm: f64,
    pub g_nu_norm: f64,
    pub g_nu_accum: f64,
    /// ∫₀ᵗ U_ν dt (trapezoidal rule over the steps) per component.
    pub u_nu_integral: Vec<ScalarField>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub epsilon: f64,
    pub dt: f64,
    pub snapshots: Vec<Snapshot>,
    /// f_norm after every step, starting with the initial value.
    pub f_norm_steps: Vec<f64>,
    /// Accumulated (∫‖g_ν‖² dt)^{1/2} after every step, starting at 0.
    pub g_nu_accum_steps: Vec<f64>,
}

impl Trajectory {
    pub fn initial_norm(&self) -> f64 {
        self.f_norm_steps[0]
    }
}

/// Number of steps of size dt that reach t, if t is a multiple of dt.
fn steps_to(t: f64, dt: f64) -> Option<usize> {
    let n = (t / dt).round();
    if (n * dt - t).abs() <= 1e-9 * t.max(dt) {
        Some(n as usize)
    } else {
        None
    }
}

struct ModeTrace {
    /// (U, U_ν, ∫U_ν dt) at every record step.
    moments: Vec<[Vec<Complex64>; 3]>,
    fn2: Vec<f64>,
    gn2: Vec<f64>,
}

pub fn evolve(
    f0: &PhaseField,
    cfg: &SolverConfig,
    gamma: f64,
    cd: &CollisionData,
    grid: &VelocityGrid,
    record: &[f64],
) -> Result<(Trajectory, PhaseField)> {
    cfg.validate()?;
    let lat = f0.lattice;
    let total = steps_to(cfg.t_final, cfg.dt)
        .ok_or_else(|| Error::InvalidConfig(format!("t_final = {} is not a multiple of dt = {}", cfg.t_final, cfg.dt)))?;
    let mut record_steps = Vec::with_capacity(record.len());
    for &t in record {
        if t > cfg.t_final * (1.0 + 1e-12) {
            return Err(Error::InvalidConfig(format!("record time {t} exceeds t_final")));
        }
        record_steps.push(
            steps_to(t, cfg.dt)
                .ok_or_else(|| Error::InvalidConfig(format!("record time {t} is not a multiple of dt = {}", cfg.dt)))?,
        );
    }
    let p = cd.p;
    let active: Vec<bool> = (0..lat.len()).map(|m| f0.mode(m).iter().any(|x| x.norm() != 0.0)).collect();
    let traces: Vec<Result<Option<(ModeTrace, Vec<Complex64>)>>> = (0..lat.len())
        .into_par_iter()
        .map(|mode| {
            if !active[mode] {
                return Ok(None);
            }
            let k = lat.wavevector(mode);
            let stepper = ModeStepper::new(&k[..lat.d], cfg, gamma, cd, grid, mode)?;
            let mut f = f0.mode(mode).to_vec();
            let mut trace = ModeTrace { moments: Vec::new(), fn2: Vec::with_capacity(total + 1), gn2: Vec::with_capacity(total + 1) };
            let (a, b, mut unu) = mode_norms(&f, cd);
            trace.fn2.push(a);
            trace.gn2.push(b);
            let mut integral = vec![c(0.0); p];
            let mut slots: Vec<Option<[Vec<Complex64>; 3]>> = vec![None; record_steps.len()];
            let mut take = |step: usize, f: &[Complex64], unu: &[Complex64], integral: &[Complex64]| {
                for (j, &s) in record_steps.iter().enumerate() {
                    if s == step {
                        slots[j] = Some([zeta_moments(f, cd), unu.to_vec(), integral.to_vec()]);
                    }
                }
            };
            take(0, &f, &unu, &integral);
            for step in 1..=total {
                stepper.step(&mut f, cd, mode)?;
                let (a, b, next) = mode_norms(&f, cd);
                trace.fn2.push(a);
                trace.gn2.push(b);
                for ((acc, x0), x1) in integral.iter_mut().zip(&unu).zip(&next) {
                    *acc += (x0 + x1) * (0.5 * cfg.dt);
                }
                unu = next;
                take(step, &f, &unu, &integral);
            }
            trace.moments = slots.into_iter().map(|s| s.expect("every record step visited")).collect();
            Ok(Some((trace, f)))
        })
        .collect();

    let vol = lat.volume();
    let mut fn2 = vec![0.0; total + 1];
    let mut gn2 = vec![0.0; total + 1];
    let mut final_field = PhaseField::zeros(lat, f0.nv);
    let mut snapshots: Vec<Snapshot> = record
        .iter()
        .map(|&t| Snapshot {
            t,
            u: vec![ScalarField::zeros(lat); p],
            u_nu: vec![ScalarField::zeros(lat); p],
            f_norm: 0.0,
            g_nu_norm: 0.0,
            g_nu_accum: 0.0,
            u_nu_integral: vec![ScalarField::zeros(lat); p],
        })
        .collect();
    for (mode, tr) in traces.into_iter().enumerate() {
        let Some((trace, f)) = tr? else { continue };
        for s in 0..=total {
            fn2[s] += trace.fn2[s];
            gn2[s] += trace.gn2[s];
        }
        for (snap, [u, unu, integral]) in snapshots.iter_mut().zip(trace.moments) {
            for j in 0..p {
                snap.u[j].coeffs[mode] = u[j];
                snap.u_nu[j].coeffs[mode] = unu[j];
                snap.u_nu_integral[j].coeffs[mode] = integral[j];
            }
        }
        final_field.mode_mut(mode).copy_from_slice(&f);
    }
    let f_norm_steps: Vec<f64> = fn2.iter().map(|x| (vol * x).sqrt()).collect();
    let mut g_nu_accum_steps = Vec::with_capacity(total + 1);
    let mut acc = 0.0;
    g_nu_accum_steps.push(0.0);
    for s in 1..=total {
        let inc = match cfg.scheme {
            Scheme::ImplicitEuler => gn2[s],
            Scheme::CrankNicolsonStabilized => 0.5 * (gn2[s] + gn2[s - 1]),
        };
        acc += cfg.dt * vol * inc;
        g_nu_accum_steps.push(acc.sqrt());
    }
    for (snap, &s) in snapshots.iter_mut().zip(&record_steps) {
        snap.f_norm = f_norm_steps[s];
        snap.g_nu_norm = (vol * gn2[s]).sqrt();
        snap.g_nu_accum = g_nu_accum_steps[s];
    }
    Ok((Trajectory { epsilon: cfg.epsilon, dt: cfg.dt, snapshots, f_norm_steps, g_nu_accum_steps }, final_field))
}

/// Largest dt ≤ target that divides every time in `times` (within 1e-9).
pub fn commensurate_dt(target: f64, times: &[f64]) -> f64 {
    let mut g = 0.0f64;
    for &t in times {
        if t <= 0.0 {
            continue;
        }
        g = if g == 0.0 { t } else { approx_gcd(g, t) };
    }
    if g == 0.0 {
        return target;
    }
    g / (g / target).ceil()
}

fn approx_gcd(a: f64, b: f64) -> f64 {
    let (mut a, mut b) = (a.max(b), a.min(b));
    let tol = 1e-9 * a;
    while b > tol {
        let r = a % b;
        let r = if (b - r) < tol { 0.0 } else { r };
        a = b;
        b = r;
    }
    a
}

/// Hydrodynamic eigenpair of G_k = −i diag(v·k) + L.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HydroMode {
    pub lambda: Complex64,
    /// U_ν of the eigenvector (secular null vector), unit 2-norm.
    pub u_nu: Vec<Complex64>,
    /// ζ-moments of the eigenvector.
    pub u: Vec<Complex64>,
    /// Fraction of the eigenvector (in L²(M⁻¹)) lying in span{Mφ_j}.
    pub hydro_fraction: f64,
    /// ‖G f − λ f‖ / (|λ| ‖f‖).
    pub residual: f64,
}

struct Generator<'a> {
    cd: &'a CollisionData,
    /// −i v·k − ν.
    diag: Vec<Complex64>,
}

impl<'a> Generator<'a> {
    fn new(k: &[f64], cd: &'a CollisionData, grid: &VelocityGrid) -> Self {
        let diag = (0..cd.len())
            .map(|i| {
                let vk: f64 = grid.node(i).iter().zip(k).map(|(v, k)| v * k).sum();
                Complex64::new(-cd.nu[i], -vk)
            })
            .collect();
        Generator { cd, diag }
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let unu = nu_weighted_moments(x, self.cd);
        let gain = self.cd.macro_part(&unu);
        (0..x.len()).map(|i| self.diag[i] * x[i] + gain[i] * self.cd.nu[i]).collect()
    }

    /// Σ w ν² M φφᵀ / (λ − Δ)^power.
    fn pole_sum(&self, lambda: Complex64, power: i32) -> DMatrix<Complex64> {
        let cd = self.cd;
        let p = cd.p;
        let mut b = DMatrix::<Complex64>::zeros(p, p);
        for i in 0..cd.len() {
            let s = (lambda - self.diag[i]).powi(-power) * (cd.weights[i] * cd.nu[i] * cd.nu[i] * cd.m[i]);
            let row = cd.phi_row(i);
            for r in 0..p {
                let sr = s * row[r];
                for cc in 0..p {
                    b[(r, cc)] += sr * row[cc];
                }
            }
        }
        b
    }

    /// A − B(λ) written without cancellation: Σ wνMφφᵀ (λ + iv·k)/(λ − Δ).
    fn secular(&self, lambda: Complex64) -> DMatrix<Complex64> {
        let cd = self.cd;
        let p = cd.p;
        let mut b = DMatrix::<Complex64>::zeros(p, p);
        for i in 0..cd.len() {
            let shift = lambda - self.diag[i];
            let s = (shift - cd.nu[i]) / shift * (cd.weights[i] * cd.nu[i] * cd.m[i]);
            let row = cd.phi_row(i);
            for r in 0..p {
                let sr = s * row[r];
                for cc in 0..p {
                    b[(r, cc)] += sr * row[cc];
                }
            }
        }
        b
    }

    /// G⁻¹ x by the Woodbury identity (G is diagonal plus rank p).
    fn solve(&self, x: &[Complex64], small: &nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>) -> Vec<Complex64> {
        let cd = self.cd;
        let y: Vec<Complex64> = x.iter().zip(&self.diag).map(|(x, d)| x / d).collect();
        let mut vy = DVector::<Complex64>::zeros(cd.p);
        for i in 0..cd.len() {
            let s = y[i] * (cd.weights[i] * cd.nu[i]);
            for (j, pj) in cd.phi_row(i).iter().enumerate() {
                vy[j] += s * *pj;
            }
        }
        let z = small.solve(&vy).unwrap_or_else(|| DVector::zeros(cd.p));
        (0..cd.len())
            .map(|i| {
                let row = cd.phi_row(i);
                let mut acc = c(0.0);
                for j in 0..cd.p {
                    acc += z[j] * row[j];
                }
                y[i] - acc * (cd.nu[i] * cd.m[i]) / self.diag[i]
            })
            .collect()
    }

    fn inner(&self, x: &[Complex64], y: &[Complex64]) -> Complex64 {
        (0..x.len()).map(|i| x[i].conj() * y[i] * (self.cd.weights[i] / self.cd.m[i])).sum()
    }

    /// Newton iteration on log det(A − B(λ)) = 0.
    fn newton(&self, seed: Complex64) -> Option<Complex64> {
        let mut lambda = seed;
        let mut last = f64::INFINITY;
        for _ in 0..200 {
            let x = self.secular(lambda);
            let dx = self.pole_sum(lambda, 2);
            let lu = x.lu();
            let sol = lu.solve(&dx)?;
            let tr: Complex64 = (0..sol.nrows()).map(|i| sol[(i, i)]).sum();
            if !(tr.re.is_finite() && tr.im.is_finite()) || tr.norm() == 0.0 {
                return None;
            }
            let step = tr.inv();
            let step = if step.norm() > 0.5 * lambda.norm().max(1e-300) && lambda.norm() > 0.0 {
                step * (0.5 * lambda.norm() / step.norm())
            } else {
                step
            };
            lambda -= step;
            if step.norm() <= 1e-13 * lambda.norm() {
                return Some(lambda);
            }
            last = step.norm() / lambda.norm();
        }
        (last <= 1e-6).then_some(lambda)
    }

    fn eigenpair(&self, lambda: Complex64) -> HydroMode {
        let cd = self.cd;
        let x = self.secular(lambda);
        let svd = x.svd(false, true);
        let v_t = svd.v_t.expect("right singular vectors requested");
        let (imin, _) = svd.singular_values.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, s)| if *s < acc.1 { (i, *s) } else { acc });
        let u_nu: Vec<Complex64> = (0..cd.p).map(|j| v_t[(imin, j)].conj()).collect();
        let gain = cd.macro_part(&u_nu);
        let f: Vec<Complex64> = (0..cd.len()).map(|i| gain[i] * cd.nu[i] / (lambda - self.diag[i])).collect();
        let gf = self.apply(&f);
        let fnorm = self.inner(&f, &f).re.sqrt();
        let res = (0..f.len()).map(|i| (gf[i] - lambda * f[i]).norm_sqr() * cd.weights[i] / cd.m[i]).sum::<f64>().sqrt();
        let residual = res / (lambda.norm() * fnorm).max(f64::MIN_POSITIVE);
        let u = zeta_moments(&f, cd);
        let hydro_fraction = self.hydro_fraction(&f);
        HydroMode { lambda, u_nu, u, hydro_fraction, residual }
    }

    /// ‖P f‖ / ‖f‖ with P the L²(M⁻¹)-orthogonal projector onto span{Mφ_j}.
    fn hydro_fraction(&self, f: &[Complex64]) -> f64 {
        let cd = self.cd;
        let p = cd.p;
        // Gram matrix of Mφ_j in L²(M⁻¹) is ∫φφᵀM; right side ∫φ f.
        let mut gram = DMatrix::<f64>::zeros(p, p);
        let mut rhs = DVector::<Complex64>::zeros(p);
        for i in 0..cd.len() {
            let row = cd.phi_row(i);
            for r in 0..p {
                rhs[r] += f[i] * (cd.weights[i] * row[r]);
                for cc in 0..p {
                    gram[(r, cc)] += cd.weights[i] * cd.m[i] * row[r] * row[cc];
                }
            }
        }
        let coef = gram.map(c).lu().solve(&rhs).unwrap_or_else(|| DVector::zeros(p));
        let proj: f64 = coef.iter().zip(rhs.iter()).map(|(a, b)| (a.conj() * b).re).sum();
        let total = self.inner(f, f).re;
        (proj / total).max(0.0).sqrt()
    }
}

/// Small-|λ| hydrodynamic eigenvalues of −i v·k + L: Rayleigh–Ritz seeds from a
/// shift-invert Krylov space on span{Mφ_j}, refined by Newton on the secular
/// equation det(A − B(λ)) = 0. Returns p modes sorted by |Re λ|.
pub fn slow_spectrum(k: &[f64], cd: &CollisionData, grid: &VelocityGrid) -> Result<Vec<HydroMode>> {
    let kn = k.iter().map(|x| x * x).sum::<f64>().sqrt();
    if kn == 0.0 {
        return Err(Error::EigSolveFailure("wave vector must be nonzero".into()));
    }
    let gen = Generator::new(k, cd, grid);
    let p = cd.p;
    let n = cd.len();
    // Woodbury core S = A + Σ w ν² M φφᵀ / Δ.
    let s = cd.a.map(c) + gen.pole_sum(c(0.0), 1).scale(-1.0);
    let s_lu = s.lu();
    if !s_lu.is_invertible() {
        return Err(Error::EigSolveFailure("shift-invert core is singular".into()));
    }
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    let mut block: Vec<Vec<Complex64>> = (0..p)
        .map(|j| (0..n).map(|i| c(cd.m[i] * cd.phi_row(i)[j])).collect())
        .collect();
    for depth in 0..4 {
        if depth > 0 {
            block = block.iter().map(|x| gen.solve(x, &s_lu)).collect();
        }
        for v in &block {
            let mut w = v.clone();
            for _ in 0..2 {
                for q in &basis {
                    let h = gen.inner(q, &w);
                    for i in 0..n {
                        w[i] -= h * q[i];
                    }
                }
            }
            let nrm = gen.inner(&w, &w).re.sqrt();
            let ref_n = gen.inner(v, v).re.sqrt();
            if nrm > 1e-10 * ref_n && nrm > 0.0 {
                basis.push(w.iter().map(|x| x / nrm).collect());
            }
        }
    }
    let m = basis.len();
    let gq: Vec<Vec<Complex64>> = basis.iter().map(|q| gen.apply(q)).collect();
    let h = DMatrix::<Complex64>::from_fn(m, m, |r, cc| gen.inner(&basis[r], &gq[cc]));
    let ritz = h
        .schur()
        .eigenvalues()
        .ok_or_else(|| Error::EigSolveFailure("Rayleigh–Ritz eigenvalues did not converge".into()))?;
    let mut roots: Vec<HydroMode> = Vec::new();
    for seed in ritz.iter() {
        let Some(lambda) = gen.newton(*seed) else { continue };
        if roots.iter().any(|r| (r.lambda - lambda).norm() <= 1e-8 * lambda.norm().max(kn * kn)) {
            continue;
        }
        let mode = gen.eigenpair(lambda);
        if mode.residual < 1e-6 {
            roots.push(mode);
        }
    }
    if roots.len() < p {
        return Err(Error::EigSolveFailure(format!("found {} of {} hydrodynamic roots at |k| = {kn:.3e}", roots.len(), p)));
    }
    roots.sort_by(|a, b| b.hydro_fraction.total_cmp(&a.hydro_fraction));
    roots.truncate(p);
    roots.sort_by(|a, b| a.lambda.re.abs().total_cmp(&b.lambda.re.abs()));
    Ok(roots)
}

/// All eigenvalues of the dense generator (reference route for small grids).
pub fn dense_spectrum(k: &[f64], cd: &CollisionData, grid: &VelocityGrid) -> Result<Vec<Complex64>> {
    let gen = Generator::new(k, cd, grid);
    let n = cd.len();
    let p = cd.p;
    let mut g = DMatrix::<Complex64>::from_diagonal(&DVector::from_vec(gen.diag.clone()));
    // ν M φ_i · A⁻¹ · w ν φ_j
    let left = DMatrix::<f64>::from_fn(n, p, |i, j| cd.nu[i] * cd.m[i] * cd.phi_row(i)[j]);
    let right = DMatrix::<f64>::from_fn(p, n, |j, i| cd.weights[i] * cd.nu[i] * cd.phi_row(i)[j]);
    g += (left * &cd.a_inv * right).map(c);
    let ev = g.schur().eigenvalues().ok_or_else(|| Error::EigSolveFailure("dense Schur did not converge".into()))?;
    Ok(ev.iter().cloned().collect())
}

/// Moments of a single-mode field (for tests and diagnostics).
pub fn mode_moments(f: &[Complex64], cd: &CollisionData) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let u = moments(f, cd)?;
    Ok((u, nu_weighted_moments(f, cd)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::assemble;
    use crate::params::ModelParams;
    use crate::vgrid::{build_grid, GridSpec, Mapping};

    fn classical() -> (CollisionData, VelocityGrid) {
        let p = ModelParams::classical_control(1);
        let g = build_grid(1, GridSpec { n_per_axis: 64, mapping: Mapping::Truncated { radius: 8.0 } }).unwrap();
        (assemble(&p, &g).unwrap(), g)
    }

    fn cfg(eps: f64, dt: f64) -> SolverConfig {
        SolverConfig { epsilon: eps, dt, t_final: dt, n_modes: 8, domain_length: 2.0 * std::f64::consts::PI, scheme: Scheme::ImplicitEuler }
    }

    #[test]
    fn equilibrium_is_stationary_at_k0() {
        let (cd, g) = classical();
        let st = ModeStepper::new(&[0.0], &cfg(1.0, 0.1), 2.0, &cd, &g, 0).unwrap();
        let f0 = cd.macro_part(&[c(1.0), c(0.2), c(-0.4)]);
        let mut f = f0.clone();
        st.step(&mut f, &cd, 0).unwrap();
        for (a, b) in f.iter().zip(&f0) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_mode_conserves_phi_moments() {
        let (cd, g) = classical();
        let st = ModeStepper::new(&[0.0], &cfg(0.5, 0.3), 2.0, &cd, &g, 0).unwrap();
        let mut f: Vec<Complex64> = (0..cd.len()).map(|i| Complex64::new((i as f64 * 0.37).sin() * cd.m[i], 0.1 * cd.m[i])).collect();
        let before = crate::collision::phi_moments(&f, &cd).unwrap();
        for _ in 0..5 {
            st.step(&mut f, &cd, 0).unwrap();
        }
        let after = crate::collision::phi_moments(&f, &cd).unwrap();
        for (a, b) in after.iter().zip(&before) {
            assert!((a - b).norm() < 1e-12 * b.norm().max(1.0));
        }
    }

    #[test]
    fn implicit_euler_matches_explicit_reference() {
        let (cd, g) = classical();
        let k = [1.0];
        let f0: Vec<Complex64> = (0..cd.len()).map(|i| c(cd.m[i] * (1.0 + 0.5 * g.node(i)[0] - 0.2 * g.speed2()[i]))).collect();
        let gen = Generator::new(&k, &cd, &g);
        let mut errs = Vec::new();
        for dt in [1e-2, 5e-3] {
            let st = ModeStepper::new(&k, &cfg(1.0, dt), 2.0, &cd, &g, 1).unwrap();
            let mut f = f0.clone();
            st.step(&mut f, &cd, 1).unwrap();
            let gf = gen.apply(&f0);
            let explicit: Vec<Complex64> = f0.iter().zip(&gf).map(|(a, b)| a + b * dt).collect();
            errs.push((0..f.len()).map(|i| (f[i] - explicit[i]).norm()).fold(0.0, f64::max));
        }
        let ratio = errs[0] / errs[1];
        assert!((ratio - 4.0).abs() < 0.3, "local error ratio {ratio}");
    }

    #[test]
    fn commensurate_dt_divides_record_times() {
        let dt = commensurate_dt(0.0089, &[0.1, 0.25, 0.5]);
        assert!(dt <= 0.0089);
        for t in [0.1, 0.25, 0.5] {
            assert!(steps_to(t, dt).is_some());
        }
    }

    #[test]
    fn slow_spectrum_matches_dense_eigenvalues() {
        let (cd, g) = classical();
        let k = [0.05];
        let slow = slow_spectrum(&k, &cd, &g).unwrap();
        let dense = dense_spectrum(&k, &cd, &g).unwrap();
        for m in &slow {
            let best = dense.iter().map(|z| (z - m.lambda).norm()).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-8, "λ = {} has no dense partner ({best:e})", m.lambda);
        }
        let mut by_mod: Vec<f64> = dense.iter().map(|z| z.norm()).collect();
        by_mod.sort_by(f64::total_cmp);
        let worst = slow.iter().map(|m| m.lambda.norm()).fold(0.0, f64::max);
        assert!(worst <= by_mod[2] * (1.0 + 1e-8));
    }

    #[test]
    fn slow_spectrum_vanishes_as_k_goes_to_zero() {
        let (cd, g) = classical();
        let small = slow_spectrum(&[1e-4], &cd, &g).unwrap();
        assert!(small.iter().all(|m| m.lambda.norm() < 1e-3));
    }
}
