//! ε-sweeps comparing kinetic moments with their fractional limits.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::auxchi::{aux_limit_sweep, log_log_slope, AuxLimitReport, AuxTestFunction};
use crate::config::{load_config, Config, Model};
use crate::diagnostics::{bound_constants, collect_residuals, leray_decompose, RunDiagnostics};
use crate::error::{Error, Result};
use crate::fractional::{estimate_kappa, estimate_kappa_along, geometric_klist, solve_fractional_heat, solve_fractional_stokes, Branch, KappaFit};
use crate::kinetic::{commensurate_dt, evolve, lift_initial, InitialData};
use crate::params::ModelParams;
use crate::spectral::{Lattice, ScalarField, VectorField};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Allowed spread of a fitted residual constant across the sweep.
pub const CONSTANT_STABILITY: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    FourierLimit,
    StokesLimit,
    Symbol,
    AuxLimit,
    Classical,
}

impl std::str::FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fourier_limit" => Ok(Experiment::FourierLimit),
            "stokes_limit" => Ok(Experiment::StokesLimit),
            "symbol" => Ok(Experiment::Symbol),
            "aux_limit" => Ok(Experiment::AuxLimit),
            "classical" => Ok(Experiment::Classical),
            other => Err(Error::InvalidPlan(format!("unknown experiment `{other}`"))),
        }
    }
}

/// Initial data and sampling choices of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyOptions {
    pub record_times: Vec<f64>,
    /// θ_in = Σ a_j cos(j x₁) for the Fourier limit.
    pub theta_amplitudes: Vec<f64>,
    /// φ = Σ a_j cos(j x₁) for the auxiliary limit.
    pub aux_amplitudes: Vec<f64>,
    /// Lattice points per axis of the auxiliary limit fields.
    pub aux_points: usize,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions {
            record_times: vec![0.1, 0.25, 0.5],
            theta_amplitudes: vec![1.0, 0.3],
            aux_amplitudes: vec![1.0, 0.5],
            aux_points: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub config_path: PathBuf,
    pub eps_list: Vec<f64>,
    pub experiment: Experiment,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub options: StudyOptions,
}

pub fn check_eps_list(eps_list: &[f64]) -> Result<()> {
    if eps_list.is_empty() {
        return Err(Error::InvalidPlan("eps_list is empty".into()));
    }
    if eps_list.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
        return Err(Error::InvalidPlan("every ε must lie in (0, 1]".into()));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidPlan("eps_list must be strictly decreasing".into()));
    }
    Ok(())
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        check_eps_list(&self.eps_list)?;
        std::fs::create_dir_all(&self.output_dir)
            .map_err(|e| Error::InvalidPlan(format!("cannot create {}: {e}", self.output_dir.display())))?;
        let meta = std::fs::metadata(&self.output_dir)
            .map_err(|e| Error::InvalidPlan(format!("cannot stat {}: {e}", self.output_dir.display())))?;
        if meta.permissions().readonly() {
            return Err(Error::InvalidPlan(format!("{} is not writable", self.output_dir.display())));
        }
        Ok(())
    }
}

/// Non-fatal findings of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// The error did not decrease from `eps_from` to `eps_to`.
    NonMonotoneConvergence { eps_from: f64, eps_to: f64 },
    /// An a priori bound failed in the run at `epsilon`.
    BoundViolation { epsilon: f64, message: String },
}

/// One ε of a time-dependent sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub epsilon: f64,
    pub dt: f64,
    pub times: Vec<f64>,
    /// Relative L²_x error of the primary observable at each time.
    pub errors: Vec<f64>,
    /// Relative L²_x error of the ζ-temperature (Fourier limit only).
    pub zeta_errors: Vec<f64>,
    /// Largest ‖ρ + θ‖ or ‖div m‖ over the recorded times with t > 0, relative to the data.
    pub constraint_residual: f64,
    /// Largest ‖∫₀ᵗ (ρ_ν + θ_ν) dt‖ relative to the data (Fourier limit only).
    pub boussinesq_weak: Option<f64>,
    /// Largest ‖m − Pm‖ relative to ‖m_in‖ (Stokes limit only).
    pub gradient_part: Option<f64>,
    /// Largest ‖ρ − ρ_in‖ relative to ‖m_in‖ (Stokes limit only).
    pub density_deviation: Option<f64>,
    /// Largest ‖U_ν − U‖ relative to the data.
    pub moment_gap: f64,
    pub g_nu_bound_ratio: f64,
    pub bounds_hold: bool,
    pub diagnostics: RunDiagnostics,
}

impl CaseResult {
    pub fn max_error(&self) -> f64 {
        self.errors.iter().cloned().fold(0.0, f64::max)
    }
}

/// Residuals at or below this level count as roundoff.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;

/// Fit of r_j ≤ C ε_j^power over a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantFit {
    pub power: f64,
    /// C_j = r_j / ε_j^power.
    pub constants: Vec<f64>,
    /// Smallest C valid for every ε above roundoff.
    pub fitted: f64,
    /// Largest growth C_j/C_0 − 1 relative to the largest ε.
    pub growth: f64,
    /// Largest |C_j/C̄ − 1| about the geometric mean C̄.
    pub spread: f64,
    /// No C_j above roundoff exceeds C_0 by more than the stability margin.
    pub stable: bool,
}

impl ConstantFit {
    pub fn new(values: &[f64], eps: &[f64], power: f64) -> ConstantFit {
        let (constants, _) = bound_constants(values, eps, power);
        let above: Vec<(f64, f64)> =
            values.iter().zip(&constants).filter(|(v, _)| **v > ROUNDOFF_FLOOR).map(|(v, c)| (*v, *c)).collect();
        let reference = values[0].max(ROUNDOFF_FLOOR) / eps[0].powf(power);
        let fitted = above.iter().map(|(_, c)| *c).fold(0.0, f64::max);
        let growth = above.iter().map(|(_, c)| c / reference - 1.0).fold(0.0, f64::max);
        let logs: Vec<f64> = constants.iter().map(|c| c.max(f64::MIN_POSITIVE).ln()).collect();
        let mean = (logs.iter().sum::<f64>() / logs.len() as f64).exp();
        let spread = constants.iter().map(|c| (c / mean - 1.0).abs()).fold(0.0, f64::max);
        let stable = growth.is_finite() && growth <= CONSTANT_STABILITY;
        ConstantFit { power, constants, fitted, growth, spread, stable }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub version: String,
    pub experiment: Experiment,
    pub config: Config,
    pub seed: u64,
    pub eps_list: Vec<f64>,
    pub gamma: f64,
    /// Diffusion constant used by the reference solver.
    pub kappa: Option<f64>,
    pub kappa_fit: Option<KappaFit>,
    pub cases: Vec<CaseResult>,
    /// Error at every recorded time strictly decreases along the sweep.
    pub strictly_decreasing: bool,
    /// Fitted order of the largest error in ε (None for a single ε).
    pub order: Option<f64>,
    /// Constraint residual against ε^{γ−1}: the time-integrated Boussinesq
    /// residual for the Fourier limit, ‖div m‖ for the Stokes limit.
    pub constraint_constants: Option<ConstantFit>,
    /// Moment gap against ε^{γ/2}.
    pub gap_constants: Option<ConstantFit>,
    pub aux: Option<AuxLimitReport>,
    pub warnings: Vec<Warning>,
}

/// Wavenumbers εk probed by the smallest ε over the active modes of the data.
/// κ is measured along the direction of the data's lowest mode because tensor
/// velocity grids make the discrete symbol anisotropic.
fn probe_klist(eps_min: f64, kmin: f64, kmax: f64) -> Vec<f64> {
    let lo = eps_min * kmin;
    let hi = (eps_min * kmax).max(2.0 * lo);
    geometric_klist(lo, hi, 4)
}

/// Smallest and largest active wavenumber and the direction of the lowest active mode.
fn active_wavenumbers(fields: &[ScalarField]) -> (f64, f64, [f64; 2]) {
    let lat = fields[0].lattice;
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    let mut dir = [1.0, 0.0];
    for idx in 0..lat.len() {
        let k = lat.wavenumber(idx);
        if k > 0.0 && fields.iter().any(|f| f.coeffs[idx].norm() > 0.0) {
            if k < lo {
                let kv = lat.wavevector(idx);
                dir = [kv[0] / k, kv[1] / k];
            }
            lo = lo.min(k);
            hi = hi.max(k);
        }
    }
    (lo, hi, dir)
}

/// Σ a_j cos(j x₁) on the lattice.
pub fn cosine_field(lattice: Lattice, amps: &[f64]) -> ScalarField {
    ScalarField::from_fn(lattice, |x| amps.iter().enumerate().map(|(j, a)| a * ((j + 1) as f64 * x[0]).cos()).sum())
}

/// Removes roundoff-level Fourier coefficients so that only the intended modes are active.
pub fn drop_roundoff(mut field: ScalarField) -> ScalarField {
    let scale = field.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    for c in field.coeffs.iter_mut() {
        if c.norm() <= 1e-14 * scale {
            *c = num_complex::Complex64::new(0.0, 0.0);
        }
    }
    field
}

fn relative(err: f64, size: f64) -> f64 {
    err / size.max(f64::MIN_POSITIVE)
}

struct Sweep {
    cases: Vec<CaseResult>,
    warnings: Vec<Warning>,
}

fn run_cases<F>(config: &Config, model: &Model, eps_list: &[f64], data: &InitialData, record: &[f64], mut compare: F) -> Result<Sweep>
where
    F: FnMut(&crate::kinetic::Snapshot) -> Result<CaseMeasure>,
{
    let gamma = model.params.gamma;
    let t_final = record.iter().cloned().fold(0.0, f64::max);
    let f0 = lift_initial(data, &model.cd, &model.grid)?;
    let data_size: f64 = data.components.iter().map(|c| c.l2_norm().powi(2)).sum::<f64>().sqrt();
    let mut cases = Vec::with_capacity(eps_list.len());
    let mut warnings = Vec::new();
    for &eps in eps_list {
        let dt = commensurate_dt(config.solver.dt_factor * eps.powf(gamma), record);
        let cfg = config.solver.solver_config(eps, dt, t_final);
        let (traj, _) = evolve(&f0, &cfg, gamma, &model.cd, &model.grid, record)?;
        let diagnostics = collect_residuals(&traj, gamma);
        let bounds_hold = match diagnostics.check_bounds() {
            Ok(()) => true,
            Err(e) => {
                warnings.push(Warning::BoundViolation { epsilon: eps, message: e.to_string() });
                false
            }
        };
        let mut case = CaseResult {
            epsilon: eps,
            dt,
            times: record.to_vec(),
            errors: Vec::new(),
            zeta_errors: Vec::new(),
            constraint_residual: 0.0,
            boussinesq_weak: None,
            gradient_part: None,
            density_deviation: None,
            moment_gap: 0.0,
            g_nu_bound_ratio: diagnostics.g_nu_bound_ratio(),
            bounds_hold,
            diagnostics,
        };
        for (j, snap) in traj.snapshots.iter().enumerate() {
            let m = compare(snap)?;
            case.errors.push(m.error);
            if let Some(z) = m.zeta_error {
                case.zeta_errors.push(z);
            }
            if snap.t > 0.0 {
                case.constraint_residual = case.constraint_residual.max(relative(m.constraint, data_size));
            }
            if let Some(g) = m.gradient_part {
                case.gradient_part = Some(case.gradient_part.unwrap_or(0.0).max(g));
            }
            if let Some(r) = m.density_deviation {
                case.density_deviation = Some(case.density_deviation.unwrap_or(0.0).max(r));
            }
            case.moment_gap = case.moment_gap.max(relative(case.diagnostics.u_vs_unu_gap[j], data_size));
        }
        if !case.diagnostics.boussinesq_weak.is_empty() {
            let worst = case.diagnostics.boussinesq_weak.iter().cloned().fold(0.0, f64::max);
            case.boussinesq_weak = Some(relative(worst, data_size));
        }
        cases.push(case);
    }
    for w in cases.windows(2) {
        if w[1].errors.iter().zip(&w[0].errors).any(|(b, a)| b >= a) {
            warnings.push(Warning::NonMonotoneConvergence { eps_from: w[0].epsilon, eps_to: w[1].epsilon });
        }
    }
    Ok(Sweep { cases, warnings })
}

struct CaseMeasure {
    error: f64,
    zeta_error: Option<f64>,
    constraint: f64,
    gradient_part: Option<f64>,
    density_deviation: Option<f64>,
}

fn fourier_sweep(config: &Config, model: &Model, eps_list: &[f64], opts: &StudyOptions) -> Result<(f64, KappaFit, Sweep)> {
    let params = &model.params;
    let d = params.d;
    let lattice = config.solver.solver_config(1.0, 1.0, 0.0).lattice(d);
    let theta_in = drop_roundoff(cosine_field(lattice, &opts.theta_amplitudes));
    let (kmin, kmax, dir) = active_wavenumbers(std::slice::from_ref(&theta_in));
    let eps_min = eps_list[eps_list.len() - 1];
    let k_list = probe_klist(eps_min, kmin, kmax);
    let fit = estimate_kappa_along(params, &model.cd, &model.grid, &k_list, dir, Branch::Theta)?;
    let kappa = fit.kappa_at_model_gamma;
    let data = InitialData::boussinesq(lattice, &theta_in);
    let gamma = params.gamma;
    let df = d as f64;
    let sweep = run_cases(config, model, eps_list, &data, &opts.record_times, |snap| {
        let reference = solve_fractional_heat(&theta_in, kappa, gamma, snap.t);
        let size = reference.l2_norm();
        let (rho, theta) = (&snap.u[0], &snap.u[d + 1]);
        let theta_psi = theta.scaled(df).sub(&rho.scaled(2.0)).scaled(1.0 / (df + 2.0));
        Ok(CaseMeasure {
            error: relative(theta_psi.sub(&reference).l2_norm(), size),
            zeta_error: Some(relative(theta.sub(&reference).l2_norm(), size)),
            constraint: rho.add(theta).l2_norm(),
            gradient_part: None,
            density_deviation: None,
        })
    })?;
    Ok((kappa, fit, sweep))
}

fn stokes_sweep(config: &Config, model: &Model, eps_list: &[f64], opts: &StudyOptions) -> Result<(f64, KappaFit, Sweep)> {
    let params = &model.params;
    if params.d != 2 {
        return Err(Error::UnsupportedCombination("the Stokes limit needs d = 2".into()));
    }
    let lattice = config.solver.solver_config(1.0, 1.0, 0.0).lattice(2);
    let psi = drop_roundoff(ScalarField::from_fn(lattice, |x| x[0].sin() * x[1].sin()));
    let rho_in = ScalarField::zeros(lattice);
    let data = InitialData::stokes(&rho_in, &psi);
    let m_in = data.momentum();
    let (kmin, kmax, dir) = active_wavenumbers(&m_in.comps);
    let eps_min = eps_list[eps_list.len() - 1];
    let k_list = probe_klist(eps_min, kmin, kmax);
    let fit = estimate_kappa_along(params, &model.cd, &model.grid, &k_list, dir, Branch::Momentum)?;
    let kappa = fit.kappa_at_model_gamma;
    let gamma = params.gamma;
    let m_size = m_in.l2_norm();
    let sweep = run_cases(config, model, eps_list, &data, &opts.record_times, |snap| {
        let m = VectorField { lattice, comps: snap.u[1..=2].to_vec() };
        let (solenoidal, _) = leray_decompose(&m)?;
        let reference = solve_fractional_stokes(&m_in, kappa, gamma, snap.t)?;
        Ok(CaseMeasure {
            error: relative(solenoidal.sub(&reference).l2_norm(), reference.l2_norm()),
            zeta_error: None,
            constraint: m.divergence().l2_norm(),
            gradient_part: Some(relative(m.sub(&solenoidal).l2_norm(), m_size)),
            density_deviation: Some(relative(snap.u[0].sub(&rho_in).l2_norm(), m_size)),
        })
    })?;
    Ok((kappa, fit, sweep))
}

fn classical_model(config: &Config) -> Result<Model> {
    if config.classical_control {
        return config.build_model();
    }
    let params = ModelParams::classical_control(config.raw.d);
    Model::build(&params, params.default_grid_spec())
}

fn empty_report(config: &Config, experiment: Experiment, eps_list: &[f64], seed: u64, gamma: f64) -> ConvergenceReport {
    ConvergenceReport {
        version: VERSION.to_string(),
        experiment,
        config: config.clone(),
        seed,
        eps_list: eps_list.to_vec(),
        gamma,
        kappa: None,
        kappa_fit: None,
        cases: Vec::new(),
        strictly_decreasing: true,
        order: None,
        constraint_constants: None,
        gap_constants: None,
        aux: None,
        warnings: Vec::new(),
    }
}

/// Runs one experiment over an ε-sweep for an already loaded configuration.
pub fn run_study(config: &Config, experiment: Experiment, eps_list: &[f64], seed: u64, opts: &StudyOptions) -> Result<ConvergenceReport> {
    check_eps_list(eps_list)?;
    if matches!(experiment, Experiment::FourierLimit | Experiment::StokesLimit | Experiment::Classical)
        && (opts.record_times.is_empty() || opts.record_times.iter().any(|t| !(*t >= 0.0 && t.is_finite())))
    {
        return Err(Error::InvalidPlan("record times must be nonnegative and nonempty".into()));
    }
    let model = match experiment {
        Experiment::Classical => classical_model(config)?,
        Experiment::AuxLimit => {
            let params = config.model_params()?;
            let spec = params.default_grid_spec();
            Model::build(&params, if config.classical_control { spec } else { config.grid })?
        }
        _ => config.build_model()?,
    };
    let gamma = model.params.gamma;
    let mut report = empty_report(config, experiment, eps_list, seed, gamma);
    match experiment {
        Experiment::FourierLimit | Experiment::Classical | Experiment::StokesLimit => {
            let (kappa, fit, sweep) = if experiment == Experiment::StokesLimit {
                stokes_sweep(config, &model, eps_list, opts)?
            } else {
                fourier_sweep(config, &model, eps_list, opts)?
            };
            report.kappa = Some(kappa);
            report.kappa_fit = Some(fit);
            report.strictly_decreasing = sweep.cases.windows(2).all(|w| w[1].errors.iter().zip(&w[0].errors).all(|(b, a)| b < a));
            if sweep.cases.len() >= 2 {
                let eps: Vec<f64> = sweep.cases.iter().map(|c| c.epsilon).collect();
                let errs: Vec<f64> = sweep.cases.iter().map(|c| c.max_error()).collect();
                report.order = Some(log_log_slope(&eps, &errs));
                let res: Vec<f64> =
                    sweep.cases.iter().map(|c| c.boussinesq_weak.unwrap_or(c.constraint_residual)).collect();
                report.constraint_constants = Some(ConstantFit::new(&res, &eps, gamma - 1.0));
                let gaps: Vec<f64> = sweep.cases.iter().map(|c| c.moment_gap).collect();
                report.gap_constants = Some(ConstantFit::new(&gaps, &eps, gamma / 2.0));
            }
            report.cases = sweep.cases;
            report.warnings = sweep.warnings;
        }
        Experiment::Symbol => {
            let hi = eps_list[0];
            let lo = eps_list[eps_list.len() - 1];
            if lo == hi {
                return Err(Error::InvalidPlan("the symbol experiment needs at least two ε".into()));
            }
            let branch = Branch::default_for(&model.params);
            let fit = estimate_kappa(&model.params, &model.cd, &model.grid, &geometric_klist(lo, hi, eps_list.len().max(4)), branch)?;
            report.kappa = Some(fit.kappa_fit);
            report.kappa_fit = Some(fit);
        }
        Experiment::AuxLimit => {
            let phi = AuxTestFunction::from_cosines(model.params.d, &opts.aux_amplitudes);
            let lattice = Lattice::periodic(model.params.d, opts.aux_points);
            let aux = aux_limit_sweep(&phi, &model.params, eps_list, &lattice)?;
            report.strictly_decreasing = aux.strictly_decreasing;
            report.order = aux.order;
            for w in aux.rows.windows(2) {
                if w[1].l2_error >= w[0].l2_error {
                    report.warnings.push(Warning::NonMonotoneConvergence { eps_from: w[0].eps, eps_to: w[1].eps });
                }
            }
            report.aux = Some(aux);
        }
    }
    Ok(report)
}

/// Loads the plan's configuration and runs its study.
pub fn run_convergence_study(plan: &ExperimentPlan) -> Result<ConvergenceReport> {
    plan.validate()?;
    let config = load_config(&plan.config_path)?;
    run_study(&config, plan.experiment, &plan.eps_list, plan.seed, &plan.options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn classical_config() -> Config {
        parse_config("family = classical_control\nd = 1\nn_per_axis = 64\nn_modes = 8\n").unwrap()
    }

    #[test]
    fn eps_list_must_decrease() {
        assert!(check_eps_list(&[0.1, 0.2]).is_err());
        assert!(check_eps_list(&[0.1, 0.1]).is_err());
        assert!(check_eps_list(&[]).is_err());
        assert!(check_eps_list(&[0.2, 0.1]).is_ok());
    }

    #[test]
    fn single_eps_has_no_fit() {
        let opts = StudyOptions { record_times: vec![0.1], ..StudyOptions::default() };
        let r = run_study(&classical_config(), Experiment::Classical, &[0.2], 0, &opts).unwrap();
        assert_eq!(r.cases.len(), 1);
        assert_eq!(r.cases[0].errors.len(), 1);
        assert!(r.order.is_none());
        assert!(r.constraint_constants.is_none());
        assert_eq!(r.version, VERSION);
    }

    #[test]
    fn classical_sweep_converges() {
        let opts = StudyOptions { record_times: vec![0.1], ..StudyOptions::default() };
        let r = run_study(&classical_config(), Experiment::Classical, &[0.2, 0.1, 0.05], 0, &opts).unwrap();
        assert!(r.strictly_decreasing, "{:?}", r.cases.iter().map(|c| c.errors.clone()).collect::<Vec<_>>());
        assert!(r.cases.iter().all(|c| c.bounds_hold));
        assert!(r.order.unwrap() > 0.5);
    }

    #[test]
    fn constant_fit_is_an_upper_bound() {
        let eps = [0.2, 0.1, 0.05];
        let exact: Vec<f64> = eps.iter().map(|e: &f64| 3.0 * e.sqrt()).collect();
        let fit = ConstantFit::new(&exact, &eps, 0.5);
        assert!(fit.stable && fit.growth.abs() < 1e-12 && (fit.fitted - 3.0).abs() < 1e-12);
        let faster: Vec<f64> = eps.iter().map(|e| e * e).collect();
        assert!(ConstantFit::new(&faster, &eps, 0.5).stable);
        let slower: Vec<f64> = eps.iter().map(|e| e.powf(0.1)).collect();
        assert!(!ConstantFit::new(&slower, &eps, 0.5).stable);
        assert!(ConstantFit::new(&[1e-15, 3e-15, 5e-15], &eps, 0.5).stable);
    }

    #[test]
    fn plan_rejects_bad_sweep() {
        let dir = std::env::temp_dir().join("fraclim-study-plan");
        let plan = ExperimentPlan {
            config_path: dir.join("missing.cfg"),
            eps_list: vec![0.05, 0.1],
            experiment: Experiment::FourierLimit,
            output_dir: dir,
            seed: 1,
            options: StudyOptions::default(),
        };
        assert!(matches!(run_convergence_study(&plan), Err(Error::InvalidPlan(_))));
    }
}
