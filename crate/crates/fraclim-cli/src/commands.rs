//! Subcommand implementations.

use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use fraclim::config::{load_config, Config};
use fraclim::diagnostics::{collect_residuals, RunDiagnostics};
use fraclim::fractional::{estimate_kappa, geometric_klist, Branch, KappaFit};
use fraclim::kinetic::{commensurate_dt, evolve as run_solver, lift_initial, slow_spectrum, InitialData, Preparation};
use fraclim::params::{equilibrium_moments, moment_targets, Conservation, Family};
use fraclim::spectral::{Lattice, ScalarField};
use fraclim::study::{cosine_field, drop_roundoff, run_study, Experiment, StudyOptions, VERSION};
use fraclim::auxchi::{aux_limit_sweep, AuxTestFunction};
use fraclim::Error;

use crate::output::{ensure_dir, num, print_json, to_sorted_value, write_csv, write_json};
use crate::CliError;

/// Amplitudes used when no profile is given.
const DEFAULT_AMPLITUDES: [f64; 2] = [1.0, 0.3];

/// Report skeleton shared by every subcommand: version and resolved configuration.
fn report(config: &Config) -> Result<Map<String, Value>, CliError> {
    let mut map = Map::new();
    map.insert("version".into(), Value::String(VERSION.to_string()));
    map.insert("config".into(), to_sorted_value(config)?);
    Ok(map)
}

fn insert<T: serde::Serialize>(map: &mut Map<String, Value>, key: &str, value: &T) -> Result<(), CliError> {
    map.insert(key.to_string(), to_sorted_value(value)?);
    Ok(())
}

fn emit(map: Map<String, Value>, out: Option<&Path>) -> Result<(), CliError> {
    let value = Value::Object(map);
    if let Some(path) = out {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            ensure_dir(parent)?;
        }
        write_json(path, &value)?;
    }
    print_json(&value)
}

/// Parses `fourier: a_1, a_2, ...` into cosine amplitudes.
pub fn parse_fourier(text: &str) -> Result<Vec<f64>, CliError> {
    let body = text
        .trim()
        .strip_prefix("fourier:")
        .ok_or_else(|| CliError::Input(format!("profile `{text}` must start with `fourier:`")))?;
    let amps = body
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| CliError::Input(format!("bad Fourier amplitude `{}`", s.trim()))))
        .collect::<Result<Vec<f64>, CliError>>()?;
    if amps.iter().any(|a| !a.is_finite()) || amps.iter().all(|a| *a == 0.0) {
        return Err(CliError::Input("Fourier amplitudes must be finite and not all zero".into()));
    }
    Ok(amps)
}

pub fn validate(config_path: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let config = load_config(config_path)?;
    let params = config.model_params()?;
    let mut map = report(&config)?;
    insert(&mut map, "gamma", &params.gamma)?;
    insert(&mut map, "params", &params)?;
    insert(&mut map, "valid", &true)?;
    emit(map, out)
}

pub fn calibrate(config_path: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let config = load_config(config_path)?;
    let model = config.build_model()?;
    let d = model.params.d;
    // |v|⁴ M̃ is not integrable without energy conservation.
    let finite = match model.params.conservation {
        Conservation::MassMomentumEnergy => 3,
        Conservation::MassMomentum => 2,
    };
    let achieved = equilibrium_moments(&model.params, &model.grid)?;
    let targets = moment_targets(d);
    let moments: Vec<Value> = (0..finite)
        .map(|k| {
            json!({
                "power": 2 * k,
                "achieved": achieved[k],
                "target": targets[k],
                "relative_error": (achieved[k] - targets[k]).abs() / targets[k],
            })
        })
        .collect();
    let a: Vec<Vec<f64>> = (0..model.cd.a.nrows()).map(|i| model.cd.a.row(i).iter().cloned().collect()).collect();
    let mut map = report(&config)?;
    insert(&mut map, "gamma", &model.params.gamma)?;
    insert(&mut map, "params", &model.params)?;
    insert(&mut map, "moments", &moments)?;
    insert(&mut map, "a_matrix", &a)?;
    insert(&mut map, "continuity_constant", &model.cd.continuity_constant())?;
    insert(&mut map, "velocity_nodes", &model.cd.len())?;
    emit(map, out)
}

pub struct EvolveArgs {
    pub config: PathBuf,
    pub epsilon: f64,
    pub tfinal: Option<f64>,
    pub dt: Option<f64>,
    pub record: Vec<f64>,
    pub out: PathBuf,
    pub theta: Option<String>,
}

/// Well-prepared initial data for the configured conservation law.
fn initial_data(lattice: Lattice, conservation: Conservation, profile: &[f64]) -> (InitialData, String) {
    let a = drop_roundoff(cosine_field(lattice, profile));
    match (conservation, lattice.d) {
        (Conservation::MassMomentumEnergy, _) => {
            (InitialData::boussinesq(lattice, &a), "theta = -rho = fourier profile, m = 0".into())
        }
        (Conservation::MassMomentum, 2) => {
            let psi = drop_roundoff(ScalarField::from_fn(lattice, |x| x[0].sin() * x[1].sin()));
            (InitialData::stokes(&a, &psi), "rho = fourier profile, m = curl of sin(x1) sin(x2)".into())
        }
        (Conservation::MassMomentum, _) => {
            let components = vec![a, ScalarField::zeros(lattice)];
            (InitialData { components, preparation: Preparation::StokesLimit }, "rho = fourier profile, m = 0".into())
        }
    }
}

fn column_names(d: usize, energy: bool) -> Vec<String> {
    let mut names = vec!["rho".to_string()];
    names.extend((1..=d).map(|i| format!("m{i}")));
    if energy {
        names.push("theta".into());
    }
    names
}

pub fn evolve(args: &EvolveArgs) -> Result<(), CliError> {
    let config = load_config(&args.config)?;
    let model = config.build_model()?;
    let params = &model.params;
    let d = params.d;
    let energy = params.conservation == Conservation::MassMomentumEnergy;
    let t_final = args.tfinal.unwrap_or(config.solver.t_final);
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(CliError::Input(format!("tfinal = {t_final} must be positive")));
    }
    let record = if args.record.is_empty() { vec![t_final] } else { args.record.clone() };
    if record.iter().any(|t| !(*t >= 0.0 && *t <= t_final)) {
        return Err(CliError::Input("record times must lie in [0, tfinal]".into()));
    }
    let mut anchors = record.clone();
    anchors.push(t_final);
    let dt = args.dt.unwrap_or_else(|| commensurate_dt(config.solver.dt_factor * args.epsilon.powf(params.gamma), &anchors));
    let cfg = config.solver.solver_config(args.epsilon, dt, t_final);
    cfg.validate()?;
    let lattice = cfg.lattice(d);
    let profile = match &args.theta {
        Some(text) => parse_fourier(text)?,
        None => DEFAULT_AMPLITUDES.to_vec(),
    };
    let (data, description) = initial_data(lattice, params.conservation, &profile);
    let f0 = lift_initial(&data, &model.cd, &model.grid)?;
    let (traj, _) = run_solver(&f0, &cfg, params.gamma, &model.cd, &model.grid, &record)?;
    let diagnostics = collect_residuals(&traj, params.gamma);

    let out = ensure_dir(&args.out)?;
    let names = column_names(d, energy);
    let mut header = vec!["x_index".to_string()];
    header.extend(names.iter().cloned());
    header.extend(names.iter().map(|n| format!("{n}_nu")));
    let mut files = Vec::with_capacity(traj.snapshots.len());
    for (j, snap) in traj.snapshots.iter().enumerate() {
        let columns: Vec<Vec<f64>> = snap.u.iter().chain(&snap.u_nu).map(|f| f.to_samples()).collect();
        let rows: Vec<Vec<String>> = (0..lattice.len())
            .map(|i| std::iter::once(i.to_string()).chain(columns.iter().map(|c| num(c[i]))).collect())
            .collect();
        let name = format!("snapshot_{j:03}.csv");
        write_csv(&out.join(&name), &header, &rows)?;
        files.push(json!({ "file": name, "t": snap.t }));
    }

    let bounds = diagnostics.check_bounds();
    let mut map = report(&config)?;
    insert(
        &mut map,
        "run",
        &json!({
            "epsilon": args.epsilon,
            "dt": dt,
            "t_final": t_final,
            "record": record,
            "initial_data": description,
            "profile": profile,
            "gamma": params.gamma,
            "n_modes": cfg.n_modes,
        }),
    )?;
    insert(&mut map, "snapshots", &files)?;
    insert(&mut map, "diagnostics", &diagnostics)?;
    insert(&mut map, "bounds_hold", &bounds.is_ok())?;
    if let Err(e) = &bounds {
        insert(&mut map, "bound_violation", &e.to_string())?;
    }
    emit(map, Some(&out.join("manifest.json")))?;
    bounds.map_err(CliError::from)
}

/// Orders the modes by imaginary part, then by decay, so columns are stable across k.
fn sort_modes(modes: &mut [(f64, f64)]) {
    let scale = modes.iter().map(|(re, im)| re.hypot(*im)).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let key = |im: f64| (im / (1e-9 * scale)).round() as i64;
    modes.sort_by(|a, b| key(a.1).cmp(&key(b.1)).then(b.0.total_cmp(&a.0)));
}

pub fn symbol(config_path: &Path, kmin: f64, kmax: f64, npoints: usize, out: &Path) -> Result<(), CliError> {
    if !(kmin > 0.0 && kmax > kmin && kmax.is_finite()) {
        return Err(CliError::Input("need 0 < kmin < kmax".into()));
    }
    if npoints < 2 {
        return Err(CliError::Input("npoints must be at least 2".into()));
    }
    let config = load_config(config_path)?;
    let model = config.build_model()?;
    let d = model.params.d;
    let p = model.cd.p;
    let ks = geometric_klist(kmin, kmax, npoints);
    let mut rows = Vec::with_capacity(ks.len());
    for &k in &ks {
        let mut kv = vec![0.0; d];
        kv[0] = k;
        let mut modes: Vec<(f64, f64)> =
            slow_spectrum(&kv, &model.cd, &model.grid)?.iter().map(|m| (m.lambda.re, m.lambda.im)).collect();
        sort_modes(&mut modes);
        let mut row = vec![num(k)];
        row.extend(modes.iter().map(|m| num(m.0)));
        row.extend(modes.iter().map(|m| num(m.1)));
        rows.push(row);
    }
    let mut header = vec!["k".to_string()];
    header.extend((1..=p).map(|i| format!("re_lambda_{i}")));
    header.extend((1..=p).map(|i| format!("im_lambda_{i}")));
    let out = ensure_dir(out)?;
    write_csv(&out.join("symbol.csv"), &header, &rows)?;

    let branch = Branch::default_for(&model.params);
    let fit = estimate_kappa(&model.params, &model.cd, &model.grid, &ks, branch).map_err(CliError::from);
    let mut map = report(&config)?;
    insert(&mut map, "gamma", &model.params.gamma)?;
    insert(&mut map, "k", &ks)?;
    match &fit {
        Ok(f) => insert(&mut map, "fit", f)?,
        Err(e) => {
            map.insert("fit".into(), Value::Null);
            insert(&mut map, "fit_error", &e.to_string())?;
        }
    }
    emit(map, Some(&out.join("symbol.json")))?;
    fit.map(|_| ())
}

fn kappa_summary(fit: &KappaFit) -> Value {
    json!({
        "gamma_fit": fit.gamma_fit,
        "kappa_fit": fit.kappa_fit,
        "residual": fit.residual,
        "analytic_candidate": fit.analytic_candidate,
    })
}

pub fn kappa(config_path: &Path, branch: Option<&str>, klist: &[f64], out: Option<&Path>) -> Result<(), CliError> {
    let config = load_config(config_path)?;
    let branch = branch.map(str::parse::<Branch>).transpose()?;
    let model = config.build_model()?;
    let branch = branch.unwrap_or_else(|| Branch::default_for(&model.params));
    if branch == Branch::Theta && model.params.conservation == Conservation::MassMomentum {
        return Err(Error::UnsupportedCombination("the theta branch needs energy conservation".into()).into());
    }
    if branch == Branch::Momentum && model.params.d == 1 {
        return Err(Error::UnsupportedCombination("the momentum branch needs d = 2".into()).into());
    }
    let fit = estimate_kappa(&model.params, &model.cd, &model.grid, klist, branch)?;
    let mut map = report(&config)?;
    if let Value::Object(summary) = kappa_summary(&fit) {
        map.extend(summary);
    }
    insert(&mut map, "branch", &fit.branch)?;
    insert(&mut map, "gamma_model", &model.params.gamma)?;
    insert(&mut map, "kappa_at_model_gamma", &fit.kappa_at_model_gamma)?;
    insert(&mut map, "residual_at_model_gamma", &fit.residual_at_model_gamma)?;
    insert(&mut map, "samples", &fit.samples)?;
    emit(map, out)
}

pub fn auxlimit(
    config_path: &Path,
    family: Option<&str>,
    eps_list: &[f64],
    phi: &str,
    points: usize,
    out: &Path,
) -> Result<(), CliError> {
    let config = load_config(config_path)?;
    if config.classical_control {
        return Err(Error::UnsupportedCombination("the auxiliary limit needs a fractional family".into()).into());
    }
    if let Some(name) = family {
        let requested: Family = serde_json::from_value(Value::String(name.to_string()))
            .map_err(|_| CliError::Input(format!("unknown family `{name}`")))?;
        if requested != config.raw.family {
            return Err(CliError::Input(format!("--family {name} does not match the configuration")));
        }
    }
    fraclim::study::check_eps_list(eps_list)?;
    if points < 2 || points % 2 == 1 {
        return Err(CliError::Input("points must be even and at least 2".into()));
    }
    let amps = parse_fourier(phi)?;
    let params = config.model_params()?;
    let test = AuxTestFunction::from_cosines(params.d, &amps);
    let lattice = Lattice::periodic(params.d, points);
    let sweep = aux_limit_sweep(&test, &params, eps_list, &lattice)?;

    let out = ensure_dir(out)?;
    let header: Vec<String> = ["epsilon", "l2_error", "kappa_fit"].iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<String>> = sweep.rows.iter().map(|r| vec![num(r.eps), num(r.l2_error), num(r.kappa_fit)]).collect();
    write_csv(&out.join("aux_limit.csv"), &header, &rows)?;
    let mut map = report(&config)?;
    insert(&mut map, "phi", &amps)?;
    insert(&mut map, "points", &points)?;
    insert(&mut map, "family", &sweep.family)?;
    insert(&mut map, "gamma", &sweep.gamma)?;
    insert(&mut map, "order", &sweep.order)?;
    insert(&mut map, "strictly_decreasing", &sweep.strictly_decreasing)?;
    insert(&mut map, "rows", &sweep.rows)?;
    emit(map, Some(&out.join("aux_limit.json")))
}

pub fn converge(
    config_path: &Path,
    experiment: &str,
    eps_list: Vec<f64>,
    record: Vec<f64>,
    seed: u64,
    out: PathBuf,
) -> Result<(), CliError> {
    let experiment: Experiment = experiment.parse()?;
    let mut options = StudyOptions::default();
    if !record.is_empty() {
        if record.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(CliError::Input("record times must be positive".into()));
        }
        options.record_times = record;
    }
    let plan = fraclim::study::ExperimentPlan {
        config_path: config_path.to_path_buf(),
        eps_list,
        experiment,
        output_dir: out.clone(),
        seed,
        options,
    };
    plan.validate()?;
    let config = load_config(config_path)?;
    let report = run_study(&config, plan.experiment, &plan.eps_list, seed, &plan.options)?;

    let header: Vec<String> = ["epsilon", "t", "error", "zeta_error"].iter().map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    for case in &report.cases {
        for (j, t) in case.times.iter().enumerate() {
            let zeta = case.zeta_errors.get(j).map(|z| num(*z)).unwrap_or_default();
            rows.push(vec![num(case.epsilon), num(*t), num(case.errors[j]), zeta]);
        }
    }
    write_csv(&out.join("convergence.csv"), &header, &rows)?;
    let value = to_sorted_value(&report)?;
    write_json(&out.join("convergence.json"), &value)?;
    print_json(&value)
}

fn stored_config(value: &Value) -> Result<Config, CliError> {
    let version = value.get("version").and_then(Value::as_str).ok_or_else(|| CliError::Input("missing version".into()))?;
    if version != VERSION {
        return Err(CliError::Input(format!("manifest version {version} differs from {VERSION}")));
    }
    let config = value.get("config").ok_or_else(|| CliError::Input("missing config".into()))?;
    let config: Config = serde_json::from_value(config.clone()).map_err(|e| CliError::Input(format!("bad config: {e}")))?;
    config.model_params()?;
    Ok(config)
}

fn stored_diagnostics(value: &Value) -> Result<RunDiagnostics, CliError> {
    serde_json::from_value(value.clone()).map_err(|e| CliError::Input(format!("bad diagnostics: {e}")))
}

pub fn check(manifest: &Path) -> Result<(), CliError> {
    let text =
        std::fs::read_to_string(manifest).map_err(|e| CliError::Input(format!("cannot read {}: {e}", manifest.display())))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| CliError::Input(format!("bad JSON: {e}")))?;
    let config = stored_config(&value)?;
    let mut runs = Vec::new();
    if let Some(diag) = value.get("diagnostics") {
        runs.push(stored_diagnostics(diag)?);
    }
    if let Some(cases) = value.get("cases").and_then(Value::as_array) {
        for case in cases {
            let diag = case.get("diagnostics").ok_or_else(|| CliError::Input("case without diagnostics".into()))?;
            runs.push(stored_diagnostics(diag)?);
        }
    }
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut files = 0;
    if let Some(snaps) = value.get("snapshots").and_then(Value::as_array) {
        for snap in snaps {
            let name = snap.get("file").and_then(Value::as_str).ok_or_else(|| CliError::Input("snapshot without file".into()))?;
            if !base.join(name).is_file() {
                return Err(CliError::Input(format!("missing snapshot file {name}")));
            }
            files += 1;
        }
    }
    for run in &runs {
        run.check_bounds()?;
    }
    let mut map = report(&config)?;
    insert(&mut map, "valid", &true)?;
    insert(&mut map, "runs_checked", &runs.len())?;
    insert(&mut map, "files_checked", &files)?;
    emit(map, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourier_profiles_parse() {
        assert_eq!(parse_fourier("fourier: 1, -0.5,2e-1").unwrap(), vec![1.0, -0.5, 0.2]);
        assert!(parse_fourier("1, 2").is_err());
        assert!(parse_fourier("fourier: 0, 0").is_err());
        assert!(parse_fourier("fourier: 1, x").is_err());
    }

    #[test]
    fn modes_sort_by_frequency_then_decay() {
        let mut modes = vec![(-1.0, 0.5), (-0.2, 1e-20), (-0.3, -0.5), (-0.1, -1e-20)];
        sort_modes(&mut modes);
        assert_eq!(modes, vec![(-0.3, -0.5), (-0.1, -1e-20), (-0.2, 1e-20), (-1.0, 0.5)]);
    }
}
