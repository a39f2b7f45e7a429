//! Plain-text `key = value` configuration files.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::collision::{assemble, CollisionData};
use crate::error::{Error, Result};
use crate::kinetic::{Scheme, SolverConfig};
use crate::params::{
    calibrate_moments, gaussian_radius, validate_assumptions, Conservation, Family, ModelParams, RawParams,
    DEFAULT_TAIL_START,
};
use crate::vgrid::{build_grid, GridSpec, Mapping, VelocityGrid};

pub const DEFAULT_DT_FACTOR: f64 = 0.1;
pub const DEFAULT_T_FINAL: f64 = 0.5;
pub const DEFAULT_N_MODES: usize = 32;
pub const DEFAULT_N_PER_AXIS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverDefaults {
    /// dt = dt_factor·ε^γ.
    pub dt_factor: f64,
    pub t_final: f64,
    pub n_modes: usize,
    pub domain_length: f64,
    pub scheme: Scheme,
}

impl Default for SolverDefaults {
    fn default() -> Self {
        SolverDefaults {
            dt_factor: DEFAULT_DT_FACTOR,
            t_final: DEFAULT_T_FINAL,
            n_modes: DEFAULT_N_MODES,
            domain_length: 2.0 * std::f64::consts::PI,
            scheme: Scheme::ImplicitEuler,
        }
    }
}

impl SolverDefaults {
    pub fn solver_config(&self, epsilon: f64, dt: f64, t_final: f64) -> SolverConfig {
        SolverConfig { epsilon, dt, t_final, n_modes: self.n_modes, domain_length: self.domain_length, scheme: self.scheme }
    }
}

/// Fully resolved configuration with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub raw: RawParams,
    /// Maxwellian with ν ≡ 1 and γ = 2 instead of the regime-checked model.
    pub classical_control: bool,
    pub grid: GridSpec,
    pub solver: SolverDefaults,
}

/// Parameters, velocity grid and collision tables built from one configuration.
#[derive(Debug, Clone)]
pub struct Model {
    pub params: ModelParams,
    pub grid: VelocityGrid,
    pub cd: CollisionData,
}

impl Model {
    /// Validates, builds the grid, calibrates M̃ and assembles the collision tables.
    pub fn build(params: &ModelParams, spec: GridSpec) -> Result<Model> {
        let grid = build_grid(params.d, spec)?;
        let params = calibrate_moments(params, &grid)?;
        let cd = assemble(&params, &grid)?;
        Ok(Model { params, grid, cd })
    }
}

impl Config {
    pub fn model_params(&self) -> Result<ModelParams> {
        if self.classical_control {
            Ok(ModelParams::classical_control(self.raw.d))
        } else {
            validate_assumptions(&self.raw)
        }
    }

    pub fn build_model(&self) -> Result<Model> {
        Model::build(&self.model_params()?, self.grid)
    }
}

const KEYS: &[&str] = &[
    "family",
    "conservation",
    "d",
    "alpha",
    "beta",
    "c0_initial",
    "tail_start",
    "n_per_axis",
    "mapping",
    "R_or_L",
    "dt_factor",
    "t_final",
    "n_modes",
    "domain_length",
    "scheme",
];

struct Entry {
    line: usize,
    value: String,
}

fn parse_value<T: std::str::FromStr>(entries: &BTreeMap<String, Entry>, key: &str) -> Result<Option<T>> {
    match entries.get(key) {
        None => Ok(None),
        Some(e) => e
            .value
            .parse::<T>()
            .map(Some)
            .map_err(|_| Error::ParseError { line: e.line, message: format!("invalid value `{}` for `{key}`", e.value) }),
    }
}

fn parse_choice<T: Copy>(entries: &BTreeMap<String, Entry>, key: &str, choices: &[(&str, T)]) -> Result<Option<T>> {
    let Some(e) = entries.get(key) else { return Ok(None) };
    choices.iter().find(|(name, _)| *name == e.value).map(|&(_, v)| Some(v)).ok_or_else(|| {
        let names: Vec<&str> = choices.iter().map(|(n, _)| *n).collect();
        Error::ParseError { line: e.line, message: format!("`{key}` must be one of {}", names.join(", ")) }
    })
}

fn missing(key: &str) -> Error {
    Error::InvalidConfig(format!("missing required key `{key}`"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum FamilyChoice {
    Model(Family),
    Classical,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum MappingChoice {
    Truncated,
    Algebraic,
}

pub fn parse_config(text: &str) -> Result<Config> {
    let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| Error::ParseError { line, message: "expected `key = value`".into() })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(Error::ParseError { line, message: "empty key or value".into() });
        }
        if !KEYS.contains(&key) {
            return Err(Error::UnknownKey(key.to_string()));
        }
        if entries.insert(key.to_string(), Entry { line, value: value.to_string() }).is_some() {
            return Err(Error::ParseError { line, message: format!("duplicate key `{key}`") });
        }
    }

    let family = parse_choice(
        &entries,
        "family",
        &[
            ("heavy_tail", FamilyChoice::Model(Family::HeavyTail)),
            ("gaussian_degenerate", FamilyChoice::Model(Family::GaussianDegenerate)),
            ("classical_control", FamilyChoice::Classical),
        ],
    )?
    .ok_or_else(|| missing("family"))?;
    let conservation = parse_choice(
        &entries,
        "conservation",
        &[("mass_momentum_energy", Conservation::MassMomentumEnergy), ("mass_momentum", Conservation::MassMomentum)],
    )?
    .unwrap_or(Conservation::MassMomentumEnergy);
    let d: usize = parse_value(&entries, "d")?.ok_or_else(|| missing("d"))?;
    if !(d == 1 || d == 2) {
        return Err(Error::UnsupportedCombination(format!("dimension d={d} (supported: 1, 2)")));
    }
    let alpha: Option<f64> = parse_value(&entries, "alpha")?;
    let beta: Option<f64> = parse_value(&entries, "beta")?;
    let c0_initial = parse_value(&entries, "c0_initial")?.unwrap_or(1.0);
    let tail_start = parse_value(&entries, "tail_start")?.unwrap_or(DEFAULT_TAIL_START);

    let (raw, classical_control) = match family {
        FamilyChoice::Model(Family::HeavyTail) => {
            let alpha = alpha.ok_or_else(|| missing("alpha"))?;
            let beta = beta.ok_or_else(|| missing("beta"))?;
            (RawParams { c0_initial, tail_start, ..RawParams::heavy_tail(conservation, d, alpha, beta) }, false)
        }
        FamilyChoice::Model(Family::GaussianDegenerate) => {
            let beta = beta.ok_or_else(|| missing("beta"))?;
            (RawParams { conservation, c0_initial, tail_start, ..RawParams::gaussian(d, beta) }, false)
        }
        FamilyChoice::Classical => (RawParams { tail_start, ..RawParams::gaussian(d, 0.0) }, true),
    };

    let heavy = raw.family == Family::HeavyTail;
    let mapping = parse_choice(
        &entries,
        "mapping",
        &[("truncated", MappingChoice::Truncated), ("algebraic_map", MappingChoice::Algebraic)],
    )?
    .unwrap_or(if heavy { MappingChoice::Algebraic } else { MappingChoice::Truncated });
    let r_or_l: Option<f64> = parse_value(&entries, "R_or_L")?;
    let mapping = match mapping {
        MappingChoice::Truncated => Mapping::Truncated { radius: r_or_l.unwrap_or_else(|| gaussian_radius(d)) },
        MappingChoice::Algebraic => Mapping::AlgebraicMap { scale: r_or_l.unwrap_or(2.0) },
    };
    let grid = GridSpec { n_per_axis: parse_value(&entries, "n_per_axis")?.unwrap_or(DEFAULT_N_PER_AXIS), mapping };

    let defaults = SolverDefaults::default();
    let solver = SolverDefaults {
        dt_factor: parse_value(&entries, "dt_factor")?.unwrap_or(defaults.dt_factor),
        t_final: parse_value(&entries, "t_final")?.unwrap_or(defaults.t_final),
        n_modes: parse_value(&entries, "n_modes")?.unwrap_or(defaults.n_modes),
        domain_length: parse_value(&entries, "domain_length")?.unwrap_or(defaults.domain_length),
        scheme: parse_choice(
            &entries,
            "scheme",
            &[("implicit_euler", Scheme::ImplicitEuler), ("crank_nicolson_stabilized", Scheme::CrankNicolsonStabilized)],
        )?
        .unwrap_or(defaults.scheme),
    };
    if !(solver.dt_factor > 0.0 && solver.t_final >= 0.0 && solver.domain_length > 0.0) {
        return Err(Error::InvalidConfig("dt_factor and domain_length must be positive, t_final nonnegative".into()));
    }
    if solver.n_modes < 2 || solver.n_modes % 2 == 1 {
        return Err(Error::InvalidConfig(format!("n_modes = {} must be even and at least 2", solver.n_modes)));
    }
    Ok(Config { raw, classical_control, grid, solver })
}

pub fn load_config(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gets_defaults() {
        let c = parse_config("family = heavy_tail\nd = 1\nalpha = 5.5\nbeta = 0\n").unwrap();
        assert_eq!(c.raw.conservation, Conservation::MassMomentumEnergy);
        assert_eq!(c.raw.c0_initial, 1.0);
        assert_eq!(c.grid, GridSpec { n_per_axis: 256, mapping: Mapping::AlgebraicMap { scale: 2.0 } });
        assert_eq!(c.solver, SolverDefaults::default());
        assert!((c.model_params().unwrap().gamma - 1.5).abs() < 1e-15);
    }

    #[test]
    fn comments_and_whitespace() {
        let text = "# header\n  family = gaussian_degenerate # trailing\n\nd=1\nbeta = 3.5\nmapping = truncated\nR_or_L = 9\n";
        let c = parse_config(text).unwrap();
        assert_eq!(c.raw.family, Family::GaussianDegenerate);
        assert_eq!(c.grid.mapping, Mapping::Truncated { radius: 9.0 });
    }

    #[test]
    fn bad_number_is_parse_error_with_line() {
        let e = parse_config("family = heavy_tail\nd = 1\nalpha = abc\nbeta = 0\n").unwrap_err();
        assert!(matches!(e, Error::ParseError { line: 3, .. }), "{e:?}");
    }

    #[test]
    fn gamma_is_unknown_key() {
        let e = parse_config("family = heavy_tail\nd = 1\nalpha = 5.5\nbeta = 0\ngamma = 1.5\n").unwrap_err();
        assert_eq!(e, Error::UnknownKey("gamma".into()));
    }

    #[test]
    fn missing_separator_and_duplicates() {
        assert!(matches!(parse_config("family heavy_tail\n"), Err(Error::ParseError { line: 1, .. })));
        assert!(matches!(parse_config("d = 1\nd = 2\n"), Err(Error::ParseError { line: 2, .. })));
        assert!(matches!(parse_config("d = 1\n"), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn classical_control_family() {
        let c = parse_config("family = classical_control\nd = 1\n").unwrap();
        assert_eq!(c.model_params().unwrap().gamma, 2.0);
    }

    #[test]
    fn round_trips_through_serde() {
        let c = parse_config("family = heavy_tail\nconservation = mass_momentum\nd = 2\nalpha = 3.5\nbeta = 0\n").unwrap();
        let s = serde_json::to_string(&c).unwrap();
        let back: Config = serde_json::from_str(&s).unwrap();
        assert_eq!(c, back);
    }
}
