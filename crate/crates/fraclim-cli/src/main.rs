use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod output;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Lib(#[from] fraclim::Error),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("output failure: {0}")]
    Output(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Lib(e) if e.is_validation() => 2,
            CliError::Lib(_) => 3,
            CliError::Input(_) => 2,
            CliError::Output(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fraclim", version, about = "Linear BGK kinetic laboratory and its fractional diffusion limits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the parameter regime and print the derived exponent.
    Validate {
        #[arg(long)]
        config: PathBuf,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Calibrate the equilibrium on the configured grid and report its moments.
    Calibrate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the kinetic solver and write moment snapshots.
    Evolve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        tfinal: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        /// Recorded times, comma separated.
        #[arg(long, value_delimiter = ',')]
        record: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
        /// Initial profile as "fourier: a_1, a_2, ..." (Σ a_j cos(j x₁)).
        #[arg(long)]
        theta: Option<String>,
    },
    /// Tabulate the hydrodynamic eigenvalues and fit the dispersion relation.
    Symbol {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        kmin: f64,
        #[arg(long)]
        kmax: f64,
        #[arg(long)]
        npoints: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Fit κ and γ on one branch of the dispersion relation.
    Kappa {
        #[arg(long)]
        config: PathBuf,
        /// theta or momentum (default: theta with energy conservation, else momentum).
        #[arg(long)]
        branch: Option<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        klist: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the auxiliary-equation limit integral with the fractional Laplacian.
    Auxlimit {
        #[arg(long)]
        config: PathBuf,
        /// heavy_tail or gaussian_degenerate; must match the configuration.
        #[arg(long)]
        family: Option<String>,
        #[arg(long = "eps-list", value_delimiter = ',', required = true)]
        eps_list: Vec<f64>,
        /// Test function as "fourier: a_1, a_2, ...".
        #[arg(long, default_value = "fourier: 1, 0.5")]
        phi: String,
        /// Lattice points per axis.
        #[arg(long, default_value_t = 16)]
        points: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run an ε-sweep against the fractional limit.
    Converge {
        #[arg(long)]
        config: PathBuf,
        /// fourier_limit, stokes_limit, symbol, aux_limit or classical.
        #[arg(long, default_value = "fourier_limit")]
        experiment: String,
        #[arg(long = "eps-list", value_delimiter = ',', required = true)]
        eps_list: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        record: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-validate a stored manifest or report.
    Check {
        #[arg(long)]
        manifest: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Validate { config, out } => commands::validate(&config, out.as_deref()),
        Command::Calibrate { config, out } => commands::calibrate(&config, out.as_deref()),
        Command::Evolve { config, epsilon, tfinal, dt, record, out, theta } => {
            commands::evolve(&commands::EvolveArgs { config, epsilon, tfinal, dt, record, out, theta })
        }
        Command::Symbol { config, kmin, kmax, npoints, out } => commands::symbol(&config, kmin, kmax, npoints, &out),
        Command::Kappa { config, branch, klist, out } => commands::kappa(&config, branch.as_deref(), &klist, out.as_deref()),
        Command::Auxlimit { config, family, eps_list, phi, points, out } => {
            commands::auxlimit(&config, family.as_deref(), &eps_list, &phi, points, &out)
        }
        Command::Converge { config, experiment, eps_list, record, seed, out } => {
            commands::converge(&config, &experiment, eps_list, record, seed, out)
        }
        Command::Check { manifest } => commands::check(&manifest),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
