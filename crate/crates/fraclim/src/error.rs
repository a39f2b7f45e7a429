use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("regime violation: {0} does not hold")]
    RegimeViolation(String),
    #[error("unsupported combination: {0}")]
    UnsupportedCombination(String),
    #[error("invalid grid spec: {0}")]
    InvalidSpec(String),
    #[error("non-finite integrand at node {node}")]
    NonFiniteIntegrand { node: usize },
    #[error("calibration system is singular (condition {condition:.3e})")]
    SingularCalibration { condition: f64 },
    #[error("calibrated equilibrium is not positive (min {min:.3e} at |v| = {radius:.3})")]
    NonPositiveEquilibrium { min: f64, radius: f64 },
    #[error("collision matrix A is singular or ill-conditioned (condition {condition:.3e})")]
    SingularA { condition: f64 },
    #[error("initial data is not well prepared: {0}")]
    IllPrepared(String),
    #[error("reduced implicit system is singular at mode {mode}")]
    ReducedSystemSingular { mode: usize },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("eigenvalue solve failed: {0}")]
    EigSolveFailure(String),
    #[error("branch selection is ambiguous (best score {best:.3e}, runner-up {second:.3e})")]
    BranchAmbiguous { best: f64, second: f64 },
    #[error("moment diverged: {what} changed by {change:.3e} (relative) under refinement")]
    MomentDiverged { what: String, change: f64 },
    #[error("quadrature did not converge: {0}")]
    QuadratureDiverged(String),
    #[error("field is not divergence free (residual {0:.3e})")]
    NotDivergenceFree(f64),
    #[error("weight underflow at node {node}")]
    WeightUnderflow { node: usize },
    #[error("bound violated: {bound} at t = {time} (margin {margin:.3e})")]
    BoundViolation { bound: String, time: f64, margin: f64 },
    #[error("parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("invalid experiment plan: {0}")]
    InvalidPlan(String),
}

impl Error {
    /// Validation problems (bad input) as opposed to numerical failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::RegimeViolation(_)
                | Error::UnsupportedCombination(_)
                | Error::InvalidSpec(_)
                | Error::IllPrepared(_)
                | Error::InvalidConfig(_)
                | Error::NotDivergenceFree(_)
                | Error::ParseError { .. }
                | Error::UnknownKey(_)
                | Error::InvalidPlan(_)
                | Error::BoundViolation { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
