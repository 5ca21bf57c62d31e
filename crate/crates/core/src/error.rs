use thiserror::Error;

use crate::geometry::ValidityFailure;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("invalid thickness profile: {0}")]
    InvalidProfile(String),

    #[error("invalid thin domain: {}", format_failures(.0))]
    InvalidDomain(Vec<ValidityFailure>),

    #[error("offset r = {r} lies outside the tubular neighborhood of radius {delta}")]
    OutOfTube { r: f64, delta: f64 },

    #[error("reference coordinate sigma = {0} outside [0, 1]")]
    SigmaOutOfRange(f64),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("time step {dt} exceeds the explicit-reaction stability limit {dt_max}")]
    StabilityGuard { dt: f64, dt_max: f64 },

    #[error("linear solver failed: {0}")]
    LinearSolver(String),

    #[error("solution became non-finite at t = {t}")]
    Diverged {
        t: f64,
        /// Energy trace up to and including the first non-finite state.
        trace: Box<crate::trace::EnergyTrace>,
    },

    #[error("Galerkin mode count {modes} aliases on a grid of {m_theta} nodes (need m_theta >= 4L + 2)")]
    Aliasing { modes: usize, m_theta: usize },

    #[error("rate fit needs at least 3 pairs above the floor, got {kept} (excluded {excluded})")]
    InsufficientRateData { kept: usize, excluded: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("epsilon = {epsilon}: {source}")]
    AtEpsilon {
        epsilon: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than numerical failure.
    pub fn is_config_error(&self) -> bool {
        match self {
            Error::InvalidCurve(_)
            | Error::InvalidProfile(_)
            | Error::InvalidDomain(_)
            | Error::InvalidParameter(_)
            | Error::StabilityGuard { .. }
            | Error::Aliasing { .. }
            | Error::GridTooCoarse(_)
            | Error::Config(_) => true,
            Error::AtEpsilon { source, .. } => source.is_config_error(),
            _ => false,
        }
    }
}

fn format_failures(failures: &[ValidityFailure]) -> String {
    failures
        .iter()
        .map(|f| f.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
