use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("unsupported regime for a = {a}: {what}")]
    UnsupportedRegime { a: f64, what: &'static str },

    #[error("kernel too short: need t = {needed}, kernel ends at {available}")]
    KernelTooShort { needed: f64, available: f64 },

    #[error("degenerate denominator: integral of Q^2 is {0}")]
    DegenerateDenominator(f64),

    #[error("path has no retained Brownian increments")]
    MissingIncrements,

    #[error("information must be positive, got {0}")]
    NonpositiveInformation(f64),

    #[error("phase d = {d} outside [0, {period})")]
    InvalidPhase { d: f64, period: f64 },

    #[error("empty sample")]
    EmptySample,

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence(_) | Error::DegenerateDenominator(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
