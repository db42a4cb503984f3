use thiserror::Error;

/// Errors raised across the library. The CLI maps each variant onto an exit
/// code through [`Error::exit_code`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("horizon must be positive and finite, got {0}")]
    NonPositiveHorizon(f64),

    #[error("event time {time} at position {index} is outside (0, {horizon}]")]
    TimeOutOfRange { index: usize, time: f64, horizon: f64 },

    #[error("non-finite value at position {0}")]
    NonFinite(usize),

    #[error("event times are not ordered at position {0}")]
    Unordered(usize),

    #[error("sequences have different horizons ({0} vs {1})")]
    HorizonMismatch(f64, f64),

    #[error("invalid bin grid: {0}")]
    InvalidGrid(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("kernel is unstable: branching ratio {0} >= 1")]
    UnstableKernel(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("log argument is not positive at event {0}")]
    NonFiniteLogArgument(usize),

    #[error("derivative is not finite at event {0}")]
    NonFiniteDerivative(usize),

    #[error("no events in any sequence")]
    AllEmpty,

    #[error("sequence is empty")]
    EmptySequence,

    #[error("singular {matrix} matrix: condition number {condition_number:.3e}")]
    SingularCovariance {
        matrix: &'static str,
        condition_number: f64,
    },

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("gradient step diverged: {0}")]
    DivergedStep(String),

    #[error("need at least {needed} sequences, have {have}")]
    InsufficientSequences { needed: usize, have: usize },

    #[error("line {line}: {reason}")]
    ParseError { line: usize, reason: String },

    #[error("input file contains no sequences")]
    EmptyFile,

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// 1 = usage, 2 = data, 3 = numerical failure.
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self {
            Config(_) | InvalidParameter(_) | InvalidGrid(_) | InvalidKernel(_) | DomainError(_) => 1,
            NonFiniteLogArgument(_)
            | NonFiniteDerivative(_)
            | SingularCovariance { .. }
            | DivergedStep(_)
            | UnstableKernel(_) => 3,
            _ => 2,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
