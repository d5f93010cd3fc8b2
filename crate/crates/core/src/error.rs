use thiserror::Error;

/// Errors produced by the scan, significance and preprocessing routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A sequence has zero spread, so no standardized score exists.
    #[error("{}", match .row { Some(i) => format!("row {i} is constant (standard deviation is zero)"), None => "row is constant (standard deviation is zero)".to_string() })]
    DegenerateRow { row: Option<usize> },

    #[error("window ({s}, {t}] is not admissible for a sequence of length {len}")]
    InvalidWindow { s: usize, t: usize, len: usize },

    #[error("tilt parameter {theta} is outside the valid domain [0, {theta_max})")]
    TiltOutOfDomain { theta: f64, theta_max: f64 },

    #[error("target {target} does not exceed the null mean {mean}")]
    TargetBelowMean { target: f64, mean: f64 },

    #[error("target {target} exceeds the largest reachable tilted mean {sup}")]
    TargetUnreachable { target: f64, sup: f64 },

    #[error("could not bracket a threshold with tail probability {alpha}")]
    ThresholdNotBracketed { alpha: f64 },

    #[error("leading singular pair did not converge after {iterations} iterations")]
    ConvergenceFailure { iterations: usize },

    #[error("unknown sample '{0}'")]
    UnknownSample(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
