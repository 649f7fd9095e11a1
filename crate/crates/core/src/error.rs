use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input contains a non-finite value")]
    NonFinite,

    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },

    #[error("{got} samples exceeds the Gram matrix cap of {cap}")]
    TooManySamples { got: usize, cap: usize },

    #[error("kernel bandwidth must be positive, got {0}")]
    BadBandwidth(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("status has zero variance (all censored or all events)")]
    DegenerateStatus,

    #[error("observed times have zero variance")]
    DegenerateTimes,

    #[error("dataset has no covariates")]
    EmptyCovariates,

    #[error("cutoff d_n = {d_n} outside 1..={p}")]
    BadCutoff { d_n: usize, p: usize },

    #[error("invalid dataset: {0}")]
    Validation(String),

    #[error("AR(1) correlation must satisfy |rho| < 1, got {0}")]
    BadRho(f64),

    #[error("survival time overflowed f64 (log time {0}); enable log-scale times")]
    TimeOverflow(f64),

    #[error("censoring target {target} not attainable: {reason}")]
    InfeasibleTarget { target: f64, reason: String },

    #[error("censoring calibration did not converge after {steps} bisection steps")]
    NoConvergence { steps: usize },

    #[error("covariate index {index} outside 1..={p}")]
    ActiveNotInRange { index: usize, p: usize },

    #[error("no replication records")]
    EmptyRecords,

    #[error("replication {rep}: {source}")]
    Replication {
        rep: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at line {line}, column {column}: {reason}")]
    Parse {
        line: u64,
        column: usize,
        reason: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Strips replication annotations to reach the underlying failure.
    pub fn root(&self) -> &Error {
        match self {
            Error::Replication { source, .. } => source.root(),
            other => other,
        }
    }
}
