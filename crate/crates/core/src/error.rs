use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid metric: {0}")]
    InvalidMetric(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid trace word: {0}")]
    InvalidWord(String),

    #[error("enumeration degree {requested} exceeds cap {cap}")]
    DegreeTooLarge { requested: usize, cap: usize },

    #[error("expression parse error at {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("unknown {what} `{name}`")]
    Unknown { what: &'static str, name: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("symplectic form is singular at the given point")]
    SingularForm,

    #[error("unstable state: {0}")]
    UnstableState(String),

    #[error("no root in temperature bracket [{lo}, {hi}] for energy {target}")]
    Bracket { lo: f64, hi: f64, target: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("time step {dt} exceeds stability bound {bound}")]
    StepTooLarge { dt: f64, bound: f64 },

    #[error("at node {node} {x:?}: {source}")]
    AtNode {
        node: usize,
        x: Vec<f64>,
        source: Box<Error>,
    },

    #[error("run aborted at t = {t}; last good state in {snapshot}: {source}")]
    Aborted {
        t: f64,
        snapshot: String,
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than numerics.
    pub fn is_config(&self) -> bool {
        if let Error::AtNode { source, .. } | Error::Aborted { source, .. } = self {
            return source.is_config();
        }
        matches!(
            self,
            Error::InvalidMetric(_)
                | Error::InvalidWord(_)
                | Error::DegreeTooLarge { .. }
                | Error::Parse { .. }
                | Error::Unknown { .. }
                | Error::Config(_)
                | Error::Json(_)
                | Error::DimensionMismatch { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
