use thiserror::Error;

use crate::network::Diagnostic;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("usage: {0}")]
    Usage(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("invalid network: {}", join_diagnostics(.0))]
    InvalidNetwork(Vec<Diagnostic>),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("state `{state}` is not in the domain of `{variable}`")]
    UnknownState { variable: String, state: String },

    #[error("dimension mismatch: expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("structure mismatch: {0}")]
    StructureMismatch(String),

    #[error("invalid coarsening spec: {0}")]
    InvalidSpec(String),

    #[error("zero evidence: {0}")]
    ZeroEvidence(String),

    #[error("zero support: {0}")]
    ZeroSupport(String),

    #[error("budget exceeded: {what} needs {needed}, limit is {limit}")]
    BudgetExceeded {
        what: &'static str,
        needed: f64,
        limit: f64,
    },

    #[error("dataset weights must be positive integers for replication (case {case} has weight {weight})")]
    FractionalWeights { case: usize, weight: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::ZeroEvidence(_)
            | Error::ZeroSupport(_)
            | Error::BudgetExceeded { .. }
            | Error::Numerical(_) => 3,
            _ => 2,
        }
    }
}

fn join_diagnostics(d: &[Diagnostic]) -> String {
    d.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; ")
}
