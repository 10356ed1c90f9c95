use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("conditioning on an empty tail: P(X >= {x}) = 0")]
    EmptyConditioning { x: f64 },

    #[error("tail quantile is not integrable near zero ({0})")]
    NonIntegrableTail(String),

    #[error("empty sample")]
    EmptySample,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid path at step {step}: {reason}")]
    InvalidPath { step: usize, reason: String },

    #[error("degenerate potential: slope {slope:e} at s = {s}")]
    DegeneratePotential { s: f64, slope: f64 },

    #[error("initial condition violated: expected B_0 = {expected}, got {got}")]
    InitialCondition { expected: f64, got: f64 },

    #[error("division by zero density")]
    ZeroDensity,

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
