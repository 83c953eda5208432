//! Error type shared by every module.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry failure: {0}")]
    Geometry(String),
    #[error("resolution failure: {0}")]
    Resolution(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("incompressibility violation: max |det - 1| = {drift:e} exceeds {tol:e}")]
    Incompressibility { drift: f64, tol: f64 },
    #[error("map degeneracy: {0}")]
    MapDegeneracy(String),
    #[error("insufficient history: {0}")]
    InsufficientHistory(String),
    #[error("elliptic failure: residual {residual:e} after {iterations} iterations")]
    Elliptic { residual: f64, iterations: usize },
    #[error("sequencing error: {0}")]
    Sequencing(String),
    #[error("vacuum consistency failure: {0}")]
    VacuumConsistency(String),
    #[error("scenario error: {0}")]
    Scenario(String),
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::AtStep { source, .. } => source.exit_code(),
            Error::Elliptic { .. } => 3,
            Error::Config(_) | Error::Parse(_) | Error::Io(_) => 4,
            _ => 2,
        }
    }

    pub fn at_step(self, step: usize) -> Self {
        match self {
            e @ Error::AtStep { .. } => e,
            e => Error::AtStep {
                step,
                source: Box::new(e),
            },
        }
    }
}
