use thiserror::Error;

/// Failure modes shared by every module.
///
/// `Validation` covers bad inputs (CLI exit code 1); everything else is a
/// numerical failure (exit code 2).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parity: (N-2)beta = {0} is not an odd integer")]
    Parity(f64),
    #[error("grid: {0}")]
    Grid(String),
    #[error("coincident Cauchy nodes x[{i}] = y[{j}]")]
    CoincidentNodes { i: usize, j: usize },
    #[error("quadrature tail does not converge (fitted exponent {exponent:.3})")]
    Tail { exponent: f64 },
    #[error("numerical failure in {module}: {reason}")]
    Numerical { module: &'static str, reason: String },
    #[error("validation: {0}")]
    Validation(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn numerical(module: &'static str, reason: impl Into<String>) -> Self {
        Error::Numerical { module, reason: reason.into() }
    }

    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical { .. } | Error::Tail { .. } => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
