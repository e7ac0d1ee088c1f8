use thiserror::Error;

/// Library-wide error type.
///
/// Variants fall into three families that the CLI maps onto exit codes:
/// configuration problems (2), numerical failures (3), and I/O (1).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate problem: {reason} (condition estimate {condition:.3e})")]
    Degenerate { reason: String, condition: f64 },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("numerical instability: {what}; try a step smaller than {suggested_step:.3e} s")]
    Instability { what: String, suggested_step: f64 },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("fit failed: {reason} (residual {residual:.3e})")]
    Fit { reason: String, residual: f64 },

    #[error("filter kernel is not invertible: |h(f)| = {magnitude:.3e} at f = {freq:.6e} Hz")]
    NonInvertible { freq: f64, magnitude: f64 },

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) | Error::Csv(_) => 2,
            Error::Io(_) => 1,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
