use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shape mismatch between related inputs (profile length, per-auction lists).
    #[error("structural error: {0}")]
    Structural(String),

    /// A value outside its admissible range.
    #[error("validation error: {0}")]
    Validation(String),

    /// Step size violates `0 < eps < 1/(J*U)`.
    #[error("step-size condition violated: learning rate {eps} must satisfy 0 < eps < 1/(J*U) = {limit}")]
    StepSize { eps: f64, limit: f64 },

    #[error("load error in {path}: line {line}: {message}")]
    Load {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("solver did not converge after {iterations} iterations; bracket [{lo}, {hi}]")]
    Solver { iterations: usize, lo: f64, hi: f64 },

    #[error("budget violated: spent {spent} > {budget}")]
    BudgetViolation { spent: f64, budget: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable tag used by the CLI's one-line error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Structural(_) => "structural",
            Error::Validation(_) => "validation",
            Error::StepSize { .. } => "step_size",
            Error::Load { .. } => "load",
            Error::Solver { .. } => "solver",
            Error::BudgetViolation { .. } => "budget",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
