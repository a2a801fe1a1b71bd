//! CLI error type and its mapping to exit codes.

use std::path::PathBuf;

use qctrl_core::error::QctrlError;
use thiserror::Error;

/// A configuration problem, located in the source file when possible.
#[derive(Debug, Error)]
#[error("{}{}: {message}", path.display(), location(*line, *column))]
pub struct ConfigError {
    /// Config file the error refers to.
    pub path: PathBuf,
    /// 1-based line, when known.
    pub line: Option<usize>,
    /// 1-based column, when known.
    pub column: Option<usize>,
    /// What is wrong.
    pub message: String,
}

fn location(line: Option<usize>, column: Option<usize>) -> String {
    match (line, column) {
        (Some(l), Some(c)) => format!(":{l}:{c}"),
        (Some(l), None) => format!(":{l}"),
        _ => String::new(),
    }
}

/// Everything a command can fail with.
#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid configuration file or contents.
    #[error(transparent)]
    Config(#[from] ConfigError),

    /// Invalid flag or environment value.
    #[error("{0}")]
    Usage(String),

    /// A numerical routine failed.
    #[error(transparent)]
    Domain(#[from] QctrlError),

    /// Output could not be written.
    #[error("cannot write {}: {source}", path.display())]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// CSV serialization failed.
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),

    /// JSON serialization failed.
    #[error("json output: {0}")]
    Json(#[from] serde_json::Error),

    /// The spin graph does not generate su(2^n).
    #[error("not controllable: closure dimension {closure_dim} of {full_dim}")]
    NotControllable { closure_dim: usize, full_dim: usize },

    /// The computed bracket table differs from the checked-in golden file.
    #[error("bracket table differs from the golden file on {0} line(s)")]
    GoldenMismatch(usize),
}

impl CliError {
    /// 0 success, 1 domain failure, 2 configuration error.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}
