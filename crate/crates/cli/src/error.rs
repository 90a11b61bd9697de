use std::path::Path;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] lyapmkv::Error),

    #[error("cannot parse config: {0}")]
    ConfigParse(String),

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Serialize)]
pub struct ErrorBody<'a> {
    pub category: &'a str,
    pub message: String,
}

impl CliError {
    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }

    pub fn category(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.category(),
            CliError::ConfigParse(_) => "config-parse",
            CliError::Io { .. } => "io",
        }
    }

    /// 2 for bad input, 3 for numerical non-convergence, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_convergence() => 3,
            CliError::Core(_) | CliError::ConfigParse(_) => 2,
            CliError::Io { .. } => 1,
        }
    }

    pub fn to_json(&self) -> String {
        let body = ErrorBody {
            category: self.category(),
            message: self.to_string(),
        };
        serde_json::json!({ "error": body }).to_string()
    }
}
