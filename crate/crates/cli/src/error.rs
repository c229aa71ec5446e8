use std::path::PathBuf;

use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid config field `{path}`{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Validation {
        path: String,
        line: Option<usize>,
        kind: String,
        message: String,
    },

    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },

    #[error("{0}")]
    Usage(String),

    #[error("verification failed: {0}")]
    VerificationFailed(String),

    #[error(transparent)]
    Core(#[from] waveguide_imaging::Error),
}

impl CliError {
    pub fn kind(&self) -> &str {
        match self {
            CliError::Parse { .. } => "ParseError",
            CliError::Validation { .. } => "ValidationError",
            CliError::Io { .. } => "Io",
            CliError::Usage(_) => "UsageError",
            CliError::VerificationFailed(_) => "VerificationFailed",
            CliError::Core(e) => e.kind(),
        }
    }

    /// Machine-readable error body written to stderr.
    pub fn to_json(&self) -> Value {
        let mut body = json!({ "kind": self.kind(), "message": self.to_string() });
        match self {
            CliError::Parse { line, column, .. } => {
                body["line"] = json!(line);
                body["column"] = json!(column);
            }
            CliError::Validation { path, line, kind, .. } => {
                body["path"] = json!(path);
                body["line"] = json!(line);
                body["cause"] = json!(kind);
            }
            CliError::Io { path, .. } => body["path"] = json!(path),
            _ => {}
        }
        json!({ "error": body })
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Parse { .. } | CliError::Validation { .. } => 3,
            CliError::Io { .. } => 4,
            CliError::VerificationFailed(_) => 5,
            CliError::Core(_) => 1,
        }
    }
}

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}
