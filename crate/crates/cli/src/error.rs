use std::path::PathBuf;

use thiserror::Error;

/// Failures of a subcommand, each mapped to a distinct exit status.
#[derive(Error, Debug)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{file}:{line}: column '{column}': {message}")]
    Schema {
        file: PathBuf,
        line: u64,
        column: String,
        message: String,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Schema { .. } | CliError::Data(_) => 3,
            CliError::Io { .. } => 4,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Exit status when every output was written but some fit did not converge.
pub const EXIT_NOT_CONVERGED: i32 = 1;
