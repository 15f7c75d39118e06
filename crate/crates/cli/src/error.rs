use std::path::PathBuf;

use thiserror::Error;

/// Failures surfaced by the command-line workflows.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: line {line}, column `{column}`: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        column: String,
        message: String,
    },
    #[error("{path}: {source}")]
    InvalidData {
        path: PathBuf,
        #[source]
        source: rte_core::Error,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error(transparent)]
    Core(#[from] rte_core::Error),
}

impl CliError {
    pub const EXIT_OTHER: i32 = 1;
    pub const EXIT_PARSE: i32 = 2;
    pub const EXIT_CONVERGENCE: i32 = 3;
    pub const EXIT_CONFIG: i32 = 4;
    pub const EXIT_SINGULAR: i32 = 5;

    /// Process exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        use rte_core::Error as E;
        match self {
            CliError::Parse { .. } | CliError::InvalidData { .. } => Self::EXIT_PARSE,
            CliError::Csv { source, .. } if !source.is_io_error() => Self::EXIT_PARSE,
            CliError::Config(_) => Self::EXIT_CONFIG,
            CliError::Core(E::NotConverged { .. } | E::UnconvergedFit | E::AllReplicatesFailed { .. }) => {
                Self::EXIT_CONVERGENCE
            }
            CliError::Core(E::SingularDesign { .. }) => Self::EXIT_SINGULAR,
            _ => Self::EXIT_OTHER,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        CliError::Csv {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
