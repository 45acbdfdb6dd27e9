use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed scenario text. `line` and `column` are 1-based.
    #[error("{path}:{line}:{column}: {field}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        field: String,
        message: String,
    },

    /// Well-formed input that violates a model or command constraint.
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },

    #[error("{0}")]
    Numerical(arznet::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn invalid(field: impl Into<String>, message: impl ToString) -> Self {
        Self::Invalid {
            field: field.into(),
            message: message.to_string(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for input problems, 3 for solver failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Parse { .. } | Self::Invalid { .. } => 2,
            Self::Numerical(_) => 3,
            Self::Io { .. } => 1,
        }
    }

    /// Classify a library error raised while running a command.
    pub fn from_core(field: impl Into<String>, err: arznet::Error) -> Self {
        use arznet::Error as E;
        match err {
            E::Numerical { .. } | E::Cfl { .. } | E::Infeasible { .. } => Self::Numerical(err),
            other => Self::invalid(field, other),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
