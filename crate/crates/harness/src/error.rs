use std::io;
use std::path::PathBuf;

use lhsm_core::ErrorKind;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("{context}: {source}")]
    Physics {
        context: String,
        #[source]
        source: lhsm_core::Error,
    },

    #[error("cannot parse config: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl HarnessError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for configuration problems, 3 for physics errors, 4 for numerical
    /// validity failures and 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } | Self::Parse(_) => 2,
            Self::Physics { source, .. } => match source.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Physics => 3,
                ErrorKind::Numerical => 4,
            },
            Self::Io { .. } => 1,
        }
    }
}

pub(crate) trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, HarnessError>;
}

impl<T> Context<T> for lhsm_core::Result<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, HarnessError> {
        self.map_err(|source| HarnessError::Physics {
            context: what(),
            source,
        })
    }
}
