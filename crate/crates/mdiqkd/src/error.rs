use std::path::PathBuf;

use mdiqkd_core::Error as CoreError;

pub type Result<T> = std::result::Result<T, AppError>;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: line {line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("no positive key rate (R = {key_rate:e})")]
    NoKey { key_rate: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const DATA: i32 = 3;
    pub const NUMERICAL: i32 = 4;
    pub const NO_KEY: i32 = 5;
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => exit::CONFIG,
            Self::Parse { .. } | Self::Data(_) => exit::DATA,
            Self::Numerical(_) => exit::NUMERICAL,
            Self::NoKey { .. } => exit::NO_KEY,
            Self::Io { .. } => exit::IO,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<CoreError> for AppError {
    fn from(e: CoreError) -> Self {
        let text = e.to_string();
        match e {
            CoreError::InvalidParameter(_)
            | CoreError::InvalidIntensities(_)
            | CoreError::DegenerateEncoding { .. }
            | CoreError::NotNormalized { .. } => Self::Config(text),
            CoreError::IncompleteData(_) | CoreError::InconsistentStatistics { .. } | CoreError::CountOverflow(_) => {
                Self::Data(text)
            }
            _ => Self::Numerical(text),
        }
    }
}
