use thiserror::Error;

pub type Result<T, E = BpsError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum BpsError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("data shape error: {0}")]
    DataShape(String),

    #[error("configuration error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("parse error in {path} at row {row}: {message}")]
    Parse {
        path: String,
        row: usize,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("numerical failure at iteration {iteration}, step {step}, index {index}: {message}")]
    Numerical {
        iteration: usize,
        step: &'static str,
        index: usize,
        message: String,
    },

    #[error("incompatible archive: {0}")]
    Incompatible(String),

    #[error("truncated file {path}: {message}")]
    Truncated { path: String, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl BpsError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        BpsError::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Rewrites the iteration index of a numerical failure, leaving other variants alone.
    pub fn at_iteration(self, iteration: usize) -> Self {
        match self {
            BpsError::Numerical {
                step,
                index,
                message,
                ..
            } => BpsError::Numerical {
                iteration,
                step,
                index,
                message,
            },
            other => other,
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> BpsError {
    BpsError::InvalidArgument(msg.into())
}

pub(crate) fn shape(msg: impl Into<String>) -> BpsError {
    BpsError::DataShape(msg.into())
}
