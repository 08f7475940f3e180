use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter `{name}`: expected {expected}, got {got}")]
    InvalidParameter {
        name: &'static str,
        expected: &'static str,
        got: String,
    },

    #[error("non-finite value {value} when evaluating at mark {mark}")]
    Evaluation { mark: String, value: f64 },

    #[error("cannot normalize null measure")]
    NullMeasure,

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("config error at `{key}`: expected {expected}")]
    Config { key: String, expected: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, expected: &'static str, got: impl ToString) -> Error {
    Error::InvalidParameter {
        name,
        expected,
        got: got.to_string(),
    }
}
