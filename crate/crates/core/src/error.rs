use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(
        "carrier frequency {0} Hz lies outside FR1 (410-7125 MHz) and FR2 (24250-52600 MHz)"
    )]
    FrequencyOutOfRange(f64),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },

    #[error("both classes must be present: {0}")]
    SingleClass(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    /// Process exit code for this error: 2 configuration, 3 data,
    /// 4 internal invariant violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::FrequencyOutOfRange(_) | Error::Json(_) => 2,
            Error::Data(_)
            | Error::Malformed { .. }
            | Error::SingleClass(_)
            | Error::Io(_)
            | Error::Csv(_) => 3,
            Error::Invariant(_) => 4,
        }
    }
}
