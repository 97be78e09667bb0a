use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration or input value broke one of its invariants.
    #[error("{reason}")]
    Invalid { field: &'static str, reason: String },

    /// The simulation produced a NaN or infinity.
    #[error("non-finite value in {field} at tick {tick}")]
    NonFinite { field: &'static str, tick: u64 },

    #[error("scenario hash mismatch: log has {log:016x}, scenario is {scenario:016x}")]
    HashMismatch { log: u64, scenario: u64 },

    #[error("malformed log: {0}")]
    MalformedLog(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field,
            reason: reason.into(),
        }
    }

    /// Name of the offending field, when the error is tied to one.
    pub fn field(&self) -> Option<&'static str> {
        match self {
            Error::Invalid { field, .. } | Error::NonFinite { field, .. } => Some(field),
            _ => None,
        }
    }
}
