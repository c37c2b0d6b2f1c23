use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("dimension mismatch: expected {expected}, found {found} ({what})")]
    Dimension { what: &'static str, expected: usize, found: usize },

    #[error("covariance factorization failed: {context}")]
    Factorization { context: String },

    #[error("degenerate geometry: target coincides with sensor at {position:?}")]
    DegenerateGeometry { position: [f64; 2] },

    #[error("degenerate message for potential object {po} at dictionary {dict}, snapshot {snapshot}: {what}")]
    DegenerateMessage { po: u64, dict: usize, snapshot: usize, what: &'static str },

    #[error("malformed dataset header: {0}")]
    MalformedHeader(String),

    #[error("truncated dataset payload: {0}")]
    TruncatedPayload(String),

    #[error("dataset version mismatch: magic {magic:?}, version {version}")]
    VersionMismatch { magic: [u8; 4], version: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Wraps a factorization failure with additional location context.
    pub fn with_context(self, ctx: impl std::fmt::Display) -> Self {
        match self {
            Error::Factorization { context } => Error::Factorization { context: format!("{ctx}: {context}") },
            other => other,
        }
    }

    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Factorization { .. } | Error::DegenerateMessage { .. })
    }
}
