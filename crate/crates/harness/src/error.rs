use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },

    #[error("numerical failure in run {run}: {source}")]
    Numerical {
        run: usize,
        #[source]
        source: tbd_core::Error,
    },
}

impl HarnessError {
    /// Process exit code: 2 configuration, 3 I/O or data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Io { .. } | HarnessError::Data { .. } => 3,
            HarnessError::Numerical { .. } => 4,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn data(path: &Path, message: impl std::fmt::Display) -> Self {
        HarnessError::Data { path: path.to_path_buf(), message: message.to_string() }
    }

    /// Classifies a core error raised while processing `run`.
    pub(crate) fn from_core(run: usize, path: &Path, e: tbd_core::Error) -> Self {
        use tbd_core::Error as E;
        match e {
            E::Io(source) => HarnessError::Io { path: path.to_path_buf(), source },
            E::MalformedHeader(_) | E::TruncatedPayload(_) | E::VersionMismatch { .. } => Self::data(path, e),
            E::Validation(_) | E::Dimension { .. } | E::DegenerateGeometry { .. } => {
                HarnessError::Config(format!("run {run} ({}): {e}", path.display()))
            }
            E::Factorization { .. } | E::DegenerateMessage { .. } => HarnessError::Numerical { run, source: e },
        }
    }
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        let path = PathBuf::from("<csv>");
        match e.into_kind() {
            csv::ErrorKind::Io(source) => HarnessError::Io { path, source },
            other => HarnessError::Data { path, message: format!("{other:?}") },
        }
    }
}
