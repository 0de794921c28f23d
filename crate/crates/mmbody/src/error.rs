use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },
    #[error("checkpoint not found: {}", .0.display())]
    CheckpointNotFound(PathBuf),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] mmbody_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable identifier for machine-readable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Json { .. } => "json",
            Error::Csv { .. } => "csv",
            Error::Format { .. } => "format",
            Error::CheckpointNotFound(_) => "checkpoint_not_found",
            Error::Usage(_) => "usage",
            Error::Core(e) => match e {
                mmbody_core::Error::Format(_) => "format",
                mmbody_core::Error::InvalidInput(_) => "invalid_input",
                mmbody_core::Error::EmptyMesh => "empty_mesh",
                mmbody_core::Error::EmptyCloud => "empty_cloud",
                mmbody_core::Error::EmptyDataset => "empty_dataset",
                mmbody_core::Error::DegenerateSection(_) => "degenerate_section",
                mmbody_core::Error::RetryBudgetExhausted { .. } => "retry_budget_exhausted",
                mmbody_core::Error::NonFiniteGradient { .. } => "non_finite_gradient",
                mmbody_core::Error::ZeroVariance => "zero_variance",
            },
        }
    }

    pub(crate) fn format(path: &Path, msg: impl Into<String>) -> Self {
        Error::Format { path: path.to_path_buf(), msg: msg.into() }
    }
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

pub(crate) fn json_err(path: &Path) -> impl FnOnce(serde_json::Error) -> Error + '_ {
    move |source| Error::Json { path: path.to_path_buf(), source }
}
