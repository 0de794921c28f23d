use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised by the core pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A file payload or header disagrees with itself.
    Format(String),
    /// An argument violates an operation precondition.
    InvalidInput(String),
    EmptyMesh,
    EmptyCloud,
    EmptyDataset,
    /// Cross-section that cannot support a convex hull.
    DegenerateSection(String),
    /// Rejection sampling gave up.
    RetryBudgetExhausted { attempts: usize },
    /// A gradient block contained NaN or infinity.
    NonFiniteGradient { block: String },
    ZeroVariance,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Format(msg) => write!(f, "format error: {msg}"),
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::EmptyMesh => f.write_str("mesh has no triangles"),
            Error::EmptyCloud => f.write_str("point cloud is empty"),
            Error::EmptyDataset => f.write_str("dataset is empty"),
            Error::DegenerateSection(what) => write!(f, "degenerate cross-section: {what}"),
            Error::RetryBudgetExhausted { attempts } => {
                write!(f, "no valid sample after {attempts} attempts")
            }
            Error::NonFiniteGradient { block } => {
                write!(f, "non-finite gradient in parameter block `{block}`")
            }
            Error::ZeroVariance => f.write_str("correlation undefined for zero variance input"),
        }
    }
}

#[cfg(feature = "std")]
extern crate std;

#[cfg(feature = "std")]
impl std::error::Error for Error {}
