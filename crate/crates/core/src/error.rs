//! Error type shared by all tensor operations.

use thiserror::Error;

/// Errors surfaced by fallible tensor operations.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Operand shapes are incompatible for the requested operation.
    #[error("shape mismatch in {op}: left operand is {left}, right operand is {right}")]
    ShapeMismatch {
        op: &'static str,
        left: String,
        right: String,
    },

    /// A multi-rank vector does not match the tensor it describes.
    #[error("multi-rank has {got} entries but the tensor has {expected} frontal slices")]
    RankLength { expected: usize, got: usize },

    /// A per-slice rank exceeds what the slice dimensions allow.
    #[error("rank {rank} on slice {slice} exceeds min(n1, n2) = {max}")]
    RankTooLarge {
        slice: usize,
        rank: usize,
        max: usize,
    },

    /// The SVD kernel failed to converge on one transform-domain slice.
    #[error("SVD did not converge on transform slice {slice}")]
    SvdFailure { slice: usize },

    /// A precondition on the arguments was violated.
    #[error("{0}")]
    InvalidArgument(String),

    /// Non-finite values or a degenerate quantity appeared mid-computation.
    #[error("numerical breakdown: {0}")]
    Numerical(String),

    /// Malformed or unreadable input data.
    #[error("{0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(op: &'static str, left: impl std::fmt::Debug, right: impl std::fmt::Debug) -> Self {
        Error::ShapeMismatch {
            op,
            left: format!("{left:?}"),
            right: format!("{right:?}"),
        }
    }
}
