use thiserror::Error;

/// Errors raised by the excursion library.
///
/// Validation failures carry the name of the offending parameter so that
/// callers (the CLI in particular) can map them back to a config field.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("chart degenerates at {coords:?}: {reason}")]
    DegenerateChart { coords: Vec<f64>, reason: String },

    #[error("points belong to different charts")]
    ChartMismatch,

    #[error("manifold mismatch: model lives on {model}, domain on {domain}")]
    ManifoldMismatch { model: String, domain: String },

    #[error("degenerate field: {0}")]
    DegenerateField(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("covariance factorization failed for n = {n} after jitter up to {max_jitter:e} x mean diagonal")]
    FactorizationFailed { n: usize, max_jitter: f64 },

    #[error("mismatched u grids: {0}")]
    MismatchedGrids(String),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::FactorizationFailed { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
