use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("eigensolver failed to converge ({0})")]
    Eigensolver(String),

    #[error("convergence failure: {0}")]
    Convergence(String),

    #[error("basis dimension {dim} exceeds configured maximum {max}")]
    DimensionOverflow { dim: usize, max: usize },

    #[error("fewer than {required} states retained (got {got})")]
    TooFewStates { required: usize, got: usize },

    #[error("packing failed: placed {achieved} of {requested} points within attempt budget")]
    Packing { achieved: usize, requested: usize },

    #[error("perturbative instability: lambda^2 * alpha_0 = {value} >= 1")]
    Instability { value: f64 },

    #[error("missing column: {0}")]
    MissingColumn(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by bad inputs rather than numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::Domain(_)
                | Error::MissingColumn(_)
                | Error::Parse(_)
        )
    }
}
