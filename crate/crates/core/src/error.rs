use thiserror::Error;

/// Errors produced by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite input")]
    NonFiniteInput,
    #[error("invalid exponent: {0}")]
    InvalidExponent(f64),
    #[error("unaligned shift: {0} is not a multiple of the grid spacing {1}")]
    UnalignedShift(f64, f64),
    #[error("grid mismatch")]
    GridMismatch,
    #[error("reach exceeds margin on axis {axis}")]
    ReachExceedsMargin { axis: usize },
    #[error("insufficient support margin: {needed} terms requested, {available} fit")]
    InsufficientSupportMargin { needed: usize, available: usize },
    #[error("band not resolvable: sigma={sigma}, h={h}")]
    BandNotResolvable { sigma: f64, h: f64 },
    #[error("A_∞ membership not numerically confirmed")]
    AinftyNotConfirmed,
    #[error("negative input")]
    NegativeInput,
    #[error("zero function")]
    ZeroFunction,
    #[error("unknown theorem id `{0}`")]
    UnknownTheorem(String),
    #[error("unknown operator tag `{0}`")]
    UnknownOperator(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("check `{id}`: {source}")]
    Check { id: String, source: Box<Error> },
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
