use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Input carries no usable signal (constant images, flat objectives).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("no tissue found")]
    EmptyResult,

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid annotation: {0}")]
    InvalidAnnotation(String),

    /// Correlation is undefined because one of the inputs is constant.
    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("singular regression: {0}")]
    Singular(String),

    /// AUC needs at least one positive and one negative label.
    #[error("undefined AUC: {0}")]
    UndefinedAuc(String),

    #[error("model format error: {0}")]
    Format(String),

    #[error("unsupported model file version {0}")]
    UnsupportedVersion(u32),

    #[error("codec error: {0}")]
    Codec(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
