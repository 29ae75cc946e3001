use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },
    #[error("non-finite value at index {index}")]
    NonFiniteValue { index: usize },
    #[error("frame {width}x{height} is smaller than the required {min}x{min}")]
    FrameTooSmall { width: usize, height: usize, min: usize },
    #[error("no pleural-line candidates found")]
    NoCandidates,
    #[error("need at least {needed} distinct x values, got {got}")]
    InsufficientPoints { needed: usize, got: usize },
    #[error("clip has no frames")]
    EmptyClip,
    #[error("severity class {0} has no entries")]
    MissingClass(u8),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("class {0} has no positives or no negatives")]
    DegenerateClass(u8),
    #[error("every class is degenerate")]
    AllClassesDegenerate,
    #[error("inconsistent phantom spec: {0}")]
    InconsistentSpec(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown variant `{0}`")]
    UnknownVariant(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
