use lus_core::Error;
use std::fmt::Display;

/// Process exit status of a failed command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Failure = 1,
    /// Unreadable/unwritable file or malformed input data.
    Input = 2,
    NoCandidates = 3,
    /// Bad configuration, unknown variant or inconsistent phantom spec.
    Config = 4,
    /// Frame and curve record disagree.
    Mismatch = 5,
    PatientOverlap = 6,
}

impl ExitKind {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub kind: ExitKind,
    pub message: String,
}

impl CliError {
    pub fn new(kind: ExitKind, message: impl Into<String>) -> Self {
        Self { kind, message: message.into() }
    }

    pub fn context(self, ctx: impl Display) -> Self {
        Self { kind: self.kind, message: format!("{ctx}: {}", self.message) }
    }
}

pub fn exit_kind(e: &Error) -> ExitKind {
    match e {
        Error::Io(_) | Error::Parse(_) | Error::EmptyClip | Error::EmptyInput => ExitKind::Input,
        Error::NoCandidates => ExitKind::NoCandidates,
        Error::InvalidParameter(_) | Error::InconsistentSpec(_) | Error::UnknownVariant(_) | Error::MissingClass(_) => {
            ExitKind::Config
        }
        Error::DimensionMismatch { .. } | Error::LengthMismatch(..) => ExitKind::Mismatch,
        _ => ExitKind::Failure,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self::new(exit_kind(&e), e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
