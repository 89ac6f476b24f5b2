use std::fmt;
use std::process::ExitCode;

/// Failure classes, each with its own exit status.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    /// The pairing session ended without a key.
    Aborted(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Self::Usage(_) => 1,
            Self::Data(_) => 2,
            Self::Aborted(_) => 3,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Data(m) => write!(f, "data error: {m}"),
            Self::Aborted(m) => write!(f, "pairing aborted: {m}"),
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

pub fn usage(m: impl fmt::Display) -> CliError {
    CliError::Usage(m.to_string())
}

pub fn data(m: impl fmt::Display) -> CliError {
    CliError::Data(m.to_string())
}
