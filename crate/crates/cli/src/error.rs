use std::fmt;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Failure {
    /// Bad configuration, malformed input, shape or version mismatch.
    Validation,
    Io,
    /// A loss or statistic came out non-finite.
    Numerical,
}

impl Failure {
    pub fn exit_code(self) -> i32 {
        match self {
            Failure::Validation => 1,
            Failure::Io => 2,
            Failure::Numerical => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub kind: Failure,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            kind: Failure::Validation,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<spiqgan::Error> for CliError {
    fn from(e: spiqgan::Error) -> Self {
        let kind = match e {
            spiqgan::Error::Io { .. } => Failure::Io,
            spiqgan::Error::Numerical(_) => Failure::Numerical,
            _ => Failure::Validation,
        };
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
