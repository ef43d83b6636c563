use std::fmt;

use bayesmix_core::Error;

/// Process exit status by failure class.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exit {
    Io = 1,
    Config = 2,
    Contract = 3,
    Cap = 4,
}

#[derive(Debug)]
pub struct CliError {
    pub exit: Exit,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            exit: Exit::Config,
            message: message.into(),
        }
    }

    pub fn contract(message: impl Into<String>) -> Self {
        CliError {
            exit: Exit::Contract,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError {
            exit: Exit::Io,
            message: message.into(),
        }
    }

    /// Adds context in front of the message.
    pub fn context(mut self, what: impl fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let exit = match &e {
            Error::CapExceeded { .. } => Exit::Cap,
            Error::Contract(_) | Error::AuditFailed { .. } | Error::DegenerateConditioning => {
                Exit::Contract
            }
            Error::Io(_) | Error::Csv(_) => Exit::Io,
            _ => Exit::Config,
        };
        CliError {
            exit,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
