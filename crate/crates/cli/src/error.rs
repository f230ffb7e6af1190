use std::fmt;
use std::process::ExitCode;

/// Exit status classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Failure = 1,
    Usage = 2,
    Io = 3,
    Check = 4,
}

#[derive(Debug)]
pub struct CliError {
    pub status: Status,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { status: Status::Usage, message: message.into() }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError { status: Status::Io, message: message.into() }
    }

    pub fn check(message: impl Into<String>) -> Self {
        CliError { status: Status::Check, message: message.into() }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.status as u8)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<freqgen::Error> for CliError {
    fn from(e: freqgen::Error) -> Self {
        use freqgen::Error as E;
        let status = match e {
            E::InvalidInput(_) | E::InvalidParameter(_) | E::Config { .. } => Status::Usage,
            E::Io { .. } | E::Decode { .. } | E::UnsupportedDepth { .. } | E::UnsupportedFormat(_) => Status::Io,
            E::InvalidState(_) => Status::Failure,
        };
        CliError { status, message: e.to_string() }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;
