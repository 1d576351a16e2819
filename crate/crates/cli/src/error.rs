use std::fmt;

use countrate::Error;

/// Exit codes: 1 for I/O and internal failures, 2 for malformed input data,
/// 3 for invalid configuration or generator specs.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn schema(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e {
            Error::EmptyInput
            | Error::NonPositivePrediction(_)
            | Error::MissingFile(_)
            | Error::SchemaMismatch { .. }
            | Error::Csv(_) => Self::schema(message),
            Error::InvalidBinCount
            | Error::UnsupportedMetric(_)
            | Error::InvalidLadder(_)
            | Error::InsufficientHistory { .. }
            | Error::InvalidSpec(_)
            | Error::RateOutOfRange(_) => Self::config(message),
            _ => Self::io(message),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::io(e.to_string())
    }
}
