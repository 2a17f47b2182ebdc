use lsn_core::Error;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("hypotheses not satisfied: {0}")]
    Hypothesis(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("tolerance breach: {0}")]
    Tolerance(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Hypothesis(_) => 2,
            CliError::Solver(_) | CliError::Io(_) => 3,
            CliError::Parse(_) => 4,
            CliError::Tolerance(_) => 5,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Hypothesis(_) | Error::Outflow(_) | Error::InflowViolation(_) | Error::NonIntegrableRate(_) | Error::DegenerateRate(_) => {
                CliError::Hypothesis(e.to_string())
            }
            Error::InvalidParameter(_) => CliError::Parse(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}
