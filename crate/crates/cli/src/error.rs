use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] maxineq::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 2 for configuration and domain errors, 3 for budget and index-range
    /// overflows, 1 for i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(maxineq::Error::Budget { .. } | maxineq::Error::Overflow(_)) => 3,
            CliError::Core(_) => 2,
            CliError::Io(_) | CliError::Csv(_) => 1,
        }
    }
}
