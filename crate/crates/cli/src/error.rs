use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("incompatible runs: {0}")]
    Incompatible(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] bayes_pce::Error),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for anything the user can fix in the inputs, 3 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) | CliError::Incompatible(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
        }
    }
}
