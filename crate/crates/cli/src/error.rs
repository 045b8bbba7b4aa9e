use thiserror::Error;

/// Exit code 1: parse or validation failure.
pub const EXIT_INVALID: i32 = 1;
/// Exit code 2: the constraints admit no design.
pub const EXIT_INFEASIBLE: i32 = 2;
/// Exit code 3: node or time cap reached; any partial result has been written.
pub const EXIT_CAPS: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),

    #[error(transparent)]
    Core(#[from] ::aqua::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(::aqua::Error::Infeasible) => EXIT_INFEASIBLE,
            CliError::Core(::aqua::Error::ResourceExhausted) => EXIT_CAPS,
            _ => EXIT_INVALID,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
