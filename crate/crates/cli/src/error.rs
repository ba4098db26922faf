use thiserror::Error;

/// Failure classes that map onto process exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad or missing input, invalid configuration: exit code 2.
    #[error("{0}")]
    Input(String),
    /// Anything else, such as a failed output write: exit code 1.
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Internal(_) => 1,
        }
    }
}

impl From<lineguide::Error> for CliError {
    fn from(e: lineguide::Error) -> Self {
        match e {
            lineguide::Error::Io(io) => CliError::Internal(io.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

/// Errors while reading an input file are input errors; a missing file gets
/// the fixed message `input missing`.
pub fn input_error(path: &std::path::Path, e: lineguide::Error) -> CliError {
    match e {
        lineguide::Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => {
            CliError::Input("input missing".into())
        }
        lineguide::Error::Io(io) => CliError::Input(format!("{}: {io}", path.display())),
        other => CliError::Input(format!("{}: {other}", path.display())),
    }
}
