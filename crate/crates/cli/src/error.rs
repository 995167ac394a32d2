use std::path::Path;
use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Input(String),

    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) => 2,
            CliError::Input(_) => 3,
            CliError::Internal(_) => 4,
        })
    }

    pub fn io(path: &Path, e: std::io::Error) -> CliError {
        CliError::Input(format!("{}: {e}", path.display()))
    }

    /// Adds the offending path to a core error.
    pub fn at(path: &Path, e: trialink_core::Error) -> CliError {
        match CliError::from(e) {
            CliError::Usage(m) => CliError::Usage(format!("{}: {m}", path.display())),
            CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
            CliError::Internal(m) => CliError::Internal(format!("{}: {m}", path.display())),
        }
    }
}

impl From<trialink_core::Error> for CliError {
    fn from(e: trialink_core::Error) -> Self {
        use trialink_core::Error as E;
        match e {
            E::InvalidConfig(_) => CliError::Usage(e.to_string()),
            E::Io(_)
            | E::Json(_)
            | E::Xml(_)
            | E::DuplicateId(_)
            | E::InvalidId(_)
            | E::EmptyVocabulary
            | E::EmptyCorpus
            | E::Unrankable(_)
            | E::SpaceMismatch(_)
            | E::IndexFormat(_)
            | E::UnknownRegistration(_)
            | E::EmptyBenchmark(_) => CliError::Input(e.to_string()),
            E::ZeroDocumentFrequency(_) | E::NonBinaryVector | E::EmptyCandidate(_) => {
                CliError::Internal(e.to_string())
            }
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
