//! Experiment harness: scenario files, experiment drivers, CSV output, and
//! the protocol benchmark and verification suites behind the CLI.

pub mod bench;
pub mod csvout;
pub mod driver;
pub mod scenario;
pub mod verify;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Core(#[from] dogsim_core::Error),

    #[error("scenario {path}:{line}: {message}")]
    Scenario {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, HarnessError>;
