//! Command-line front end for the adaptive-CA engine: configuration
//! handling, model runners with their output artifacts, and the scaling
//! benchmark.

pub mod bench;
pub mod config;
pub mod run;

use thiserror::Error;

/// CLI failure classes, mapped onto exit codes (config = 2, runtime = 3).
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("runtime failure: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<aca_core::Error> for CliError {
    fn from(e: aca_core::Error) -> Self {
        match e {
            aca_core::Error::Config(_) | aca_core::Error::Shape(_) | aca_core::Error::Parse { .. } => {
                CliError::Config(e.to_string())
            }
            aca_core::Error::Io(_) => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Configure the global worker pool once (0 keeps the library default).
pub fn configure_threads(threads: usize) -> Result<(), CliError> {
    if threads == 0 {
        return Ok(());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))
}
