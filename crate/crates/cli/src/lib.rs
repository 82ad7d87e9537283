//! Front-end for the radiative transfer solver: configuration, the built-in
//! duct problems, benchmark and error ladders, and output files.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {}: {reason}", path.display())]
    MissingFile { path: PathBuf, reason: String },
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error("{0}")]
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::MissingFile { .. } => 2,
            CliError::Invalid(_) | CliError::Run(_) => 1,
        }
    }
}
