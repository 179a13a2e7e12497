//! Experiment runner: one subcommand per experiment, each writing CSV
//! tables and SVG figures into an output directory.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` deliberately rejects NaN

pub mod commands;
pub mod config;
pub mod output;
pub mod svg;

pub use commands::{run, Subcommand};

/// Failure classes, each with its own process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("method error: {0}")]
    Method(String),
}

impl CliError {
    pub(crate) fn config_at(line: usize, msg: impl std::fmt::Display) -> Self {
        CliError::Config(format!("line {line}: {msg}"))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Method(_) => 4,
        }
    }
}

impl From<antnav_core::Error> for CliError {
    fn from(e: antnav_core::Error) -> Self {
        use antnav_core::Error as E;
        match e {
            E::MissingFile(_) | E::Malformed { .. } | E::Io { .. } => CliError::Data(e.to_string()),
            _ => CliError::Method(e.to_string()),
        }
    }
}
