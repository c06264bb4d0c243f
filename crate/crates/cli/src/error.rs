use thiserror::Error;

use crate::io::ReadError;

/// Process exit codes, one per error family.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    /// Output could not be written.
    pub const OUTPUT: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const INPUT: i32 = 3;
    pub const CONFIG: i32 = 4;
    pub const NUMERICAL: i32 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical degeneracy: {0}")]
    Numerical(String),
    #[error("cannot write output: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Input(_) => exit::INPUT,
            CliError::Config(_) => exit::CONFIG,
            CliError::Numerical(_) => exit::NUMERICAL,
            CliError::Output(_) => exit::OUTPUT,
        }
    }
}

impl From<hetpanel_core::Error> for CliError {
    fn from(e: hetpanel_core::Error) -> Self {
        use hetpanel_core::Error as E;
        let msg = e.to_string();
        match e {
            E::InvalidInput(_) | E::PanelTooShort { .. } => CliError::Input(msg),
            E::InvalidLag { .. } | E::Config(_) => CliError::Config(msg),
            E::DegenerateVariance(_) | E::InsufficientUnits { .. } => CliError::Numerical(msg),
        }
    }
}

impl From<ReadError> for CliError {
    fn from(e: ReadError) -> Self {
        match e {
            ReadError::Panel(inner) => inner.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}
