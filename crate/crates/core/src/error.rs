use thiserror::Error;

/// Errors raised by the estimation core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("lag {lag} is out of range for a series of length {len}")]
    InvalidLag { lag: usize, len: usize },

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("panel too short: T = {t}, at least {required} periods required")]
    PanelTooShort { t: usize, required: usize },

    #[error("insufficient units: {available} usable, at least {needed} required")]
    InsufficientUnits { needed: usize, available: usize },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
