//! Error type shared by all modules.

use thiserror::Error;

/// Errors surfaced by the analysis and simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (bad grids, schedules, parameter ordering).
    #[error("config error: {0}")]
    Config(String),

    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A user-supplied evaluator returned a non-finite value.
    #[error("evaluation error: {0}")]
    Evaluation(String),

    /// A numerical routine failed to reach its tolerance.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Operation not supported for the given process kind.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Ball-to-cube assignment found centers outside the covered region.
    #[error("assignment error: {stray_count} centers outside covered region (first: {first:?})")]
    Assignment { stray_count: usize, first: Vec<f64> },

    /// Too many censored paths; the time horizon is too short.
    #[error("horizon error: censored fraction {censored:.3} exceeds {limit:.3}; increase t_max")]
    Horizon { censored: f64, limit: f64 },

    /// Manifest/schema version mismatch when comparing runs.
    #[error("version error: {0}")]
    Version(String),

    /// Scenario file could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }
}
