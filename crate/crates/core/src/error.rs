//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the analysis and simulation layers.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Structurally invalid argument (zero sample count, empty level set, ...).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Inconsistent (policy, system) configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Requested average power is outside the achievable range of the
    /// selected power convention.
    #[error("average power {requested} outside achievable range ({min:e}, {max:e}) for convention {convention}")]
    PowerRange {
        requested: f64,
        min: f64,
        max: f64,
        convention: &'static str,
    },

    /// An objective returned a non-finite value during optimization.
    #[error("objective evaluated to a non-finite value at {arg:?}")]
    NonFiniteObjective { arg: Vec<f64> },

    /// A Markov model failed a structural requirement.
    #[error("model error: {0}")]
    Model(String),
}

pub type Result<T> = std::result::Result<T, Error>;
