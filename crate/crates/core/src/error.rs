use thiserror::Error;

/// Errors produced by the identification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value violates a precondition.
    #[error("configuration error: {0}")]
    Config(String),

    /// A grid or truth file could not be parsed.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A non-finite value appeared while assembling the weak system.
    #[error("numeric error at row {row}, group {group}, basis {basis}: {msg}")]
    Numeric {
        row: usize,
        group: usize,
        basis: usize,
        msg: String,
    },

    /// The time integrator blew up.
    #[error("simulation error: {0}")]
    Simulation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
