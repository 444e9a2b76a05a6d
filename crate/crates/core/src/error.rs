use thiserror::Error;

/// Errors raised by the models, filters and bounds in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value is invalid. `path` names the offending field.
    #[error("config error at `{path}`: {reason}")]
    Config { path: String, reason: String },

    /// A numerical operation (factorization, inversion) failed.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Nonlinear least squares did not converge.
    #[error("fit did not converge after {iterations} iterations (residual {residual:e})")]
    FitNonConvergence { iterations: usize, residual: f64 },

    /// A discretization approximation was requested outside its validity range.
    #[error("approximation invalid: {0}")]
    Approximation(String),

    /// Reading or writing an artifact failed.
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
