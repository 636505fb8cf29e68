use thiserror::Error;

/// Errors produced by the numerical substrate and the model families.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature ran out of subdivisions; carries the best estimate
    /// and its error bound so callers can decide whether it is usable.
    #[error("quadrature did not converge (best estimate {best}, error bound {error_bound})")]
    QuadBudgetExhausted { best: f64, error_bound: f64 },

    #[error("root bracket invalid: f({lo}) = {f_lo}, f({hi}) = {f_hi} have the same sign")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    /// A model family returned a non-finite log marginal at `lambda`.
    #[error("model error at lambda = {lambda:?}: {message}")]
    Model { lambda: Vec<f64>, message: String },

    #[error("distance undefined: posterior dimensions {0} and {1} differ")]
    DimensionMismatch(usize, usize),

    /// The recursive interval construction would need grid points below the
    /// overflow guard; `max_feasible_k` is the last index that was computed.
    #[error("family capacity exceeded: max feasible index is {max_feasible_k}")]
    Capacity { max_feasible_k: usize },

    #[error("scenario failed: {0}")]
    Scenario(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn model(lambda: &[f64], msg: impl Into<String>) -> Self {
        Error::Model { lambda: lambda.to_vec(), message: msg.into() }
    }
}
