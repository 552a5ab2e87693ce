use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input lies outside the domain of the requested operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A price lies outside the no-arbitrage bracket `(max(R−K,0), R)`.
    #[error("price {price} outside no-arbitrage bounds ({lower}, {upper})")]
    OutOfBounds { price: f64, lower: f64, upper: f64 },

    /// Invalid simulation or run configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An iterative method stopped without meeting its tolerance.
    #[error("no convergence after {iterations} iterations (achieved {achieved:e})")]
    NoConvergence { iterations: usize, achieved: f64 },

    /// Target value not attainable inside the search bracket.
    #[error("target {target} outside attainable range [{low}, {high}]")]
    Bracket { target: f64, low: f64, high: f64 },

    /// A quote cannot enter a calibration; `index` is its zero-based position.
    #[error("quote {index}: {reason}")]
    InvalidQuote { index: usize, reason: String },

    /// A monotonicity assumption of a 1-D search was violated.
    #[error("monotonicity violated: {0}")]
    NotMonotone(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
