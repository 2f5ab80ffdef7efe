use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("{op} did not converge after {terms} terms (last term {tail:.3e}, partial sum {value:.6e})")]
    NonConvergence {
        op: &'static str,
        terms: usize,
        tail: f64,
        value: f64,
    },

    #[error("{op}: cancellation error estimate {estimate:.3e} exceeds tolerance for value {value:.6e}; {hint}")]
    Cancellation {
        op: &'static str,
        estimate: f64,
        value: f64,
        hint: &'static str,
    },

    #[error("{op}: scaled argument {arg:.4e} exceeds the series window {limit}; {hint}")]
    OutsideWindow {
        op: &'static str,
        arg: f64,
        limit: f64,
        hint: &'static str,
    },

    #[error("quadrature failure in {op}: {detail}")]
    Quadrature { op: &'static str, detail: String },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("grid mismatch: {0}")]
    Grid(String),

    #[error("operator truncation: {0}")]
    Truncation(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("statistics: {0}")]
    Statistics(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn quadrature(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Quadrature {
            op,
            detail: detail.into(),
        }
    }

    /// True for failures caused by the series representation itself, for
    /// which a quadrature or transform route is the appropriate fallback.
    pub fn is_series_failure(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. } | Error::Cancellation { .. } | Error::OutsideWindow { .. }
        )
    }
}
