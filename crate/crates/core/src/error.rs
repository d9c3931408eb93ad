use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("quadrature did not converge: estimated error {error:e} exceeds tolerance {tolerance:e}")]
    Quadrature { error: f64, tolerance: f64 },

    #[error("rate {rate} is not achievable for any sigma in [{lo}, {hi}]")]
    Unachievable { rate: f64, lo: f64, hi: f64 },

    #[error("could not sample a simple graph after {attempts} passes ({remaining} double edges left)")]
    GraphSampling { attempts: usize, remaining: usize },

    #[error("code dimension {dimension} is too large for exhaustive decoding (max {max})")]
    CodeTooLarge { dimension: usize, max: usize },

    #[error("threshold search failed: {0}")]
    ThresholdSearch(String),

    #[error("extrapolation fit failed: {0}")]
    Fit(String),

    #[error("parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
