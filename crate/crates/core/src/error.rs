use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter `{name}` = {value} is out of domain: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("drift matrix is unstable (max eigenvalue real part {max_real:.6e})")]
    Unstable { max_real: f64 },

    #[error("numerically degenerate problem: {0}")]
    Degenerate(String),

    #[error("closed-form expressions unavailable: {0}")]
    ClosedFormDomain(String),

    #[error("integration diverged at t = {time}")]
    Divergence { time: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
