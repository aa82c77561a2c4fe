use alloc::string::String;

use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("Hurst parameter must lie in the open interval (0, 1), got {0}")]
    InvalidHurst(f64),

    #[error("limit-theorem quantities require 1/2 <= H < 1, got H = {0}")]
    HurstOutsideLimitRange(f64),

    #[error("proof-parameter search requires 1/2 < H < 1, got H = {0}")]
    HurstOutsideProofRange(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("negative lag {0}")]
    NegativeLag(i64),

    #[error("circulant embedding produced eigenvalue {value:e} (relative {relative:e})")]
    NegativeEigenvalue { value: f64, relative: f64 },

    #[error("grid of {n} points exceeds the exact sampler cap of {cap}")]
    GridTooLarge { n: usize, cap: usize },

    #[error("covariance matrix is not positive definite after jitter")]
    NotPositiveDefinite,

    #[error("grid misaligned: {0}")]
    GridMisaligned(String),

    #[error("window too short: {0}")]
    WindowTooShort(String),

    #[error("quadrature did not converge (estimate {estimate:e}, error estimate {error:e})")]
    QuadratureNonConvergence { estimate: f64, error: f64 },

    #[error(
        "acceptance floor violated at b = {level}: estimated acceptance {estimate:e} below floor {floor:e}"
    )]
    AcceptanceFloor {
        level: f64,
        estimate: f64,
        floor: f64,
    },

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("censored-cycle fraction {fraction} exceeds {limit} at b = {level}")]
    CensoredFraction {
        level: f64,
        fraction: f64,
        limit: f64,
    },

    #[error("memory cap exceeded: {0}")]
    MemoryCap(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
