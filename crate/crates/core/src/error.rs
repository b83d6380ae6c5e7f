use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("transmitter and receiver coincide at ({x}, {y}, {z}); path loss is undefined at zero distance")]
    CoincidentPositions { x: f64, y: f64, z: f64 },

    #[error("shadowing covariance is not positive definite after jitter (smallest eigenvalue estimate {min_eigenvalue:e})")]
    Factorization { min_eigenvalue: f64 },

    #[error("grid of {positions} positions exceeds the exact sampler limit of {limit}; enable the nearest-neighbour field sampler")]
    GridTooLarge { positions: usize, limit: usize },

    #[error("SNR target {snr_min:.6e} is unreachable: SNR saturates at 2*kappa = {limit:.6e}")]
    InfeasibleSnr { snr_min: f64, limit: f64 },

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("unknown sweep axis `{0}`; valid axes: Q, M, SNR_min, rho_dB, K, sigma_sh_A, d")]
    UnknownAxis(String),

    #[error("malformed input at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
