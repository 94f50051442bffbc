use std::path::PathBuf;

use thiserror::Error;

use crate::socp::SolveStatus;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("nadir angle {nadir_deg}° lies beyond the horizon for altitude {altitude_km} km")]
    BeyondHorizon { altitude_km: f64, nadir_deg: f64 },

    #[error("scenario sampling failed after {attempts} attempts")]
    SamplingExhausted { attempts: usize },

    #[error("user terminal {ut} is not covered by any satellite")]
    Uncovered { ut: usize },

    #[error("matrix is not positive semidefinite: eigenvalue {min_eig:e} vs spectral radius {max_eig:e}")]
    NotPsd { min_eig: f64, max_eig: f64 },

    #[error("linear algebra failure: {0}")]
    Numerical(String),

    #[error("conic solver stopped with status {status:?} at outer iteration {iteration}")]
    Solver { status: SolveStatus, iteration: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
