use thiserror::Error;

/// Errors produced by the precoding library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not positive semi-definite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("effective channel of cluster {cluster} is rank deficient (singular value ratio {ratio:e})")]
    Singular { cluster: usize, ratio: f64 },

    #[error("sample set contains no nonzero vector")]
    DegenerateSamples,

    #[error("block diagonalization infeasible for cluster {cluster}: null space has {available} dimensions, {required} required")]
    BdInfeasible {
        cluster: usize,
        available: usize,
        required: usize,
    },

    #[error("QoS level is unbounded: still feasible after {doublings} doublings (gamma = {gamma:e})")]
    Unbounded { doublings: usize, gamma: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("container format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
