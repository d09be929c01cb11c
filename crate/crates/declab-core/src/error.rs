//! Error type shared by all engines.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("spin amplitudes must not both be zero")]
    InvalidAmplitudes,
    #[error("site {0} supplied more than once")]
    DuplicateSite(usize),
    #[error("site {site} does not exist in a model with {num_sites} sites")]
    UnknownSite { site: usize, num_sites: usize },
    #[error("model is too large: {0}")]
    TooManySites(String),
    #[error("mismatched model data: {0}")]
    ModelMismatch(String),
    #[error("subsystem to keep must be non-empty")]
    EmptySubsystem,
    #[error("expectation value has imaginary residue {0:e}; observable is not Hermitian")]
    NonHermitianResult(f64),
    #[error("basis matrix is not unitary (max deviation {0:e})")]
    InvalidBasis(f64),
    #[error("matrix is not diagonal (max off-diagonal magnitude {0:e})")]
    NotDiagonal(f64),
    #[error("matrix is not a valid density matrix: {0}")]
    InvalidDensityMatrix(String),
    #[error("observable is not supported on this decomposition: {0}")]
    UnsupportedSupport(String),
    #[error("coherence envelope never crosses the threshold in the scan window")]
    NoCrossing,
    #[error("series has {got} points in the window; at least {need} required")]
    InsufficientData { got: usize, need: usize },
    #[error("conformal time {eta} is outside the model domain")]
    OutOfDomain { eta: f64 },
    #[error("mode integration became unstable (Wronskian residual {0:e})")]
    IntegrationFailure(f64),
    #[error("invalid sample count {got}; at least {need} required")]
    InvalidSampleCount { got: usize, need: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
