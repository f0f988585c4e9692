//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("operator is not Hermitian: max |A - A†| = {deviation:.3e} exceeds {tolerance:.3e}")]
    NotHermitian { deviation: f64, tolerance: f64 },

    #[error("not a density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("Bohr-frequency resonance, colliding pairs: {0}")]
    Resonance(String),

    #[error("eigenproblem is defective or inaccurate: {0}")]
    Defective(String),

    #[error("eigenvector matrix is ill-conditioned: cond = {condition:.3e} exceeds {limit:.3e}")]
    IllConditioned { condition: f64, limit: f64 },

    #[error("degenerate Pauli splitting: |f_{i} - f_{j}| = {gap:.3e} below threshold {threshold:.3e}")]
    DegenerateSplitting {
        i: usize,
        j: usize,
        gap: f64,
        threshold: f64,
    },

    #[error("steady state is not unique: {0}")]
    NonUniqueSteadyState(String),

    #[error("spectral decomposition incomplete: got {got} branches, need {need}")]
    IncompleteDecomposition { got: usize, need: usize },

    #[error("integration step size underflow at t = {time:.6e} (h = {step:.3e})")]
    StepUnderflow { time: f64, step: f64 },

    #[error("pole search failed: {0}")]
    PoleSearch(String),

    #[error("kernel diverges at s = 0 (abscissa of convergence {abscissa:.3e} >= 0)")]
    KernelDivergence { abscissa: f64 },

    #[error("model file error in `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error("model construction failed: {0}")]
    ModelConstruction(String),

    #[error("special function pole: {0}")]
    FunctionPole(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("linear algebra backend error: {0}")]
    Backend(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialization(#[from] serde_json::Error),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Backend(e.to_string())
    }
}
