use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not antisymmetric (max |A + A^T| = {deviation:e})")]
    NotAntisymmetric { deviation: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("eigen-solver failed to produce a canonical form (residual {residual:e})")]
    NumericalFailure { residual: f64 },

    #[error("numerical consistency violated: {0}")]
    NumericalConsistency(String),

    #[error("syndrome has vanishing probability ({prob:e})")]
    DegenerateSyndrome { prob: f64 },

    #[error("transfer recursion hit a resonance at E = {energy} (site {site})")]
    Resonance { energy: f64, site: usize },

    #[error("system size {n} exceeds the limit {limit} for this method")]
    OverLimit { n: usize, limit: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
