use thiserror::Error;

/// Errors surfaced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("diffusion coefficient is not symmetric at x = ({0}, {1})")]
    NonSymmetricCoefficient(f64, f64),

    #[error("ellipticity floor {floor} violated at x = ({x}, {y}): smallest eigenvalue {found}")]
    EllipticityViolated { floor: f64, found: f64, x: f64, y: f64 },

    #[error("matrix is not symmetric")]
    NotSymmetric,

    #[error("factorization failed: {0}")]
    FactorizationFailed(String),

    #[error("capacitance matrix is singular to working precision; fall back to factoring the corrected matrix directly")]
    CapacitanceSingular,

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("initial director {index} is nearly dependent on its predecessors (pivot norm {norm:.3e})")]
    DependentInitialDirector { index: usize, norm: f64 },

    #[error("fixed-point iteration for director {director} stalled after {iterations} iterations (last increment {increment:.3e})")]
    PicardDiverged { director: usize, iterations: usize, increment: f64 },

    #[error("step {step} failed: {source}")]
    StepFailed { step: usize, source: Box<Error> },

    #[error("eigenvalue solver did not converge within {iterations} iterations ({converged} of {requested} pairs)")]
    EigenNotConverged { iterations: usize, converged: usize, requested: usize },

    #[error("spectrum window too small: all {available} computed eigenvalues lie at or below the zero tolerance; request more than {available}")]
    SpectrumWindow { available: usize },

    #[error("search target index {target} is invalid for a parent of index {parent}")]
    InvalidSearchTarget { target: usize, parent: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
