//! Computes index-k saddle points (multiple solutions) of semilinear
//! elliptic and advection-reaction-diffusion PDEs with a retraction-free
//! orthonormality-preserving implicit scheme, verifies saddle indices
//! spectrally, and drives multi-solution landscape sweeps.

pub mod dynamics;
pub mod error;
pub mod fem;
pub mod landscape;
pub mod linalg;
pub mod spectral;

pub use dynamics::{
    initialize, initialize_from_fields, RunReport, SaddleState, SchemeParams, StepDiagnostics,
    Stepper, VSolver,
};
pub use error::{Error, Result};
pub use fem::{build_mesh, AnalyticField, FemSpace, Field, Mesh, ProblemSpec};
pub use landscape::{LandscapeContext, LandscapeGraph, LandscapeParams, SolutionRecord};
pub use linalg::{factor_general, factor_spd, woodbury_solve, Factorization, SparseMatrix};
pub use spectral::{assemble_hessian, morse_index, smallest_eigenpairs, HessianOperator, Spectrum};
