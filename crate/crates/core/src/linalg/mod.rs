//! Sparse storage and the direct solvers used by the steppers.

pub mod dense;
pub mod factor;
pub mod sparse;
pub mod woodbury;

pub use factor::{factor_general, factor_spd, Factorization};
pub use sparse::SparseMatrix;
pub use woodbury::woodbury_solve;

/// Euclidean dot product.
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// y += c * x
pub fn axpy(c: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += c * xi;
    }
}
