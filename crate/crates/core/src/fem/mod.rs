//! Meshes, P1 spaces, assembly of the bilinear forms and nonlinear loads,
//! elliptic projection, and discrete norms.

pub mod assemble;
pub mod mesh;
pub mod norms;
pub mod projection;

use std::sync::Arc;

use crate::error::{Error, Result};

pub use assemble::{
    assemble_advection_reaction, assemble_mass, assemble_nonlinear_load, assemble_stiffness,
    assemble_weighted_mass, assemble_weighted_mass_into, interpolate, lumped_mass,
};
pub use mesh::{build_mesh, Element, FemSpace, Mesh, NO_DOF};
pub use norms::{h1_seminorm_weighted, l2_error, l2_inner, l2_norm};
pub use projection::{elliptic_projection, elliptic_projection_with};

/// Coefficient vector over the interior DOFs of a space; Dirichlet values
/// are identically zero and never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Field(pub Vec<f64>);

impl Field {
    pub fn zeros(n: usize) -> Self {
        Field(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    /// self += c * other
    pub fn axpy(&mut self, c: f64, other: &Field) {
        assert_eq!(self.len(), other.len());
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += c * b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        for a in &mut self.0 {
            *a *= c;
        }
    }
}

impl std::ops::Deref for Field {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::DerefMut for Field {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

pub type DiffusionFn = Arc<dyn Fn([f64; 2]) -> [[f64; 2]; 2] + Send + Sync>;
pub type VelocityFn = Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;
pub type SpatialFn = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;
pub type PointwiseFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// The PDE data: diffusion tensor a(x), optional advection field b(x) and
/// reaction coefficient c(x), the nonlinearity f with its derivative, and
/// the ellipticity floor a0.
#[derive(Clone)]
pub struct ProblemSpec {
    pub diffusion: DiffusionFn,
    pub advection: Option<VelocityFn>,
    pub reaction: Option<SpatialFn>,
    pub f: PointwiseFn,
    pub fprime: PointwiseFn,
    pub a0: f64,
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("advection", &self.advection.is_some())
            .field("reaction", &self.reaction.is_some())
            .field("a0", &self.a0)
            .finish()
    }
}

impl ProblemSpec {
    /// Pure elliptic model with constant scalar diffusion.
    pub fn elliptic(
        a: f64,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        fprime: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ProblemSpec {
            diffusion: Arc::new(move |_| [[a, 0.0], [0.0, a]]),
            advection: None,
            reaction: None,
            f: Arc::new(f),
            fprime: Arc::new(fprime),
            a0: a,
        }
    }

    pub fn with_advection(mut self, b: impl Fn([f64; 2]) -> [f64; 2] + Send + Sync + 'static) -> Self {
        self.advection = Some(Arc::new(b));
        self
    }

    pub fn with_reaction(mut self, c: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static) -> Self {
        self.reaction = Some(Arc::new(c));
        self
    }

    pub fn has_advection_reaction(&self) -> bool {
        self.advection.is_some() || self.reaction.is_some()
    }

    /// Spot-checks symmetry and the ellipticity floor of a(x) at the
    /// quadrature points of a space.
    pub fn validate(&self, space: &FemSpace) -> Result<()> {
        for el in space.elements() {
            for q in 0..3 {
                let x = el.qpt[q];
                let a = (self.diffusion)(x);
                let scale = a[0][0].abs() + a[1][1].abs() + a[0][1].abs() + a[1][0].abs();
                if (a[0][1] - a[1][0]).abs() > 1e-12 * scale.max(1.0) {
                    return Err(Error::NonSymmetricCoefficient(x[0], x[1]));
                }
                let min_eig = if space.mesh().dim() == 1 {
                    a[0][0]
                } else {
                    let tr = a[0][0] + a[1][1];
                    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
                    0.5 * (tr - (tr * tr - 4.0 * det).max(0.0).sqrt())
                };
                if min_eig < self.a0 - 1e-12 * self.a0.abs().max(1.0) {
                    return Err(Error::EllipticityViolated {
                        floor: self.a0,
                        found: min_eig,
                        x: x[0],
                        y: x[1],
                    });
                }
            }
        }
        Ok(())
    }
}

/// An analytic function with its gradient, used for initial data and the
/// elliptic projection right-hand sides.
pub trait AnalyticField: Sync {
    fn value(&self, x: [f64; 2]) -> f64;
    fn gradient(&self, x: [f64; 2]) -> [f64; 2];
}

/// Adapter building an [`AnalyticField`] from a pair of closures.
pub struct Analytic<F, G> {
    value: F,
    grad: G,
}

pub fn analytic<F, G>(value: F, grad: G) -> Analytic<F, G>
where
    F: Fn([f64; 2]) -> f64 + Sync,
    G: Fn([f64; 2]) -> [f64; 2] + Sync,
{
    Analytic { value, grad }
}

impl<F, G> AnalyticField for Analytic<F, G>
where
    F: Fn([f64; 2]) -> f64 + Sync,
    G: Fn([f64; 2]) -> [f64; 2] + Sync,
{
    fn value(&self, x: [f64; 2]) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        (self.grad)(x)
    }
}
