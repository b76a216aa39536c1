//! Ritz projection onto the P1 space: P g satisfies
//! (a grad(g - P g), grad chi) = 0 for all chi, realized as one stiffness
//! solve against the quadrature of (a grad g, grad phi_i).

use crate::error::Result;
use crate::fem::mesh::{FemSpace, NO_DOF};
use crate::fem::{AnalyticField, Field};
use crate::linalg::{factor_spd, Factorization};

/// Projects `g` (which must vanish on the boundary) using a prefactored
/// a-stiffness matrix.
pub fn elliptic_projection_with(
    space: &FemSpace,
    stiffness_factor: &Factorization,
    g: &dyn AnalyticField,
    a: impl Fn([f64; 2]) -> [[f64; 2]; 2],
) -> Field {
    let mut rhs = vec![0.0; space.n_dofs()];
    for el in space.elements() {
        for q in 0..3 {
            let x = el.qpt[q];
            let aq = a(x);
            let gg = g.gradient(x);
            let ag = [
                aq[0][0] * gg[0] + aq[0][1] * gg[1],
                aq[1][0] * gg[0] + aq[1][1] * gg[1],
            ];
            for i in 0..el.nloc {
                let d = el.dofs[i];
                if d != NO_DOF {
                    rhs[d] += el.qw[q] * (ag[0] * el.grad[i][0] + ag[1] * el.grad[i][1]);
                }
            }
        }
    }
    Field(stiffness_factor.solve(&rhs))
}

/// Convenience wrapper assembling and factoring the stiffness matrix.
pub fn elliptic_projection(
    space: &FemSpace,
    g: &dyn AnalyticField,
    a: impl Fn([f64; 2]) -> [[f64; 2]; 2] + Copy,
) -> Result<Field> {
    let stiff = crate::fem::assemble::assemble_stiffness(space, a)?;
    let fact = factor_spd(&stiff)?;
    Ok(elliptic_projection_with(space, &fact, g, a))
}
