//! Element-loop assembly of the bilinear forms over interior DOFs. All
//! matrices live on the space's shared CSR pattern, with per-element value
//! slots precomputed so the loops index straight into storage. The routines
//! are pure in their inputs and safe to call from several threads.

use crate::error::{Error, Result};
use crate::fem::mesh::{FemSpace, NO_DOF, NO_SLOT};
use crate::fem::Field;
use crate::linalg::SparseMatrix;

/// Consistent mass matrix M_ij = (phi_j, phi_i). Exact for P1.
pub fn assemble_mass(space: &FemSpace) -> SparseMatrix {
    let (rp, ci) = space.pattern();
    let mut m = SparseMatrix::zeros_on_pattern(rp, ci);
    let slots = space.element_slots();
    let vals = m.values_mut();
    for (el, slot) in space.elements().iter().zip(slots) {
        for a in 0..el.nloc {
            for b in a..el.nloc {
                if slot[a][b] == NO_SLOT {
                    continue;
                }
                let mut acc = 0.0;
                for q in 0..3 {
                    acc += el.qw[q] * el.qphi[q][a] * el.qphi[q][b];
                }
                vals[slot[a][b] as usize] += acc;
                if b != a {
                    vals[slot[b][a] as usize] += acc;
                }
            }
        }
    }
    m
}

/// Stiffness matrix A_ij = (a grad phi_j, grad phi_i); the coefficient is
/// sampled at the quadrature points and must be symmetric there.
pub fn assemble_stiffness(
    space: &FemSpace,
    a: impl Fn([f64; 2]) -> [[f64; 2]; 2],
) -> Result<SparseMatrix> {
    let (rp, ci) = space.pattern();
    let mut out = SparseMatrix::zeros_on_pattern(rp, ci);
    let dim = space.mesh().dim();
    let slots = space.element_slots();
    let vals = out.values_mut();
    for (el, slot) in space.elements().iter().zip(slots) {
        let mut aq = [[[0.0f64; 2]; 2]; 3];
        for q in 0..3 {
            let x = el.qpt[q];
            let m = a(x);
            let scale = m[0][0].abs() + m[1][1].abs() + m[0][1].abs() + m[1][0].abs();
            if dim == 2 && (m[0][1] - m[1][0]).abs() > 1e-12 * scale.max(1.0) {
                return Err(Error::NonSymmetricCoefficient(x[0], x[1]));
            }
            aq[q] = m;
        }
        for i in 0..el.nloc {
            for j in i..el.nloc {
                if slot[i][j] == NO_SLOT {
                    continue;
                }
                let gi = el.grad[i];
                let gj = el.grad[j];
                let mut acc = 0.0;
                for q in 0..3 {
                    let agj = [
                        aq[q][0][0] * gj[0] + aq[q][0][1] * gj[1],
                        aq[q][1][0] * gj[0] + aq[q][1][1] * gj[1],
                    ];
                    acc += el.qw[q] * (gi[0] * agj[0] + gi[1] * agj[1]);
                }
                vals[slot[i][j] as usize] += acc;
                if j != i {
                    vals[slot[j][i] as usize] += acc;
                }
            }
        }
    }
    Ok(out)
}

/// Advection-reaction matrix G_ij = (b . grad phi_j + c phi_j, phi_i);
/// generally non-symmetric.
pub fn assemble_advection_reaction(
    space: &FemSpace,
    b: impl Fn([f64; 2]) -> [f64; 2],
    c: impl Fn([f64; 2]) -> f64,
) -> SparseMatrix {
    let (rp, ci) = space.pattern();
    let mut out = SparseMatrix::zeros_on_pattern(rp, ci);
    let slots = space.element_slots();
    let vals = out.values_mut();
    for (el, slot) in space.elements().iter().zip(slots) {
        for q in 0..3 {
            let x = el.qpt[q];
            let bq = b(x);
            let cq = c(x);
            for i in 0..el.nloc {
                let wphi_i = el.qw[q] * el.qphi[q][i];
                for j in 0..el.nloc {
                    if slot[i][j] == NO_SLOT {
                        continue;
                    }
                    let gj = el.grad[j];
                    vals[slot[i][j] as usize] +=
                        wphi_i * (bq[0] * gj[0] + bq[1] * gj[1] + cq * el.qphi[q][j]);
                }
            }
        }
    }
    out
}

/// Nodal values of `u` on one element; boundary nodes contribute zero.
#[inline]
fn gather(el: &crate::fem::mesh::Element, u: &[f64]) -> [f64; 3] {
    let mut loc = [0.0; 3];
    for a in 0..el.nloc {
        let d = el.dofs[a];
        if d != NO_DOF {
            loc[a] = u[d];
        }
    }
    loc
}

/// Load vector with entries (g(u_h), phi_i), with g evaluated at the
/// quadrature points of the interpolant u_h.
pub fn assemble_nonlinear_load(
    space: &FemSpace,
    u: &Field,
    g: impl Fn(f64) -> f64,
) -> Result<Vec<f64>> {
    assert_eq!(u.len(), space.n_dofs());
    let mut rhs = vec![0.0; space.n_dofs()];
    for el in space.elements() {
        let loc = gather(el, u);
        for q in 0..3 {
            let mut uq = 0.0;
            for a in 0..el.nloc {
                uq += el.qphi[q][a] * loc[a];
            }
            let gq = g(uq);
            if !gq.is_finite() {
                return Err(Error::NonFinite("nonlinear load"));
            }
            let wg = el.qw[q] * gq;
            for a in 0..el.nloc {
                let d = el.dofs[a];
                if d != NO_DOF {
                    rhs[d] += wg * el.qphi[q][a];
                }
            }
        }
    }
    Ok(rhs)
}

/// Weighted mass matrix W_ij = (fprime(u_h) phi_j, phi_i); symmetric.
pub fn assemble_weighted_mass(
    space: &FemSpace,
    u: &Field,
    fprime: impl Fn(f64) -> f64,
) -> Result<SparseMatrix> {
    let (rp, ci) = space.pattern();
    let mut out = SparseMatrix::zeros_on_pattern(rp, ci);
    assemble_weighted_mass_into(space, u, fprime, &mut out)?;
    Ok(out)
}

/// As [`assemble_weighted_mass`], reusing the target's allocation. The
/// target must live on the space's pattern.
pub fn assemble_weighted_mass_into(
    space: &FemSpace,
    u: &Field,
    fprime: impl Fn(f64) -> f64,
    out: &mut SparseMatrix,
) -> Result<()> {
    assert_eq!(u.len(), space.n_dofs());
    let slots = space.element_slots();
    let vals = out.values_mut();
    vals.fill(0.0);
    for (el, slot) in space.elements().iter().zip(slots) {
        let loc = gather(el, u);
        for q in 0..3 {
            let mut uq = 0.0;
            for a in 0..el.nloc {
                uq += el.qphi[q][a] * loc[a];
            }
            let fq = fprime(uq);
            if !fq.is_finite() {
                return Err(Error::NonFinite("weighted mass"));
            }
            let wf = el.qw[q] * fq;
            for a in 0..el.nloc {
                for b in a..el.nloc {
                    if slot[a][b] == NO_SLOT {
                        continue;
                    }
                    let v = wf * el.qphi[q][a] * el.qphi[q][b];
                    vals[slot[a][b] as usize] += v;
                    if b != a {
                        vals[slot[b][a] as usize] += v;
                    }
                }
            }
        }
    }
    Ok(())
}

/// Diagonal of the lumped mass matrix: the row sums of the full consistent
/// mass, i.e. the integrals of the interior hat functions.
pub fn lumped_mass(space: &FemSpace) -> Vec<f64> {
    let mut d = vec![0.0; space.n_dofs()];
    for el in space.elements() {
        for q in 0..3 {
            for a in 0..el.nloc {
                let dof = el.dofs[a];
                if dof != NO_DOF {
                    d[dof] += el.qw[q] * el.qphi[q][a];
                }
            }
        }
    }
    d
}

/// Nodal interpolant of a function onto the interior DOFs.
pub fn interpolate(space: &FemSpace, g: impl Fn([f64; 2]) -> f64) -> Field {
    let mut f = Field::zeros(space.n_dofs());
    for d in 0..space.n_dofs() {
        f[d] = g(space.dof_coords(d));
    }
    f
}
