//! Discrete L2 and energy norms, plus error norms against analytic data
//! evaluated with a finer quadrature than the assembly rule.

use crate::fem::mesh::{FemSpace, NO_DOF};
use crate::fem::{AnalyticField, Field};
use crate::linalg::SparseMatrix;

/// (x, y)_{L2} = x^T M y over the space's mass matrix.
pub fn l2_inner(space: &FemSpace, x: &Field, y: &Field) -> f64 {
    assert_eq!(x.len(), space.n_dofs());
    assert_eq!(y.len(), space.n_dofs());
    space.mass().bilinear(x, y)
}

pub fn l2_norm(space: &FemSpace, x: &Field) -> f64 {
    l2_inner(space, x, x).max(0.0).sqrt()
}

/// sqrt(x^T A x) for a preassembled (a-weighted) stiffness matrix.
pub fn h1_seminorm_weighted(stiffness: &SparseMatrix, x: &Field) -> f64 {
    assert_eq!(x.len(), stiffness.n());
    stiffness.bilinear(x, x).max(0.0).sqrt()
}

/// 5-point Gauss abscissae/weights on [0, 1].
const G5_T: [f64; 5] = [
    0.046910077030668,
    0.230765344947158,
    0.5,
    0.769234655052842,
    0.953089922969332,
];
const G5_W: [f64; 5] = [
    0.118463442528095,
    0.239314335249683,
    0.284444444444444,
    0.239314335249683,
    0.118463442528095,
];

/// Degree-5 exact 7-point rule on the reference triangle (barycentric).
const T7: [([f64; 3], f64); 7] = [
    ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
    ([0.059715871789770, 0.470142064105115, 0.470142064105115], 0.132394152788506),
    ([0.470142064105115, 0.059715871789770, 0.470142064105115], 0.132394152788506),
    ([0.470142064105115, 0.470142064105115, 0.059715871789770], 0.132394152788506),
    ([0.797426985353087, 0.101286507323456, 0.101286507323456], 0.125939180544827),
    ([0.101286507323456, 0.797426985353087, 0.101286507323456], 0.125939180544827),
    ([0.101286507323456, 0.101286507323456, 0.797426985353087], 0.125939180544827),
];

/// ||u_h - g||_{L2} with g analytic, by fine quadrature.
pub fn l2_error(space: &FemSpace, u: &Field, g: &dyn AnalyticField) -> f64 {
    quad_error(space, u, g, false)
}

/// ||grad(u_h - g)||_{L2} with g analytic.
pub fn h1_semi_error(space: &FemSpace, u: &Field, g: &dyn AnalyticField) -> f64 {
    quad_error(space, u, g, true)
}

fn quad_error(space: &FemSpace, u: &Field, g: &dyn AnalyticField, gradient: bool) -> f64 {
    assert_eq!(u.len(), space.n_dofs());
    let mut acc = 0.0;
    for el in space.elements() {
        let mut loc = [0.0; 3];
        for a in 0..el.nloc {
            let d = el.dofs[a];
            if d != NO_DOF {
                loc[a] = u[d];
            }
        }
        if el.nloc == 2 {
            let x0 = space.mesh().node(el.nodes[0])[0];
            let h = space.mesh().h()[0];
            for (t, w) in G5_T.iter().zip(G5_W) {
                let x = [x0 + t * h, 0.0];
                let d2 = if gradient {
                    let uh_dx = loc[0] * el.grad[0][0] + loc[1] * el.grad[1][0];
                    let e = uh_dx - g.gradient(x)[0];
                    e * e
                } else {
                    let uh = loc[0] * (1.0 - t) + loc[1] * t;
                    let e = uh - g.value(x);
                    e * e
                };
                acc += w * h * d2;
            }
        } else {
            let p: Vec<[f64; 2]> = el.nodes.iter().map(|&n| space.mesh().node(n)).collect();
            let area: f64 = el.qw.iter().sum();
            for (bary, w) in T7 {
                let x = [
                    bary[0] * p[0][0] + bary[1] * p[1][0] + bary[2] * p[2][0],
                    bary[0] * p[0][1] + bary[1] * p[1][1] + bary[2] * p[2][1],
                ];
                let d2 = if gradient {
                    let mut uh_g = [0.0, 0.0];
                    for a in 0..3 {
                        uh_g[0] += loc[a] * el.grad[a][0];
                        uh_g[1] += loc[a] * el.grad[a][1];
                    }
                    let gg = g.gradient(x);
                    (uh_g[0] - gg[0]).powi(2) + (uh_g[1] - gg[1]).powi(2)
                } else {
                    let uh = loc[0] * bary[0] + loc[1] * bary[1] + loc[2] * bary[2];
                    let e = uh - g.value(x);
                    e * e
                };
                acc += w * area * d2;
            }
        }
    }
    acc.sqrt()
}
