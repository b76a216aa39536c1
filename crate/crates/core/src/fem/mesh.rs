//! Uniform interval and rectangle meshes with continuous piecewise-linear
//! elements. Homogeneous Dirichlet conditions are imposed by eliminating
//! boundary nodes, so fields carry interior coefficients only.

use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;

pub const NO_DOF: usize = usize::MAX;

/// Uniform mesh: an interval split into `M` segments, or a rectangle split
/// into `Mx x My` squares with each square cut into two triangles along the
/// same diagonal.
#[derive(Debug, Clone)]
pub struct Mesh {
    dim: usize,
    extents: [f64; 2],
    cells: [usize; 2],
    h: [f64; 2],
    nodes: Vec<[f64; 2]>,
    boundary: Vec<bool>,
}

impl Mesh {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents[..self.dim]
    }

    pub fn cells_per_axis(&self) -> &[usize] {
        &self.cells[..self.dim]
    }

    /// Mesh size per axis.
    pub fn h(&self) -> &[f64] {
        &self.h[..self.dim]
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, i: usize) -> [f64; 2] {
        self.nodes[i]
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary[i]
    }

    pub fn n_elements(&self) -> usize {
        match self.dim {
            1 => self.cells[0],
            _ => 2 * self.cells[0] * self.cells[1],
        }
    }
}

/// Builds a uniform mesh. `extents` and `cells_per_axis` must carry `dim`
/// entries; every axis needs at least 2 cells and positive length.
pub fn build_mesh(dim: usize, extents: &[f64], cells_per_axis: &[usize]) -> Result<Mesh> {
    if dim != 1 && dim != 2 {
        return Err(Error::InvalidMesh(format!("dimension {dim} not supported")));
    }
    if extents.len() != dim || cells_per_axis.len() != dim {
        return Err(Error::InvalidMesh(format!(
            "expected {dim} extents and cell counts, got {} and {}",
            extents.len(),
            cells_per_axis.len()
        )));
    }
    for (&l, &m) in extents.iter().zip(cells_per_axis) {
        if l <= 0.0 || !l.is_finite() {
            return Err(Error::InvalidMesh(format!("nonpositive extent {l}")));
        }
        if m < 2 {
            return Err(Error::InvalidMesh(format!("need at least 2 cells per axis, got {m}")));
        }
    }
    let mut ex = [0.0; 2];
    let mut cl = [1usize; 2];
    ex[..dim].copy_from_slice(extents);
    cl[..dim].copy_from_slice(cells_per_axis);
    let h = [
        ex[0] / cl[0] as f64,
        if dim == 2 { ex[1] / cl[1] as f64 } else { 0.0 },
    ];
    let mut nodes = Vec::new();
    let mut boundary = Vec::new();
    match dim {
        1 => {
            let m = cl[0];
            for j in 0..=m {
                nodes.push([j as f64 * h[0], 0.0]);
                boundary.push(j == 0 || j == m);
            }
        }
        _ => {
            let (mx, my) = (cl[0], cl[1]);
            for iy in 0..=my {
                for ix in 0..=mx {
                    nodes.push([ix as f64 * h[0], iy as f64 * h[1]]);
                    boundary.push(ix == 0 || ix == mx || iy == 0 || iy == my);
                }
            }
        }
    }
    Ok(Mesh { dim, extents: ex, cells: cl, h, nodes, boundary })
}

/// Per-element data prepared for assembly: node/dof indices, the constant P1
/// gradients, and a quadrature rule (3-point Gauss on segments, the midpoint
/// rule on triangles) with basis values tabulated at the quadrature points.
#[derive(Debug, Clone)]
pub struct Element {
    pub nodes: [usize; 3],
    pub dofs: [usize; 3],
    pub nloc: usize,
    pub grad: [[f64; 2]; 3],
    pub qpt: [[f64; 2]; 3],
    pub qphi: [[f64; 3]; 3],
    pub qw: [f64; 3],
}

/// P1 finite element space over a mesh, with interior-DOF numbering and the
/// assembly pattern and mass matrix cached.
#[derive(Debug)]
pub struct FemSpace {
    mesh: Mesh,
    node_dof: Vec<usize>,
    dof_node: Vec<usize>,
    elements: Vec<Element>,
    pattern: OnceLock<(Arc<[usize]>, Arc<[usize]>)>,
    mass: OnceLock<SparseMatrix>,
    elem_slots: OnceLock<Vec<[[u32; 3]; 3]>>,
}

/// Marker for local pairs touching a boundary node.
pub const NO_SLOT: u32 = u32::MAX;

impl FemSpace {
    pub fn new(mesh: Mesh) -> Self {
        let mut node_dof = vec![NO_DOF; mesh.n_nodes()];
        let mut dof_node = Vec::new();
        for i in 0..mesh.n_nodes() {
            if !mesh.is_boundary(i) {
                node_dof[i] = dof_node.len();
                dof_node.push(i);
            }
        }
        let elements = build_elements(&mesh, &node_dof);
        FemSpace {
            mesh,
            node_dof,
            dof_node,
            elements,
            pattern: OnceLock::new(),
            mass: OnceLock::new(),
            elem_slots: OnceLock::new(),
        }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn n_dofs(&self) -> usize {
        self.dof_node.len()
    }

    pub fn dof_of_node(&self, node: usize) -> Option<usize> {
        let d = self.node_dof[node];
        (d != NO_DOF).then_some(d)
    }

    pub fn node_of_dof(&self, dof: usize) -> usize {
        self.dof_node[dof]
    }

    pub fn dof_coords(&self, dof: usize) -> [f64; 2] {
        self.mesh.node(self.dof_node[dof])
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    /// Shared CSR pattern of the interior-DOF adjacency.
    pub fn pattern(&self) -> (Arc<[usize]>, Arc<[usize]>) {
        let (rp, ci) = self.pattern.get_or_init(|| {
            let n = self.n_dofs();
            let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
            for el in &self.elements {
                for a in 0..el.nloc {
                    let da = el.dofs[a];
                    if da == NO_DOF {
                        continue;
                    }
                    for b in 0..el.nloc {
                        let db = el.dofs[b];
                        if db != NO_DOF {
                            adj[da].push(db);
                        }
                    }
                }
            }
            let mut row_ptr = Vec::with_capacity(n + 1);
            let mut col_idx = Vec::new();
            row_ptr.push(0usize);
            for row in &mut adj {
                row.sort_unstable();
                row.dedup();
                col_idx.extend_from_slice(row);
                row_ptr.push(col_idx.len());
            }
            (row_ptr.into(), col_idx.into())
        });
        (Arc::clone(rp), Arc::clone(ci))
    }

    /// The consistent mass matrix, assembled once and cached.
    pub fn mass(&self) -> &SparseMatrix {
        self.mass.get_or_init(|| crate::fem::assemble::assemble_mass(self))
    }

    /// Per-element CSR value slots for each interior local pair, so the
    /// assembly loops index straight into the shared pattern.
    pub fn element_slots(&self) -> &[[[u32; 3]; 3]] {
        self.elem_slots.get_or_init(|| {
            let (rp, ci) = self.pattern();
            self.elements
                .iter()
                .map(|el| {
                    let mut s = [[NO_SLOT; 3]; 3];
                    for a in 0..el.nloc {
                        let da = el.dofs[a];
                        if da == NO_DOF {
                            continue;
                        }
                        let lo = rp[da];
                        let hi = rp[da + 1];
                        for b in 0..el.nloc {
                            let db = el.dofs[b];
                            if db == NO_DOF {
                                continue;
                            }
                            let p = ci[lo..hi]
                                .binary_search(&db)
                                .expect("pair present in pattern");
                            s[a][b] = (lo + p) as u32;
                        }
                    }
                    s
                })
                .collect()
        })
    }
}

fn build_elements(mesh: &Mesh, node_dof: &[usize]) -> Vec<Element> {
    let mut out = Vec::with_capacity(mesh.n_elements());
    match mesh.dim() {
        1 => {
            let h = mesh.h()[0];
            // 3-point Gauss on [-1, 1]
            let gp = [-(0.6f64).sqrt(), 0.0, (0.6f64).sqrt()];
            let gw = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
            for e in 0..mesh.cells_per_axis()[0] {
                let n0 = e;
                let n1 = e + 1;
                let x0 = mesh.node(n0)[0];
                let mut el = Element {
                    nodes: [n0, n1, 0],
                    dofs: [node_dof[n0], node_dof[n1], NO_DOF],
                    nloc: 2,
                    grad: [[-1.0 / h, 0.0], [1.0 / h, 0.0], [0.0; 2]],
                    qpt: [[0.0; 2]; 3],
                    qphi: [[0.0; 3]; 3],
                    qw: [0.0; 3],
                };
                for q in 0..3 {
                    let t = 0.5 * (gp[q] + 1.0); // in [0, 1]
                    el.qpt[q] = [x0 + t * h, 0.0];
                    el.qphi[q] = [1.0 - t, t, 0.0];
                    el.qw[q] = gw[q] * 0.5 * h;
                }
                out.push(el);
            }
        }
        _ => {
            let (mx, my) = (mesh.cells_per_axis()[0], mesh.cells_per_axis()[1]);
            let nidx = |ix: usize, iy: usize| iy * (mx + 1) + ix;
            for iy in 0..my {
                for ix in 0..mx {
                    let n00 = nidx(ix, iy);
                    let n10 = nidx(ix + 1, iy);
                    let n01 = nidx(ix, iy + 1);
                    let n11 = nidx(ix + 1, iy + 1);
                    // split along the (n00, n11) diagonal; both CCW
                    for tri in [[n00, n10, n11], [n00, n11, n01]] {
                        out.push(triangle_element(mesh, node_dof, tri));
                    }
                }
            }
        }
    }
    out
}

fn triangle_element(mesh: &Mesh, node_dof: &[usize], nodes: [usize; 3]) -> Element {
    let p: Vec<[f64; 2]> = nodes.iter().map(|&n| mesh.node(n)).collect();
    let e1 = [p[1][0] - p[0][0], p[1][1] - p[0][1]];
    let e2 = [p[2][0] - p[0][0], p[2][1] - p[0][1]];
    let det = e1[0] * e2[1] - e1[1] * e2[0];
    debug_assert!(det > 0.0, "triangle orientation must be positive");
    let area = 0.5 * det;
    // physical gradients of the barycentric basis
    let grad = [
        [(e1[1] - e2[1]) / det, (e2[0] - e1[0]) / det],
        [e2[1] / det, -e2[0] / det],
        [-e1[1] / det, e1[0] / det],
    ];
    // edge-midpoint rule: exact for quadratics
    let mids = [
        [(p[0][0] + p[1][0]) / 2.0, (p[0][1] + p[1][1]) / 2.0],
        [(p[1][0] + p[2][0]) / 2.0, (p[1][1] + p[2][1]) / 2.0],
        [(p[2][0] + p[0][0]) / 2.0, (p[2][1] + p[0][1]) / 2.0],
    ];
    let qphi = [
        [0.5, 0.5, 0.0],
        [0.0, 0.5, 0.5],
        [0.5, 0.0, 0.5],
    ];
    Element {
        nodes,
        dofs: [node_dof[nodes[0]], node_dof[nodes[1]], node_dof[nodes[2]]],
        nloc: 3,
        grad,
        qpt: mids,
        qphi,
        qw: [area / 3.0; 3],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_mesh_counts() {
        let m = build_mesh(1, &[std::f64::consts::PI], &[4]).unwrap();
        assert_eq!(m.n_nodes(), 5);
        let s = FemSpace::new(m);
        assert_eq!(s.n_dofs(), 3);
        for d in 0..3 {
            let x = s.dof_coords(d)[0];
            let want = (d + 1) as f64 * std::f64::consts::PI / 4.0;
            assert!((x - want).abs() < 1e-15);
        }
    }

    #[test]
    fn paper_resolution_mesh_size() {
        let m = build_mesh(1, &[std::f64::consts::PI], &[100]).unwrap();
        assert!((m.h()[0] - std::f64::consts::PI / 100.0).abs() < 1e-15);
    }

    #[test]
    fn unit_square_two_by_two() {
        let m = build_mesh(2, &[1.0, 1.0], &[2, 2]).unwrap();
        assert_eq!(m.n_nodes(), 9);
        assert_eq!(m.n_elements(), 8);
        let s = FemSpace::new(m);
        assert_eq!(s.n_dofs(), 1);
        assert_eq!(s.dof_coords(0), [0.5, 0.5]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(build_mesh(1, &[0.0], &[4]).is_err());
        assert!(build_mesh(1, &[1.0], &[1]).is_err());
        assert!(build_mesh(2, &[1.0], &[2, 2]).is_err());
        assert!(build_mesh(3, &[1.0, 1.0, 1.0], &[2, 2, 2]).is_err());
    }

    #[test]
    fn triangle_areas_sum_to_domain() {
        let m = build_mesh(2, &[2.0, 1.0], &[4, 3]).unwrap();
        let s = FemSpace::new(m);
        let total: f64 = s
            .elements()
            .iter()
            .map(|e| e.qw.iter().sum::<f64>())
            .sum();
        assert!((total - 2.0).abs() < 1e-13);
    }
}
