//! Multi-solution search: downward and upward sweeps from converged saddles,
//! symmetry-aware deduplication, and a directed graph of the solutions
//! grouped by index with JSON/DOT export.

use std::sync::Arc;

use rayon::prelude::*;

use crate::dynamics::{initialize_from_fields, Operators, SchemeParams, Stepper};
use crate::error::{Error, Result};
use crate::fem::{l2_norm, FemSpace, Field, ProblemSpec};
use crate::linalg::{factor_spd, Factorization, SparseMatrix};
use crate::spectral::{assemble_hessian, default_shift, morse_index, smallest_eigenpairs, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchDirection {
    Root,
    Down,
    Up,
}

impl SearchDirection {
    pub fn as_str(&self) -> &'static str {
        match self {
            SearchDirection::Root => "root",
            SearchDirection::Down => "down",
            SearchDirection::Up => "up",
        }
    }
}

/// A converged solution: the field, its Morse index, residual, and where it
/// came from.
#[derive(Debug, Clone)]
pub struct SolutionRecord {
    pub id: usize,
    pub u: Field,
    pub index: usize,
    pub residual: f64,
    pub parent: Option<usize>,
    pub search: SearchDirection,
    /// (eigen-direction ordinal, sign) of the perturbation that produced it.
    pub perturbation: Option<(usize, i8)>,
}

#[derive(Debug, Clone)]
pub struct Edge {
    pub parent: usize,
    pub child: usize,
    pub direction: SearchDirection,
    pub perturbation: (usize, i8),
}

#[derive(Debug, Clone, Default)]
pub struct LandscapeGraph {
    pub nodes: Vec<SolutionRecord>,
    pub edges: Vec<Edge>,
    pub runs_used: usize,
    pub discarded: usize,
    pub budget_exhausted: bool,
}

impl LandscapeGraph {
    /// Node ids grouped by Morse index, ascending.
    pub fn by_index(&self) -> Vec<(usize, Vec<usize>)> {
        let mut max_idx = 0;
        for n in &self.nodes {
            max_idx = max_idx.max(n.index);
        }
        (0..=max_idx)
            .map(|k| (k, self.nodes.iter().filter(|n| n.index == k).map(|n| n.id).collect()))
            .filter(|(_, v): &(usize, Vec<usize>)| !v.is_empty())
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct LandscapeParams {
    /// Perturbation size relative to the parent's L2 norm.
    pub epsilon_rel: f64,
    /// Absolute perturbation used when the parent is the zero solution.
    pub epsilon_abs: f64,
    /// Relative L2 tolerance of the symmetry-aware duplicate relation.
    pub dedup_tol: f64,
    /// Children with a larger final residual are discarded.
    pub residual_threshold: f64,
    /// Cap on the total number of child runs.
    pub max_runs: usize,
    /// Upward passes launched from every minimum, e.g. [1].
    pub upward_targets: Vec<usize>,
    pub seed: u64,
}

impl Default for LandscapeParams {
    fn default() -> Self {
        LandscapeParams {
            epsilon_rel: 0.1,
            epsilon_abs: 0.1,
            dedup_tol: 1e-2,
            residual_threshold: 1e-3,
            max_runs: 200,
            upward_targets: vec![1],
            seed: 1,
        }
    }
}

/// Shared context for a sweep: the discretization, the scheme parameters
/// (k is overridden per child), and the operators shared by all child runs.
pub struct LandscapeContext<'a> {
    pub space: &'a FemSpace,
    pub problem: &'a ProblemSpec,
    pub scheme: SchemeParams,
    pub params: LandscapeParams,
    ops: Arc<Operators>,
    b_fact: Arc<Factorization>,
}

impl<'a> LandscapeContext<'a> {
    pub fn new(
        space: &'a FemSpace,
        problem: &'a ProblemSpec,
        scheme: SchemeParams,
        params: LandscapeParams,
    ) -> Result<Self> {
        let ops = Arc::new(Operators::assemble(space, problem)?);
        let b = SparseMatrix::linear_combination(&[
            (1.0 / (scheme.beta * scheme.tau), &ops.mass),
            (1.0, &ops.stiffness),
        ]);
        let b_fact = Arc::new(factor_spd(&b)?);
        Ok(LandscapeContext { space, problem, scheme, params, ops, b_fact })
    }

    fn scheme_with_k(&self, k: usize) -> SchemeParams {
        let mut s = self.scheme;
        s.k = k;
        s
    }

    /// Runs the dynamics from prepared fields; returns the converged field
    /// and residual, or None if the residual threshold is missed.
    fn converge_child(&self, u0: Field, directors: Vec<Field>) -> Result<Option<(Field, f64)>> {
        let k = directors.len();
        let state = initialize_from_fields(self.space, u0, directors)?;
        let mut stepper = Stepper::with_shared(
            self.space,
            self.problem,
            self.scheme_with_k(k),
            Arc::clone(&self.ops),
            Arc::clone(&self.b_fact),
        )?;
        // stop with margin below the acceptance threshold so dedup compares
        // well-resolved states
        let stop = 0.5 * self.params.residual_threshold;
        match stepper.run_with_stop(state, Some(stop)) {
            Ok((state, report)) => {
                if report.final_residual_inf <= self.params.residual_threshold {
                    Ok(Some((state.u, report.final_residual_inf)))
                } else {
                    eprintln!(
                        "landscape: child above threshold (residual {:.2e})",
                        report.final_residual_inf
                    );
                    Ok(None)
                }
            }
            // a diverged child is discarded, not an error
            Err(Error::StepFailed { step, source }) => {
                eprintln!("landscape: child diverged at step {step}: {source}");
                Ok(None)
            }
            Err(e) => Err(e),
        }
    }

    /// Morse index of a field together with a spectrum holding at least
    /// `min_pairs` eigenpairs (grown as needed to certify the count).
    pub fn analyze(&self, u: &Field, min_pairs: usize) -> Result<(usize, Spectrum)> {
        let h = assemble_hessian(self.space, self.problem, u)?;
        let sigma = default_shift(self.space, self.problem, u);
        let n = h.matrix.n();
        if min_pairs > n {
            return Err(Error::SpectrumWindow { available: n });
        }
        let mut m = min_pairs.max(6).min(n);
        loop {
            let spec = smallest_eigenpairs(&h, m, sigma)?;
            let scale = spec.values().iter().fold(0.0f64, |a, &v| a.max(v.abs()));
            let zero_tol = 1e-8 * scale.max(1.0);
            match morse_index(&spec, zero_tol) {
                Ok(mi) if spec.pairs.len() >= min_pairs => return Ok((mi.negative, spec)),
                Ok(_) | Err(Error::SpectrumWindow { .. }) => {
                    if m >= n {
                        return Err(Error::SpectrumWindow { available: m });
                    }
                    m = (2 * m).min(n);
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn epsilon_for(&self, parent: &Field) -> f64 {
        let nrm = l2_norm(self.space, parent);
        if nrm > 1e-12 {
            self.params.epsilon_rel * nrm
        } else {
            self.params.epsilon_abs
        }
    }

    /// Launches children of `parent` toward a lower index: one run per
    /// unstable eigendirection and sign, each with `target` directors taken
    /// from the remaining unstable eigenvectors. Discards non-convergent
    /// children; deduplicates the survivors.
    pub fn downward_search(
        &self,
        parent: &SolutionRecord,
        target: usize,
    ) -> Result<Vec<SolutionRecord>> {
        if parent.index <= target {
            return Err(Error::InvalidSearchTarget { target, parent: parent.index });
        }
        let (_, spectrum) = self.analyze(&parent.u, parent.index + 1)?;
        let unstable: Vec<&Field> = spectrum.pairs[..parent.index].iter().map(|p| &p.vector).collect();
        let eps = self.epsilon_for(&parent.u);
        let mut jobs = Vec::new();
        for j in 0..unstable.len() {
            for sign in [1i8, -1i8] {
                let mut u0 = parent.u.clone();
                u0.axpy(eps * sign as f64, unstable[j]);
                let directors: Vec<Field> = (0..unstable.len())
                    .filter(|&l| l != j)
                    .take(target)
                    .map(|l| unstable[l].clone())
                    .collect();
                jobs.push(((j, sign), u0, directors));
            }
        }
        self.run_jobs(parent.id, SearchDirection::Down, jobs)
    }

    /// Launches children toward a higher index: the parent's unstable set is
    /// padded with the next stable eigenvectors, and the state is perturbed
    /// along each added direction.
    pub fn upward_search(
        &self,
        parent: &SolutionRecord,
        target: usize,
    ) -> Result<Vec<SolutionRecord>> {
        if target <= parent.index {
            return Err(Error::InvalidSearchTarget { target, parent: parent.index });
        }
        let (_, spectrum) = self.analyze(&parent.u, target + 1)?;
        let directors: Vec<Field> = spectrum.pairs[..target].iter().map(|p| p.vector.clone()).collect();
        let eps = self.epsilon_for(&parent.u);
        let mut jobs = Vec::new();
        for j in parent.index..target {
            for sign in [1i8, -1i8] {
                let mut u0 = parent.u.clone();
                u0.axpy(eps * sign as f64, &spectrum.pairs[j].vector);
                jobs.push(((j, sign), u0, directors.clone()));
            }
        }
        self.run_jobs(parent.id, SearchDirection::Up, jobs)
    }

    #[allow(clippy::type_complexity)]
    fn run_jobs(
        &self,
        parent_id: usize,
        direction: SearchDirection,
        jobs: Vec<((usize, i8), Field, Vec<Field>)>,
    ) -> Result<Vec<SolutionRecord>> {
        let outcomes: Vec<Result<Option<((usize, i8), Field, f64)>>> = jobs
            .into_par_iter()
            .map(|(tag, u0, dirs)| {
                Ok(self.converge_child(u0, dirs)?.map(|(u, r)| (tag, u, r)))
            })
            .collect();
        let mut found = Vec::new();
        for outcome in outcomes {
            let Some((tag, u, residual)) = outcome? else { continue };
            if found
                .iter()
                .any(|r: &SolutionRecord| dedup(self.space, &r.u, &u, self.params.dedup_tol))
            {
                continue;
            }
            let (index, _) = self.analyze(&u, 1)?;
            found.push(SolutionRecord {
                id: usize::MAX,
                u,
                index,
                residual,
                parent: Some(parent_id),
                search: direction,
                perturbation: Some(tag),
            });
        }
        Ok(found)
    }

    /// Breadth-first sweep: downward from the highest-index node, then
    /// upward passes from the minima, under a total run budget.
    pub fn build(&self, root_u: Field) -> Result<LandscapeGraph> {
        let mut graph = LandscapeGraph::default();
        let (root_index, _) = self.analyze(&root_u, 1)?;
        let stepper = Stepper::with_shared(
            self.space,
            self.problem,
            self.scheme_with_k(0),
            Arc::clone(&self.ops),
            Arc::clone(&self.b_fact),
        )?;
        let (_, root_residual) = stepper.residual_inf(&root_u)?;
        if root_residual > self.params.residual_threshold {
            return Err(Error::InvalidParameter(format!(
                "root state is not stationary: residual {root_residual:.3e}"
            )));
        }
        graph.nodes.push(SolutionRecord {
            id: 0,
            u: root_u,
            index: root_index,
            residual: root_residual,
            parent: None,
            search: SearchDirection::Root,
            perturbation: None,
        });

        // downward waves, highest index first
        let mut processed = vec![false; 1];
        loop {
            let next = graph
                .nodes
                .iter()
                .filter(|n| !processed[n.id] && n.index > 0)
                .max_by_key(|n| (n.index, usize::MAX - n.id))
                .map(|n| n.id);
            let Some(pid) = next else { break };
            processed[pid] = true;
            let parent = graph.nodes[pid].clone();
            let budget = self.params.max_runs.saturating_sub(graph.runs_used);
            let planned = 2 * parent.index;
            if budget < planned {
                graph.budget_exhausted = true;
                break;
            }
            graph.runs_used += planned;
            let children = self.downward_search(&parent, parent.index - 1)?;
            graph.discarded += planned.saturating_sub(children.len());
            eprintln!(
                "landscape: node {} (index {}) -> {} candidate children, {} runs used",
                parent.id,
                parent.index,
                children.len(),
                graph.runs_used
            );
            for child in children {
                integrate(self.space, &mut graph, &mut processed, child, self.params.dedup_tol);
            }
        }

        // upward passes from the minima
        let minima: Vec<usize> = graph.nodes.iter().filter(|n| n.index == 0).map(|n| n.id).collect();
        for pid in minima {
            for &target in &self.params.upward_targets {
                if target == 0 {
                    continue;
                }
                let parent = graph.nodes[pid].clone();
                if target <= parent.index {
                    continue;
                }
                let planned = 2 * (target - parent.index);
                if graph.runs_used + planned > self.params.max_runs {
                    graph.budget_exhausted = true;
                    break;
                }
                graph.runs_used += planned;
                let children = self.upward_search(&parent, target)?;
                graph.discarded += planned.saturating_sub(children.len());
                for child in children {
                    integrate(self.space, &mut graph, &mut processed, child, self.params.dedup_tol);
                }
            }
        }
        Ok(graph)
    }

    /// Recomputes every node's Morse index from its field; true when all
    /// stored indices match.
    pub fn audit(&self, graph: &LandscapeGraph) -> Result<bool> {
        for node in &graph.nodes {
            let (idx, _) = self.analyze(&node.u, 1)?;
            if idx != node.index {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

fn integrate(
    space: &FemSpace,
    graph: &mut LandscapeGraph,
    processed: &mut Vec<bool>,
    mut child: SolutionRecord,
    tol: f64,
) {
    let parent_id = child.parent.expect("child has a parent");
    if let Some(existing) = graph.nodes.iter().find(|n| dedup(space, &n.u, &child.u, tol)) {
        // duplicate: keep the node, record the discovery edge when the
        // indices differ (edges connect distinct index levels)
        let existing_id = existing.id;
        if graph.nodes[parent_id].index != graph.nodes[existing_id].index
            && existing_id != parent_id
        {
            graph.edges.push(Edge {
                parent: parent_id,
                child: existing_id,
                direction: child.search,
                perturbation: child.perturbation.unwrap_or((0, 1)),
            });
        }
        return;
    }
    child.id = graph.nodes.len();
    processed.push(false);
    if graph.nodes[parent_id].index != child.index {
        graph.edges.push(Edge {
            parent: parent_id,
            child: child.id,
            direction: child.search,
            perturbation: child.perturbation.unwrap_or((0, 1)),
        });
    }
    graph.nodes.push(child);
}

/// True when the fields coincide up to the domain's symmetry group: sign
/// flip always, plus the eight dihedral transforms on a square grid,
/// realized as node permutations.
pub fn dedup(space: &FemSpace, a: &Field, b: &Field, tol: f64) -> bool {
    let na = l2_norm(space, a);
    let scale = na.max(1.0);
    for perm in symmetry_permutations(space) {
        let tb: Field = Field(perm.iter().map(|&p| b[p]).collect());
        for sign in [1.0, -1.0] {
            let mut diff = a.clone();
            diff.axpy(-sign, &tb);
            if l2_norm(space, &diff) <= tol * scale {
                return true;
            }
        }
    }
    false
}

/// DOF permutations realizing the domain's point symmetries.
fn symmetry_permutations(space: &FemSpace) -> Vec<Vec<usize>> {
    let mesh = space.mesh();
    let n = space.n_dofs();
    let identity: Vec<usize> = (0..n).collect();
    if mesh.dim() != 2 {
        return vec![identity];
    }
    let cells = mesh.cells_per_axis();
    let (mx, my) = (cells[0], cells[1]);
    let ext = mesh.extents();
    if mx != my || (ext[0] - ext[1]).abs() > 1e-12 * ext[0].abs() {
        return vec![identity];
    }
    let m = mx;
    type Xf = fn(usize, usize, usize) -> (usize, usize);
    let transforms: [Xf; 8] = [
        |x, y, _m| (x, y),
        |x, y, m| (y, m - x),
        |x, y, m| (m - x, m - y),
        |x, y, m| (m - y, x),
        |x, y, m| (m - x, y),
        |x, y, m| (x, m - y),
        |x, y, _m| (y, x),
        |x, y, m| (m - y, m - x),
    ];
    transforms
        .iter()
        .map(|t| {
            (0..n)
                .map(|d| {
                    let node = space.node_of_dof(d);
                    let (ix, iy) = (node % (m + 1), node / (m + 1));
                    let (jx, jy) = t(ix, iy, m);
                    space
                        .dof_of_node(jy * (m + 1) + jx)
                        .expect("symmetry maps interior nodes to interior nodes")
                })
                .collect()
        })
        .collect()
}

/// Deterministic JSON document for a landscape graph. `field_ref` supplies
/// the file reference stored per node.
pub fn graph_to_json(graph: &LandscapeGraph, field_ref: impl Fn(usize) -> String) -> String {
    let mut s = String::from("{\n  \"nodes\": [\n");
    for (i, node) in graph.nodes.iter().enumerate() {
        s.push_str(&format!(
            "    {{\"id\": {}, \"index\": {}, \"residual\": {:.16e}, \"field\": \"{}\", \"search\": \"{}\"}}{}\n",
            node.id,
            node.index,
            node.residual,
            field_ref(node.id),
            node.search.as_str(),
            if i + 1 < graph.nodes.len() { "," } else { "" }
        ));
    }
    s.push_str("  ],\n  \"edges\": [\n");
    for (i, e) in graph.edges.iter().enumerate() {
        s.push_str(&format!(
            "    {{\"parent\": {}, \"child\": {}, \"direction\": \"{}\", \"eigendirection\": {}, \"sign\": {}}}{}\n",
            e.parent,
            e.child,
            e.direction.as_str(),
            e.perturbation.0,
            e.perturbation.1,
            if i + 1 < graph.edges.len() { "," } else { "" }
        ));
    }
    s.push_str(&format!(
        "  ],\n  \"runs_used\": {},\n  \"discarded\": {},\n  \"budget_exhausted\": {}\n}}\n",
        graph.runs_used, graph.discarded, graph.budget_exhausted
    ));
    s
}

/// GraphViz DOT rendering, nodes ranked by Morse index.
pub fn graph_to_dot(graph: &LandscapeGraph) -> String {
    let mut s = String::from("digraph landscape {\n  rankdir=TB;\n");
    for (idx, ids) in graph.by_index().into_iter().rev() {
        s.push_str(&format!("  {{ rank=same;"));
        for id in &ids {
            s.push_str(&format!(" s{id};"));
        }
        s.push_str(&format!(" }} // index {idx}\n"));
    }
    for node in &graph.nodes {
        s.push_str(&format!(
            "  s{} [label=\"#{} k={} F={:.2e}\"];\n",
            node.id, node.id, node.index, node.residual
        ));
    }
    for e in &graph.edges {
        s.push_str(&format!(
            "  s{} -> s{} [label=\"{}{}\"];\n",
            e.parent,
            e.child,
            if e.perturbation.1 >= 0 { "+" } else { "-" },
            e.perturbation.0
        ));
    }
    s.push_str("}\n");
    s
}
