//! The saddle-dynamics time stepper: orthonormalized initialization, the
//! implicit state update solved through a rank-k corrected factorization,
//! and the sequential implicit director updates solved by fixed-point
//! iteration with frozen scalar inner products, plus per-step monitors of
//! orthonormality, the non-degeneracy guard, gradients, and the residual.

mod stepper;

use crate::error::{Error, Result};
use crate::fem::{
    assemble_stiffness, elliptic_projection_with, l2_inner, l2_norm, AnalyticField, FemSpace,
    Field, ProblemSpec,
};
use crate::linalg::{factor_spd, SparseMatrix};

pub use stepper::{Operators, Stepper};

/// Strategy for the linear systems inside the director fixed-point loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VSolver {
    /// Rebuild and refactor the frozen system every iteration.
    FactorEach,
    /// Factor one reference operator per time step and fold the scalar
    /// shifts into the iteration's right-hand side. Same fixed point, one
    /// factorization per step instead of one per iteration.
    FrozenShift,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeParams {
    /// Number of directors (the target saddle index).
    pub k: usize,
    pub beta: f64,
    pub gamma: f64,
    pub tau: f64,
    pub t_final: f64,
    /// L2 tolerance on the fixed-point increment.
    pub picard_tol: f64,
    pub picard_max: usize,
    /// Warning threshold for the non-degeneracy margin |1/(tau gamma) - s_i|.
    pub guard_eps: f64,
    /// False selects the variant without the (v^{n-1/2}, v^{n-1/2}) factors.
    pub orthonormal_terms: bool,
    pub v_solver: VSolver,
}

impl SchemeParams {
    pub fn new(k: usize, tau: f64, t_final: f64) -> Self {
        SchemeParams {
            k,
            beta: 1.0,
            gamma: 1.0,
            tau,
            t_final,
            picard_tol: 1e-12,
            picard_max: 50,
            guard_eps: 1e-6,
            orthonormal_terms: true,
            v_solver: VSolver::FactorEach,
        }
    }

    /// Number of steps; T/tau must be a positive integer.
    pub fn n_steps(&self) -> Result<usize> {
        if !(self.beta > 0.0 && self.gamma > 0.0 && self.tau > 0.0 && self.t_final > 0.0) {
            return Err(Error::InvalidParameter(
                "beta, gamma, tau and T must be positive".into(),
            ));
        }
        let ratio = self.t_final / self.tau;
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-8 * ratio.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "T/tau = {ratio} is not a positive integer"
            )));
        }
        Ok(n as usize)
    }
}

/// State at a time level: the field u and the k orthonormal directors.
#[derive(Debug, Clone)]
pub struct SaddleState {
    pub u: Field,
    pub v: Vec<Field>,
    pub step: usize,
    pub time: f64,
}

impl SaddleState {
    /// Gram deviation max_{i,j} |(v_i, v_j) - delta_ij|.
    pub fn gram_drift(&self, space: &FemSpace) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.v.len() {
            for j in i..self.v.len() {
                let g = l2_inner(space, &self.v[i], &self.v[j]);
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }
}

/// Per-step monitor record.
#[derive(Debug, Clone)]
pub struct StepDiagnostics {
    pub step: usize,
    pub time: f64,
    /// max_{i<=j} |(v_i^n, v_j^n) - delta_ij|
    pub gram_drift: f64,
    /// max_{p<q} |(v_p^n, v_q^{n-1})|
    pub cross_level: f64,
    /// |1/(tau gamma) - s_i| per director
    pub guard_margins: Vec<f64>,
    pub guard_violation: bool,
    pub picard_iters: Vec<usize>,
    /// ||sqrt(a) grad u^n||
    pub grad_u: f64,
    /// ||sqrt(a) grad v_i^n||
    pub grad_v: Vec<f64>,
    /// max_i |(w_i, w_i) - (1 - ||v_i^n - v_i^{n-1}||^2 / 4)|
    pub half_step_defect: f64,
    /// ||F(u_h^n)||_{l_inf}
    pub residual_inf: f64,
}

impl StepDiagnostics {
    pub fn grad_norm_sum(&self) -> f64 {
        self.grad_u + self.grad_v.iter().sum::<f64>()
    }

    pub fn min_guard_margin(&self) -> f64 {
        self.guard_margins.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn total_picard(&self) -> usize {
        self.picard_iters.iter().sum()
    }

    pub fn all_finite(&self) -> bool {
        self.gram_drift.is_finite()
            && self.cross_level.is_finite()
            && self.guard_margins.iter().all(|x| x.is_finite())
            && self.grad_u.is_finite()
            && self.grad_v.iter().all(|x| x.is_finite())
            && self.half_step_defect.is_finite()
            && self.residual_inf.is_finite()
    }
}

/// Full-run record: the per-step diagnostics series and the final residual.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub steps: Vec<StepDiagnostics>,
    pub final_residual_inf: f64,
    pub final_residual: Vec<f64>,
    pub guard_warnings: usize,
}

impl RunReport {
    pub fn max_gram_drift(&self) -> f64 {
        self.steps.iter().map(|d| d.gram_drift).fold(0.0, f64::max)
    }

    pub fn max_cross_level(&self) -> f64 {
        self.steps.iter().map(|d| d.cross_level).fold(0.0, f64::max)
    }

    pub fn max_half_step_defect(&self) -> f64 {
        self.steps.iter().map(|d| d.half_step_defect).fold(0.0, f64::max)
    }

    pub fn max_grad_norm_sum(&self) -> f64 {
        self.steps.iter().map(|d| d.grad_norm_sum()).fold(0.0, f64::max)
    }
}

/// Projects the analytic initial data and orthonormalizes the directors in
/// the discrete L2 inner product by modified Gram-Schmidt.
pub fn initialize(
    space: &FemSpace,
    problem: &ProblemSpec,
    u0: &dyn AnalyticField,
    v0: &[&dyn AnalyticField],
) -> Result<SaddleState> {
    let stiff = assemble_stiffness(space, |x| (problem.diffusion)(x))?;
    let fact = factor_spd(&stiff)?;
    let u = elliptic_projection_with(space, &fact, u0, |x| (problem.diffusion)(x));
    let v: Vec<Field> = v0
        .iter()
        .map(|g| elliptic_projection_with(space, &fact, *g, |x| (problem.diffusion)(x)))
        .collect();
    orthonormalize(space, u, v)
}

/// Orthonormalizes fields already living in the space (used when the initial
/// directors come from a spectral computation rather than analytic data).
pub fn initialize_from_fields(space: &FemSpace, u: Field, v: Vec<Field>) -> Result<SaddleState> {
    orthonormalize(space, u, v)
}

fn orthonormalize(space: &FemSpace, u: Field, mut v: Vec<Field>) -> Result<SaddleState> {
    for i in 0..v.len() {
        // two MGS passes keep the Gram matrix at machine-level identity
        for _pass in 0..2 {
            for l in 0..i {
                let (head, tail) = v.split_at_mut(i);
                let c = l2_inner(space, &tail[0], &head[l]);
                tail[0].axpy(-c, &head[l]);
            }
        }
        let norm = l2_norm(space, &v[i]);
        if norm < 1e-8 {
            return Err(Error::DependentInitialDirector { index: i, norm });
        }
        v[i].scale(1.0 / norm);
    }
    Ok(SaddleState { u, v, step: 0, time: 0.0 })
}

/// Non-degeneracy values s_i = 0.5 [(a grad w, grad w) - (G^n w, w)] from
/// the half-step directors w_i = (v_i^n + v_i^{n-1}) / 2, and the margins
/// |1/(tau gamma) - s_i|.
pub fn guard_margins(
    frozen_op: &SparseMatrix,
    v_old: &[Field],
    v_new: &[Field],
    tau: f64,
    gamma: f64,
) -> Vec<f64> {
    assert_eq!(v_old.len(), v_new.len());
    let inv = 1.0 / (tau * gamma);
    v_old
        .iter()
        .zip(v_new)
        .map(|(vo, vn)| {
            let w: Vec<f64> = vo.iter().zip(vn.iter()).map(|(a, b)| 0.5 * (a + b)).collect();
            let s = 0.5 * frozen_op.bilinear(&w, &w);
            (inv - s).abs()
        })
        .collect()
}
