//! One time level of the scheme:
//!
//!   1. implicit state update: (B - 2 sum_i (M v_i)(A v_i)^T) u^n = rhs with
//!      B = (beta tau)^-1 M + A factored once per run; the rank-k part goes
//!      through the capacitance formula;
//!   2. directors in order i = 1..k: the implicit relation is solved by a
//!      fixed-point loop that freezes every scalar inner product involving
//!      the half-step average w = (v^n + v^{n-1})/2, leaving the linear
//!      system [ (gamma tau)^-1 M + (s0/2) K - (sigma/2) M ] v^n = rhs,
//!      where K = A - G - W(u^n) is the frozen spatial operator;
//!   3. monitors: Gram drift, cross-level orthogonality, guard margins,
//!      half-step identity defect, weighted gradient norms, residual.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{
    assemble_advection_reaction, assemble_nonlinear_load, assemble_stiffness,
    assemble_weighted_mass_into, lumped_mass, FemSpace, Field, ProblemSpec,
};
use crate::linalg::{dot, factor_general, factor_spd, woodbury_solve, Factorization, SparseMatrix};

use super::{RunReport, SaddleState, SchemeParams, StepDiagnostics, VSolver};

/// Preassembled time-independent operators.
#[derive(Debug)]
pub struct Operators {
    pub mass: SparseMatrix,
    pub stiffness: SparseMatrix,
    /// (b . grad + c) matrix; None for the pure elliptic model.
    pub advection_reaction: Option<SparseMatrix>,
    pub lumped_mass: Vec<f64>,
}

impl Operators {
    pub fn assemble(space: &FemSpace, problem: &ProblemSpec) -> Result<Self> {
        let mass = space.mass().clone();
        let stiffness = assemble_stiffness(space, |x| (problem.diffusion)(x))?;
        let advection_reaction = if problem.has_advection_reaction() {
            let b = problem.advection.clone();
            let c = problem.reaction.clone();
            Some(assemble_advection_reaction(
                space,
                move |x| b.as_ref().map_or([0.0, 0.0], |f| f(x)),
                move |x| c.as_ref().map_or(0.0, |f| f(x)),
            ))
        } else {
            None
        };
        Ok(Operators {
            mass,
            stiffness,
            advection_reaction,
            lumped_mass: lumped_mass(space),
        })
    }
}

pub struct Stepper<'a> {
    space: &'a FemSpace,
    problem: &'a ProblemSpec,
    params: SchemeParams,
    ops: Arc<Operators>,
    b_fact: Arc<Factorization>,
    /// K = A - G - W(u^n), refreshed once per step.
    frozen_op: SparseMatrix,
    weighted_mass: SparseMatrix,
    /// f-load at the current state, reused as next step's explicit load.
    load_cache: Option<Vec<f64>>,
    /// frozen-shift reference operator (factorization, K snapshot, build step)
    b0_cache: Option<(Factorization, SparseMatrix, usize)>,
}

/// Steps between rebuilds of the frozen-shift reference factorization.
const B0_REFRESH: usize = 16;

impl<'a> Stepper<'a> {
    pub fn new(space: &'a FemSpace, problem: &'a ProblemSpec, params: SchemeParams) -> Result<Self> {
        let ops = Arc::new(Operators::assemble(space, problem)?);
        let b = SparseMatrix::linear_combination(&[
            (1.0 / (params.beta * params.tau), &ops.mass),
            (1.0, &ops.stiffness),
        ]);
        let b_fact = Arc::new(factor_spd(&b)?);
        Self::with_shared(space, problem, params, ops, b_fact)
    }

    /// Builds a stepper over operators and a state-update factorization
    /// shared with other runs (they depend on the mesh, beta and tau only).
    pub fn with_shared(
        space: &'a FemSpace,
        problem: &'a ProblemSpec,
        params: SchemeParams,
        ops: Arc<Operators>,
        b_fact: Arc<Factorization>,
    ) -> Result<Self> {
        params.n_steps()?;
        problem.validate(space)?;
        let (rp, ci) = space.pattern();
        let frozen_op = SparseMatrix::zeros_on_pattern(rp.clone(), ci.clone());
        let weighted_mass = SparseMatrix::zeros_on_pattern(rp, ci);
        Ok(Stepper {
            space,
            problem,
            params,
            ops,
            b_fact,
            frozen_op,
            weighted_mass,
            load_cache: None,
            b0_cache: None,
        })
    }

    pub fn params(&self) -> &SchemeParams {
        &self.params
    }

    pub fn operators(&self) -> &Operators {
        &self.ops
    }

    pub fn shared_operators(&self) -> Arc<Operators> {
        Arc::clone(&self.ops)
    }

    pub fn shared_update_factorization(&self) -> Arc<Factorization> {
        Arc::clone(&self.b_fact)
    }

    /// Nodal strong-form residual F = M_L^-1 (-A u + G u + (f(u_h), phi))
    /// and its max-abs entry.
    pub fn residual_inf(&self, u: &Field) -> Result<(Vec<f64>, f64)> {
        let load = self.f_load(u)?;
        self.residual_from_load(u, &load)
    }

    fn residual_from_load(&self, u: &Field, f_load: &[f64]) -> Result<(Vec<f64>, f64)> {
        let au = self.ops.stiffness.matvec(u);
        let gu = self.ops.advection_reaction.as_ref().map(|g| g.matvec(u));
        let mut res = vec![0.0; u.len()];
        let mut worst = 0.0f64;
        for i in 0..u.len() {
            let mut r = -au[i] + f_load[i];
            if let Some(gu) = &gu {
                r += gu[i];
            }
            res[i] = r / self.ops.lumped_mass[i];
            worst = worst.max(res[i].abs());
        }
        Ok((res, worst))
    }

    fn f_load(&self, u: &Field) -> Result<Vec<f64>> {
        assemble_nonlinear_load(self.space, u, |z| (self.problem.f)(z))
    }

    /// State update: solves the rank-k corrected linear system at level n
    /// from the level n-1 data. Exposed for the small-instance oracles.
    pub fn u_step(&self, state: &SaddleState, f_load_prev: &[f64]) -> Result<Field> {
        let m = &self.ops.mass;
        let a = &self.ops.stiffness;
        let inv_bt = 1.0 / (self.params.beta * self.params.tau);

        // explicit part of the load: (F(u^{n-1}), phi) for the extended
        // operator, just the f-load for the elliptic model
        let mut load_tot = f_load_prev.to_vec();
        if let Some(g) = &self.ops.advection_reaction {
            let gu = g.matvec(&state.u);
            for (l, gv) in load_tot.iter_mut().zip(gu) {
                *l += gv;
            }
        }

        let mu = m.matvec(&state.u);
        let mut rhs = load_tot.clone();
        for (r, mv) in rhs.iter_mut().zip(&mu) {
            *r += inv_bt * mv;
        }
        let mut u_cols = Vec::with_capacity(state.v.len());
        let mut w_cols = Vec::with_capacity(state.v.len());
        for vi in &state.v {
            let mv = m.matvec(vi);
            let av = a.matvec(vi);
            let proj = dot(vi, &load_tot);
            for (r, mvj) in rhs.iter_mut().zip(&mv) {
                *r -= 2.0 * proj * mvj;
            }
            let scaled: Vec<f64> = mv.iter().map(|x| 2.0 * x).collect();
            u_cols.push(scaled);
            w_cols.push(av);
        }
        if rhs.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("state-update right-hand side"));
        }
        let x = woodbury_solve(&self.b_fact, &u_cols, &w_cols, &rhs)?;
        Ok(Field(x))
    }

    /// Refreshes K = A - G - W(u) for a new state value.
    fn refresh_frozen_op(&mut self, u: &Field) -> Result<()> {
        assemble_weighted_mass_into(self.space, u, |z| (self.problem.fprime)(z), &mut self.weighted_mass)?;
        match &self.ops.advection_reaction {
            Some(g) => self.frozen_op.set_linear_combination(&[
                (1.0, &self.ops.stiffness),
                (-1.0, g),
                (-1.0, &self.weighted_mass),
            ]),
            None => self.frozen_op.set_linear_combination(&[
                (1.0, &self.ops.stiffness),
                (-1.0, &self.weighted_mass),
            ]),
        }
        Ok(())
    }

    /// The frozen spatial operator K = A - G - W(u), as used by the director
    /// updates and the guard monitor.
    pub fn linearized_operator(&mut self, u: &Field) -> Result<SparseMatrix> {
        self.refresh_frozen_op(u)?;
        Ok(self.frozen_op.clone())
    }

    /// Factors B0 = (gamma tau)^-1 M + K/2 from the current frozen operator.
    fn build_b0(&self, inv_gt: f64, step: usize) -> Result<(Factorization, SparseMatrix, usize)> {
        let b0 = SparseMatrix::linear_combination(&[
            (inv_gt, &self.ops.mass),
            (0.5, &self.frozen_op),
        ]);
        let fact = if self.problem.advection.is_none() {
            factor_spd(&b0).or_else(|_| factor_general(&b0))?
        } else {
            factor_general(&b0)?
        };
        Ok((fact, self.frozen_op.clone(), step))
    }

    /// Advances the state by one step, returning the per-step diagnostics.
    pub fn step(&mut self, state: &mut SaddleState) -> Result<StepDiagnostics> {
        let k = self.params.k;
        assert_eq!(state.v.len(), k, "state has {} directors, scheme expects {k}", state.v.len());
        let ops = Arc::clone(&self.ops);
        let m = &ops.mass;
        let n_dofs = self.space.n_dofs();
        let inv_gt = 1.0 / (self.params.gamma * self.params.tau);
        let tol = self.params.picard_tol;

        let f_load_prev = match self.load_cache.take() {
            Some(l) => l,
            None => self.f_load(&state.u)?,
        };

        let u_new = self.u_step(state, &f_load_prev)?;

        self.refresh_frozen_op(&u_new)?;

        // frozen-shift reference operator: any snapshot of K works (only the
        // contraction rate depends on its staleness), so it is refactored on
        // a fixed cadence rather than every step
        let mut b0 = self.b0_cache.take().filter(|(_, _, built)| {
            self.params.v_solver == VSolver::FrozenShift && state.step < built + B0_REFRESH
        });
        if b0.is_none() && self.params.v_solver == VSolver::FrozenShift && k > 0 {
            b0 = Some(self.build_b0(inv_gt, state.step)?);
        }
        let kop = &self.frozen_op;

        let v_old = std::mem::take(&mut state.v);
        let mv_old: Vec<Vec<f64>> = v_old.iter().map(|v| m.matvec(v)).collect();
        let kv_old: Vec<Vec<f64>> = v_old.iter().map(|v| kop.matvec(v)).collect();

        let mut v_new: Vec<Field> = Vec::with_capacity(k);
        let mut mv_new: Vec<Vec<f64>> = Vec::with_capacity(k);
        let mut picard_iters = Vec::with_capacity(k);
        let mut guard_margins = Vec::with_capacity(k);
        let mut half_step_defect = 0.0f64;

        for i in 0..k {
            let vo = &v_old[i];
            let mut x: Vec<f64> = vo.to_vec();
            let mut mw = vec![0.0; n_dofs];
            let mut kw = vec![0.0; n_dofs];
            let mut iters_total = 0;
            let mut attempt = 0;
            'attempts: loop {
                x.copy_from_slice(vo);
                let mut iters = 0;
                let mut converged = false;
                let mut last_inc = f64::INFINITY;
                let mut prev_inc;
                while iters < self.params.picard_max {
                    iters += 1;
                    // half-step average and its operator images
                    let w: Vec<f64> = x.iter().zip(vo.iter()).map(|(a, b)| 0.5 * (a + b)).collect();
                    m.matvec_into(&w, &mut mw);
                    kop.matvec_into(&w, &mut kw);
                    let s0 = if self.params.orthonormal_terms { dot(&w, &mw) } else { 1.0 };
                    let sigma = dot(&w, &kw);

                    // cross-director couplings, frozen at this iterate
                    let mut cross = vec![0.0; n_dofs];
                    for l in 0..k {
                        if l == i {
                            continue;
                        }
                        let (z, mz) = if l < i {
                            (&v_new[l].0, &mv_new[l])
                        } else {
                            (&v_old[l].0, &mv_old[l])
                        };
                        let c = s0 * dot(z, &kw);
                        crate::linalg::axpy(c, mz, &mut cross);
                    }

                    let x_next = match &b0 {
                        Some((b0f, k_stale, _)) => {
                            // B0 x = (gamma tau)^-1 M v_old + sigma M w
                            //        - s0 K w + K_stale x / 2 + cross
                            let ksx = k_stale.matvec(&x);
                            let mut rhs = cross;
                            for j in 0..n_dofs {
                                rhs[j] += inv_gt * mv_old[i][j] + sigma * mw[j] - s0 * kw[j]
                                    + 0.5 * ksx[j];
                            }
                            b0f.solve(&rhs)
                        }
                        None => {
                            // [ (gamma tau)^-1 M + (s0/2) K - (sigma/2) M ] x =
                            //   [ (gamma tau)^-1 + sigma/2 ] M v_old - (s0/2) K v_old + cross
                            let lhs = SparseMatrix::linear_combination(&[
                                (inv_gt - 0.5 * sigma, m),
                                (0.5 * s0, kop),
                            ]);
                            let mut rhs = cross;
                            for j in 0..n_dofs {
                                rhs[j] +=
                                    (inv_gt + 0.5 * sigma) * mv_old[i][j] - 0.5 * s0 * kv_old[i][j];
                            }
                            factor_general(&lhs)?.solve(&rhs)
                        }
                    };

                    let diff: Vec<f64> = x_next.iter().zip(&x).map(|(a, b)| a - b).collect();
                    prev_inc = last_inc;
                    last_inc = m.bilinear(&diff, &diff).max(0.0).sqrt();
                    x = x_next;
                    if last_inc <= tol {
                        converged = true;
                        break;
                    }
                    // accept stagnation at the roundoff floor just above tol
                    if last_inc <= 100.0 * tol && last_inc >= 0.25 * prev_inc {
                        converged = true;
                        break;
                    }
                }
                iters_total += iters;
                if converged {
                    break 'attempts;
                }
                // a stale reference operator degrades the contraction; give
                // it one fresh factorization before failing the step
                if attempt == 0 && b0.as_ref().is_some_and(|(_, _, built)| *built <= state.step) {
                    b0 = Some(self.build_b0(inv_gt, state.step + 1)?);
                    attempt += 1;
                    continue 'attempts;
                }
                return Err(Error::PicardDiverged {
                    director: i,
                    iterations: iters_total,
                    increment: last_inc,
                });
            }
            picard_iters.push(iters_total);

            // guard margin and half-step identity at the converged average
            let w: Vec<f64> = x.iter().zip(vo.iter()).map(|(a, b)| 0.5 * (a + b)).collect();
            m.matvec_into(&w, &mut mw);
            kop.matvec_into(&w, &mut kw);
            let s_i = 0.5 * dot(&w, &kw);
            guard_margins.push((inv_gt - s_i).abs());
            let ww = dot(&w, &mw);
            let diff: Vec<f64> = x.iter().zip(vo.iter()).map(|(a, b)| a - b).collect();
            let dn2 = m.bilinear(&diff, &diff);
            half_step_defect = half_step_defect.max((ww - (1.0 - 0.25 * dn2)).abs());

            mv_new.push(m.matvec(&x));
            v_new.push(Field(x));
        }

        // monitors
        let mut gram_drift = 0.0f64;
        for i in 0..k {
            for j in i..k {
                let g = dot(&v_new[i], &mv_new[j]);
                let target = if i == j { 1.0 } else { 0.0 };
                gram_drift = gram_drift.max((g - target).abs());
            }
        }
        let mut cross_level = 0.0f64;
        for p in 0..k {
            for q in p + 1..k {
                cross_level = cross_level.max(dot(&v_new[p], &mv_old[q]).abs());
            }
        }
        let grad_u = ops.stiffness.bilinear(&u_new, &u_new).max(0.0).sqrt();
        let grad_v: Vec<f64> = v_new
            .iter()
            .map(|v| ops.stiffness.bilinear(v, v).max(0.0).sqrt())
            .collect();

        let f_load_new = self.f_load(&u_new)?;
        let (_, residual_inf) = self.residual_from_load(&u_new, &f_load_new)?;
        self.load_cache = Some(f_load_new);
        self.b0_cache = b0;

        state.u = u_new;
        state.v = v_new;
        state.step += 1;
        state.time = state.step as f64 * self.params.tau;

        let diag = StepDiagnostics {
            step: state.step,
            time: state.time,
            gram_drift,
            cross_level,
            guard_violation: guard_margins.iter().any(|&g| g < self.params.guard_eps),
            guard_margins,
            picard_iters,
            grad_u,
            grad_v,
            half_step_defect,
            residual_inf,
        };
        if !diag.all_finite() {
            return Err(Error::NonFinite("step diagnostics"));
        }
        Ok(diag)
    }

    /// Runs N = T/tau steps from the given state, collecting diagnostics.
    pub fn run(&mut self, state: SaddleState) -> Result<(SaddleState, RunReport)> {
        self.run_with_stop(state, None)
    }

    /// As [`Stepper::run`], but may stop early once the strong-form residual
    /// falls at or below `stop_residual`.
    pub fn run_with_stop(
        &mut self,
        mut state: SaddleState,
        stop_residual: Option<f64>,
    ) -> Result<(SaddleState, RunReport)> {
        let n_steps = self.params.n_steps()?;
        self.load_cache = None;
        let mut steps = Vec::with_capacity(n_steps.min(1 << 20));
        for _ in 0..n_steps {
            let step_idx = state.step + 1;
            match self.step(&mut state) {
                Ok(d) => {
                    let stop = stop_residual.is_some_and(|s| d.residual_inf <= s);
                    steps.push(d);
                    if stop {
                        break;
                    }
                }
                Err(e) => {
                    return Err(Error::StepFailed { step: step_idx, source: Box::new(e) });
                }
            }
        }
        let (final_residual, final_residual_inf) = match self.load_cache.as_ref() {
            Some(load) => self.residual_from_load(&state.u, load)?,
            None => self.residual_inf(&state.u)?,
        };
        let guard_warnings = steps.iter().filter(|d| d.guard_violation).count();
        Ok((
            state,
            RunReport { steps, final_residual_inf, final_residual, guard_warnings },
        ))
    }
}
