//! Self-referential convergence studies: one reference run at the finest
//! resolution, coarser levels advanced in lockstep, errors measured as the
//! max over the coarse time levels of the L2 difference on the reference
//! mesh.

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use hisd_core::dynamics::{initialize, SaddleState, Stepper};
use hisd_core::fem::{build_mesh, l2_norm, AnalyticField, FemSpace, Field};

use crate::config::RunConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelOutcome {
    pub label: String,
    pub tau: f64,
    pub cells: usize,
    pub err_u: f64,
    pub err_v: Vec<f64>,
    pub rate_u: Option<f64>,
    pub rate_v: Vec<Option<f64>>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct ConvergenceReport {
    pub temporal: Vec<LevelOutcome>,
    pub spatial: Vec<LevelOutcome>,
    pub temporal_slope_u: Option<f64>,
    pub temporal_slope_v: Vec<Option<f64>>,
    pub spatial_slope_u: Option<f64>,
    pub spatial_slope_v: Vec<Option<f64>>,
    pub reference_tau: f64,
    pub reference_cells: usize,
}

/// Values of a coarse interval P1 field at the nodes of a nested finer mesh.
fn prolong(coarse: &FemSpace, fine: &FemSpace, f: &Field) -> Field {
    let hc = coarse.mesh().h()[0];
    let mc = coarse.mesh().cells_per_axis()[0];
    let mut out = Field::zeros(fine.n_dofs());
    for d in 0..fine.n_dofs() {
        let x = fine.dof_coords(d)[0];
        let cell = ((x / hc).floor() as usize).min(mc - 1);
        let t = (x - cell as f64 * hc) / hc;
        let left = if cell == 0 { 0.0 } else { f[cell - 1] };
        let right = if cell + 1 >= mc { 0.0 } else { f[cell] };
        out[d] = (1.0 - t) * left + t * right;
    }
    out
}

/// log-log least-squares slope of err against the resolution parameter.
fn fit_slope(res: &[f64], err: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = res
        .iter()
        .zip(err)
        .filter(|(_, e)| e.is_finite() && **e > 0.0)
        .map(|(r, e)| (r.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    (denom.abs() > 1e-300).then(|| (n * sxy - sx * sy) / denom)
}

#[derive(Clone, Copy)]
struct LevelMeta {
    temporal: bool,
    stride: usize,
    tau: f64,
    cells: usize,
    steps: usize,
    /// index into the spatial space list, unused for temporal levels
    space_idx: usize,
}

struct Accum {
    steps_left: usize,
    err_u: f64,
    err_v: Vec<f64>,
    failure: Option<String>,
}

pub fn convergence_study(config: &RunConfig) -> anyhow::Result<ConvergenceReport> {
    let conv = config
        .convergence
        .as_ref()
        .context("configuration lacks a [convergence] block")?;
    if config.problem.dim != 1 {
        bail!("convergence studies are implemented for one-dimensional problems");
    }
    let t_final = config.discretization.final_time;
    let tau_ref = conv.reference_tau;
    let m_ref = conv.reference_cells;
    let k = config.scheme.k;
    let problem = config.build_problem();
    let u0 = config.initial_u();
    let directors = config.initial_directors();

    let make_space = |cells: usize| -> anyhow::Result<FemSpace> {
        Ok(FemSpace::new(build_mesh(1, &config.problem.extents, &[cells])?))
    };
    let ref_space = make_space(m_ref)?;
    let n_ref_steps = (t_final / tau_ref).round() as usize;
    if ((t_final / tau_ref) - n_ref_steps as f64).abs() > 1e-8 * n_ref_steps as f64 {
        bail!("T / reference_tau must be an integer");
    }

    let init_on = |space: &FemSpace| -> anyhow::Result<SaddleState> {
        let refs: Vec<&dyn AnalyticField> = directors
            .iter()
            .take(k)
            .map(|b| b.as_ref() as &dyn AnalyticField)
            .collect();
        Ok(initialize(space, &problem, u0.as_ref(), &refs)?)
    };

    let mut metas: Vec<LevelMeta> = Vec::new();
    let mut spatial_spaces: Vec<FemSpace> = Vec::new();
    for &tau in &conv.tau_list {
        let ratio = tau / tau_ref;
        let stride = ratio.round() as usize;
        if stride == 0 || (ratio - stride as f64).abs() > 1e-8 * ratio {
            bail!("tau {tau} is not an integer multiple of the reference tau {tau_ref}");
        }
        let steps = (t_final / tau + 1e-9).floor() as usize;
        metas.push(LevelMeta { temporal: true, stride, tau, cells: m_ref, steps, space_idx: 0 });
    }
    for &cells in &conv.cells_list {
        if m_ref % cells != 0 {
            bail!("mesh with {cells} cells is not nested in the reference mesh ({m_ref})");
        }
        metas.push(LevelMeta {
            temporal: false,
            stride: 1,
            tau: tau_ref,
            cells,
            steps: n_ref_steps,
            space_idx: spatial_spaces.len(),
        });
        spatial_spaces.push(make_space(cells)?);
    }

    let mut ref_state = init_on(&ref_space)?;
    let mut ref_params = config.scheme_params();
    ref_params.tau = tau_ref;
    ref_params.t_final = t_final;
    let mut ref_stepper = Stepper::new(&ref_space, &problem, ref_params)?;

    let mut states: Vec<SaddleState> = Vec::new();
    let mut steppers: Vec<Stepper<'_>> = Vec::new();
    let mut accums: Vec<Accum> = Vec::new();
    for meta in &metas {
        let sp = if meta.temporal { &ref_space } else { &spatial_spaces[meta.space_idx] };
        states.push(init_on(sp)?);
        let mut p = config.scheme_params();
        p.tau = meta.tau;
        p.t_final = meta.steps as f64 * meta.tau;
        steppers.push(Stepper::new(sp, &problem, p)?);
        accums.push(Accum {
            steps_left: meta.steps,
            err_u: 0.0,
            err_v: vec![0.0; k],
            failure: None,
        });
    }

    for n in 1..=n_ref_steps {
        ref_stepper
            .step(&mut ref_state)
            .map_err(|e| anyhow::anyhow!("reference run failed at step {n}: {e}"))?;
        for (li, meta) in metas.iter().enumerate() {
            let acc = &mut accums[li];
            if acc.failure.is_some() || acc.steps_left == 0 || n % meta.stride != 0 {
                continue;
            }
            let state = &mut states[li];
            if let Err(e) = steppers[li].step(state) {
                acc.failure = Some(format!("failed at t = {:.4}: {e}", state.time + meta.tau));
                acc.err_u = f64::NAN;
                continue;
            }
            acc.steps_left -= 1;
            if meta.temporal {
                let mut d = state.u.clone();
                d.axpy(-1.0, &ref_state.u);
                acc.err_u = acc.err_u.max(l2_norm(&ref_space, &d));
                for i in 0..k {
                    let mut dv = state.v[i].clone();
                    dv.axpy(-1.0, &ref_state.v[i]);
                    acc.err_v[i] = acc.err_v[i].max(l2_norm(&ref_space, &dv));
                }
            } else {
                let space = &spatial_spaces[meta.space_idx];
                let mut d = prolong(space, &ref_space, &state.u);
                d.axpy(-1.0, &ref_state.u);
                acc.err_u = acc.err_u.max(l2_norm(&ref_space, &d));
                for i in 0..k {
                    let mut dv = prolong(space, &ref_space, &state.v[i]);
                    dv.axpy(-1.0, &ref_state.v[i]);
                    acc.err_v[i] = acc.err_v[i].max(l2_norm(&ref_space, &dv));
                }
            }
        }
    }
    drop(steppers);

    let mut report = ConvergenceReport {
        reference_tau: tau_ref,
        reference_cells: m_ref,
        ..Default::default()
    };
    let outcomes: Vec<(LevelMeta, Accum)> = metas.into_iter().zip(accums).collect();
    let build_sweep = |temporal: bool| -> Vec<LevelOutcome> {
        let rows: Vec<&(LevelMeta, Accum)> =
            outcomes.iter().filter(|(m, _)| m.temporal == temporal).collect();
        let mut rows_out: Vec<LevelOutcome> = Vec::new();
        for (i, (meta, acc)) in rows.iter().enumerate() {
            let (rate_u, rate_v) = if i == 0 || acc.failure.is_some() || rows[i - 1].1.failure.is_some() {
                (None, vec![None; k])
            } else {
                let (pm, pa) = rows[i - 1];
                let fac = if temporal {
                    (pm.tau / meta.tau).ln()
                } else {
                    (meta.cells as f64 / pm.cells as f64).ln()
                };
                (
                    Some((pa.err_u / acc.err_u).ln() / fac),
                    (0..k).map(|j| Some((pa.err_v[j] / acc.err_v[j]).ln() / fac)).collect(),
                )
            };
            let label = if temporal {
                format!("tau {:.3e}", meta.tau)
            } else {
                format!("cells {}", meta.cells)
            };
            rows_out.push(LevelOutcome {
                label,
                tau: meta.tau,
                cells: meta.cells,
                err_u: acc.err_u,
                err_v: acc.err_v.clone(),
                rate_u,
                rate_v,
                failure: acc.failure.clone(),
            });
        }
        rows_out
    };
    report.temporal = build_sweep(true);
    report.spatial = build_sweep(false);

    let t_res: Vec<f64> = report.temporal.iter().map(|l| l.tau).collect();
    let t_err: Vec<f64> = report.temporal.iter().map(|l| l.err_u).collect();
    report.temporal_slope_u = fit_slope(&t_res, &t_err);
    report.temporal_slope_v = (0..k)
        .map(|i| {
            let e: Vec<f64> = report.temporal.iter().map(|l| l.err_v[i]).collect();
            fit_slope(&t_res, &e)
        })
        .collect();
    let s_res: Vec<f64> = report.spatial.iter().map(|l| 1.0 / l.cells as f64).collect();
    let s_err: Vec<f64> = report.spatial.iter().map(|l| l.err_u).collect();
    report.spatial_slope_u = fit_slope(&s_res, &s_err);
    report.spatial_slope_v = (0..k)
        .map(|i| {
            let e: Vec<f64> = report.spatial.iter().map(|l| l.err_v[i]).collect();
            fit_slope(&s_res, &e)
        })
        .collect();
    Ok(report)
}

impl ConvergenceReport {
    pub fn table(&self) -> String {
        let mut s = String::new();
        let block = |rows: &[LevelOutcome], head: &str, out: &mut String| {
            if rows.is_empty() {
                return;
            }
            out.push_str(head);
            out.push('\n');
            for r in rows {
                if let Some(f) = &r.failure {
                    out.push_str(&format!("{:>14}  {}\n", r.label, f));
                    continue;
                }
                out.push_str(&format!(
                    "{:>14}  Err(u) {:.3e}  rate {}",
                    r.label,
                    r.err_u,
                    r.rate_u.map_or("   --".into(), |x| format!("{x:5.2}"))
                ));
                for (i, e) in r.err_v.iter().enumerate() {
                    out.push_str(&format!(
                        "  Err(v{}) {:.3e} rate {}",
                        i + 1,
                        e,
                        r.rate_v[i].map_or("   --".into(), |x| format!("{x:5.2}"))
                    ));
                }
                out.push('\n');
            }
        };
        block(&self.temporal, "temporal sweep", &mut s);
        if let Some(sl) = self.temporal_slope_u {
            s.push_str(&format!("fitted temporal slope Err(u): {sl:.3}\n"));
        }
        block(&self.spatial, "spatial sweep", &mut s);
        if let Some(sl) = self.spatial_slope_u {
            s.push_str(&format!("fitted spatial slope Err(u): {sl:.3}\n"));
        }
        s
    }
}
