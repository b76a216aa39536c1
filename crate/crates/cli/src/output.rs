//! Machine-readable outputs: field tables, the diagnostics CSV, the
//! spectrum CSV, a summary JSON echoing the configuration, and the
//! landscape graph files. All floating-point values are printed with 17
//! significant digits; wall time goes to a separate timing file so the
//! CSV/JSON outputs stay byte-reproducible.

use std::fs;
use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use hisd_core::dynamics::RunReport;
use hisd_core::fem::{FemSpace, Field};
use hisd_core::landscape::{graph_to_dot, graph_to_json};

use crate::config::RunConfig;
use crate::convergence::ConvergenceReport;
use crate::driver::{LandscapeRun, SingleRun};

/// 17 significant digits, reproducible across runs.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: RunConfig,
    pub n_steps: usize,
    pub final_residual_inf: f64,
    pub morse_index: Option<usize>,
    pub eigenvalues: Vec<f64>,
    pub guard_warnings: usize,
    pub max_gram_drift: f64,
    pub max_cross_level: f64,
    pub max_half_step_defect: f64,
}

pub fn write_field(path: &Path, space: &FemSpace, field: &Field) -> anyhow::Result<()> {
    let mesh = space.mesh();
    let mut s = String::new();
    s.push_str(&format!("# dim {}\n", mesh.dim()));
    s.push_str(&format!(
        "# extents {}\n",
        mesh.extents().iter().map(|e| fmt_f64(*e)).collect::<Vec<_>>().join(" ")
    ));
    s.push_str(&format!(
        "# cells {}\n",
        mesh.cells_per_axis().iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")
    ));
    s.push_str(if mesh.dim() == 1 { "# x value\n" } else { "# x y value\n" });
    for node in 0..mesh.n_nodes() {
        let p = mesh.node(node);
        let v = space.dof_of_node(node).map_or(0.0, |d| field[d]);
        if mesh.dim() == 1 {
            s.push_str(&format!("{} {}\n", fmt_f64(p[0]), fmt_f64(v)));
        } else {
            s.push_str(&format!("{} {} {}\n", fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(v)));
        }
    }
    fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

pub fn write_diagnostics_csv(path: &Path, report: &RunReport, cadence: usize) -> anyhow::Result<()> {
    let mut s = String::from(
        "step,time,gram_drift,cross_ortho,guard_min,picard_iters,grad_norm_sum,residual_inf\n",
    );
    for d in &report.steps {
        if cadence > 1 && d.step % cadence != 0 {
            continue;
        }
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            d.step,
            fmt_f64(d.time),
            fmt_f64(d.gram_drift),
            fmt_f64(d.cross_level),
            fmt_f64(d.min_guard_margin()),
            d.total_picard(),
            fmt_f64(d.grad_norm_sum()),
            fmt_f64(d.residual_inf),
        ));
    }
    fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

pub fn write_spectrum_csv(path: &Path, values: &[f64]) -> anyhow::Result<()> {
    let mut s = String::from("rank,eigenvalue\n");
    for (i, v) in values.iter().enumerate() {
        s.push_str(&format!("{},{}\n", i + 1, fmt_f64(*v)));
    }
    fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

/// Writes the complete output set for a single run.
pub fn write_run(dir: &Path, config: &RunConfig, run: &SingleRun) -> anyhow::Result<()> {
    fs::create_dir_all(dir)?;
    if config.output.write_fields {
        write_field(&dir.join("u.txt"), &run.space, &run.state.u)?;
        for (i, v) in run.state.v.iter().enumerate() {
            write_field(&dir.join(format!("v{}.txt", i + 1)), &run.space, v)?;
        }
    }
    write_diagnostics_csv(&dir.join("diagnostics.csv"), &run.report, config.output.cadence)?;
    if !run.eigenvalues.is_empty() {
        write_spectrum_csv(&dir.join("spectrum.csv"), &run.eigenvalues)?;
    }
    let summary = RunSummary {
        config: config.clone(),
        n_steps: run.report.steps.len(),
        final_residual_inf: run.report.final_residual_inf,
        morse_index: run.morse_index,
        eigenvalues: run.eigenvalues.clone(),
        guard_warnings: run.report.guard_warnings,
        max_gram_drift: run.report.max_gram_drift(),
        max_cross_level: run.report.max_cross_level(),
        max_half_step_defect: run.report.max_half_step_defect(),
    };
    let json = serde_json::to_string_pretty(&summary)?;
    fs::write(dir.join("summary.json"), json + "\n")?;
    fs::write(dir.join("timing.txt"), format!("wall_seconds {:.3}\n", run.wall_seconds))?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LandscapeSummary {
    pub classes: usize,
    pub by_index: Vec<(usize, usize)>,
    pub runs_used: usize,
    pub discarded: usize,
    pub budget_exhausted: bool,
}

pub fn write_landscape(dir: &Path, config: &RunConfig, run: &LandscapeRun) -> anyhow::Result<()> {
    fs::create_dir_all(dir.join("fields"))?;
    for node in &run.graph.nodes {
        write_field(
            &dir.join(format!("fields/sol_{:03}.txt", node.id)),
            &run.space,
            &node.u,
        )?;
    }
    let json = graph_to_json(&run.graph, |id| format!("fields/sol_{id:03}.txt"));
    fs::write(dir.join("graph.json"), json)?;
    fs::write(dir.join("graph.dot"), graph_to_dot(&run.graph))?;
    let summary = LandscapeSummary {
        classes: run.graph.nodes.len(),
        by_index: run
            .graph
            .by_index()
            .into_iter()
            .map(|(k, ids)| (k, ids.len()))
            .collect(),
        runs_used: run.graph.runs_used,
        discarded: run.graph.discarded,
        budget_exhausted: run.graph.budget_exhausted,
    };
    fs::write(
        dir.join("landscape_summary.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    fs::write(dir.join("config.toml"), config.to_toml())?;
    fs::write(dir.join("timing.txt"), format!("wall_seconds {:.3}\n", run.wall_seconds))?;
    Ok(())
}

pub fn write_convergence(dir: &Path, config: &RunConfig, report: &ConvergenceReport) -> anyhow::Result<()> {
    fs::create_dir_all(dir)?;
    let mut csv = String::from("sweep,label,tau,cells,err_u,rate_u,err_v,rate_v,failure\n");
    let mut push = |sweep: &str, rows: &[crate::convergence::LevelOutcome]| {
        for r in rows {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                sweep,
                r.label,
                fmt_f64(r.tau),
                r.cells,
                fmt_f64(r.err_u),
                r.rate_u.map(fmt_f64).unwrap_or_default(),
                r.err_v.iter().map(|e| fmt_f64(*e)).collect::<Vec<_>>().join(";"),
                r.rate_v
                    .iter()
                    .map(|x| x.map(fmt_f64).unwrap_or_default())
                    .collect::<Vec<_>>()
                    .join(";"),
                r.failure.clone().unwrap_or_default(),
            ));
        }
    };
    push("temporal", &report.temporal);
    push("spatial", &report.spatial);
    fs::write(dir.join("convergence.csv"), csv)?;
    fs::write(dir.join("convergence.json"), serde_json::to_string_pretty(report)? + "\n")?;
    fs::write(dir.join("table.txt"), report.table())?;
    fs::write(dir.join("config.toml"), config.to_toml())?;
    Ok(())
}
