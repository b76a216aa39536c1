//! Configuration, presets, the convergence-study harness, and file outputs
//! around the saddle-dynamics solver.

pub mod config;
pub mod convergence;
pub mod driver;
pub mod output;
pub mod presets;

use std::path::Path;

pub use config::RunConfig;
pub use convergence::{convergence_study, ConvergenceReport};
pub use driver::{run_comparison, run_landscape, run_single, SingleRun};

/// Executes a named preset, writing its outputs under the given directory
/// (or the preset's default).
pub fn execute_preset(name: &str, out: Option<&Path>) -> anyhow::Result<()> {
    let mut cfg = presets::preset(name)?;
    if let Some(dir) = out {
        cfg.output.directory = dir.display().to_string();
    }
    let dir = std::path::PathBuf::from(&cfg.output.directory);
    if cfg.convergence.is_some() {
        let report = convergence_study(&cfg)?;
        output::write_convergence(&dir, &cfg, &report)?;
        print!("{}", report.table());
        let failed = report
            .temporal
            .iter()
            .chain(&report.spatial)
            .any(|l| l.failure.is_some());
        if failed {
            anyhow::bail!("one or more levels failed; see the table above");
        }
        return Ok(());
    }
    if cfg.landscape.is_some() {
        let run = run_landscape(&cfg)?;
        output::write_landscape(&dir, &cfg, &run)?;
        println!(
            "landscape: {} solution classes in {} runs ({} discarded)",
            run.graph.nodes.len(),
            run.graph.runs_used,
            run.graph.discarded
        );
        return Ok(());
    }
    if name == "npo-comparison" {
        let (preserving, variant) = run_comparison(&cfg)?;
        let mut on_cfg = cfg.clone();
        on_cfg.scheme.orthonormal_terms = true;
        output::write_run(&dir.join("preserving"), &on_cfg, &preserving)?;
        let mut off_cfg = cfg.clone();
        off_cfg.scheme.orthonormal_terms = false;
        output::write_run(&dir.join("variant"), &off_cfg, &variant)?;
        println!(
            "preserving: residual {:.3e}, index {:?}; variant: residual {:.3e}, index {:?}",
            preserving.report.final_residual_inf,
            preserving.morse_index,
            variant.report.final_residual_inf,
            variant.morse_index
        );
        return Ok(());
    }
    let run = run_single(&cfg)?;
    output::write_run(&dir, &cfg, &run)?;
    println!(
        "final residual {:.6e}, Morse index {:?}",
        run.report.final_residual_inf, run.morse_index
    );
    Ok(())
}
