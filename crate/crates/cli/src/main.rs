use std::path::PathBuf;

use clap::{Parser, Subcommand};

use hisd_cli::{config::RunConfig, convergence, driver, output};

#[derive(Parser)]
#[command(name = "hisd", about = "Index-k saddle search for semilinear PDEs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single saddle search from a configuration file
    Run { config: PathBuf },
    /// Run a named preset experiment
    Preset {
        name: String,
        /// Output directory override
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the convergence study described by the configuration
    Converge { config: PathBuf },
    /// Run a landscape sweep described by the configuration
    Landscape { config: PathBuf },
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run { config } => {
            let cfg = RunConfig::load(&config)?;
            let run = driver::run_single(&cfg)?;
            let dir = PathBuf::from(&cfg.output.directory);
            output::write_run(&dir, &cfg, &run)?;
            println!(
                "final residual {:.6e}, Morse index {:?}, outputs in {}",
                run.report.final_residual_inf,
                run.morse_index,
                dir.display()
            );
        }
        Command::Preset { name, out } => {
            hisd_cli::execute_preset(&name, out.as_deref())?;
        }
        Command::Converge { config } => {
            let cfg = RunConfig::load(&config)?;
            let report = convergence::convergence_study(&cfg)?;
            let dir = PathBuf::from(&cfg.output.directory);
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
        }
        Command::Landscape { config } => {
            let cfg = RunConfig::load(&config)?;
            let run = driver::run_landscape(&cfg)?;
            let dir = PathBuf::from(&cfg.output.directory);
            output::write_landscape(&dir, &cfg, &run)?;
            println!(
                "{} solution classes in {} runs, outputs in {}",
                run.graph.nodes.len(),
                run.graph.runs_used,
                dir.display()
            );
        }
    }
    Ok(())
}
