//! The named experiment presets.

use anyhow::bail;

use crate::config::{
    AdvectionSelector, ConvergenceConfig, DiffusionSelector, DirectorSelector,
    DiscretizationConfig, FieldSelector, InitialConfig, LandscapeConfig, NonlinearitySelector,
    OutputConfig, ProblemConfig, ReactionSelector, RunConfig, SchemeConfig, VSolverSelector,
};

pub const PRESET_NAMES: &[&str] = &[
    "example1a",
    "example1b",
    "example2",
    "npo-comparison",
    "convergence-time",
    "convergence-space",
];

fn output(dir: &str) -> OutputConfig {
    OutputConfig {
        directory: format!("runs/{dir}"),
        cadence: 1,
        spectrum_count: 6,
        write_fields: true,
    }
}

fn scheme(k: usize) -> SchemeConfig {
    SchemeConfig {
        k,
        beta: 1.0,
        gamma: 1.0,
        picard_tol: 1e-12,
        picard_max: 50,
        guard_eps: 1e-6,
        orthonormal_terms: true,
        v_solver: VSolverSelector::FactorEach,
    }
}

/// One-dimensional quartic model on (0, pi): a = 1, f(u) = u^4 - 10 u^2.
fn quartic_problem_1d() -> ProblemConfig {
    ProblemConfig {
        dim: 1,
        extents: vec![std::f64::consts::PI],
        diffusion: DiffusionSelector::Constant { value: 1.0 },
        advection: AdvectionSelector::None,
        reaction: ReactionSelector::None,
        nonlinearity: NonlinearitySelector::Polynomial {
            coefficients: vec![0.0, 0.0, -10.0, 0.0, 1.0],
        },
    }
}

pub fn example1a() -> RunConfig {
    RunConfig {
        problem: quartic_problem_1d(),
        discretization: DiscretizationConfig { cells: vec![100], tau: 1e-3, final_time: 5.0 },
        scheme: scheme(3),
        initial: InitialConfig {
            u: FieldSelector::Sin { amplitude: 1.0, frequency: 4.0 },
            v: DirectorSelector::SineModes { count: 3 },
        },
        output: output("example1a"),
        landscape: None,
        convergence: None,
    }
}

pub fn example1b() -> RunConfig {
    RunConfig {
        problem: ProblemConfig {
            dim: 1,
            extents: vec![std::f64::consts::PI],
            diffusion: DiffusionSelector::Constant { value: 0.02 },
            advection: AdvectionSelector::Sin { amplitude: 0.02, frequency: 2.0 },
            reaction: ReactionSelector::Constant { value: 0.5 },
            nonlinearity: NonlinearitySelector::Polynomial { coefficients: vec![0.0, 0.0, -1.0] },
        },
        discretization: DiscretizationConfig { cells: vec![100], tau: 1e-3, final_time: 5.0 },
        scheme: scheme(3),
        initial: InitialConfig {
            u: FieldSelector::XSin { amplitude: 0.1, frequency: 1.0 },
            v: DirectorSelector::SineModes { count: 3 },
        },
        output: output("example1b"),
        landscape: None,
        convergence: None,
    }
}

/// Phase-field model on the unit square; the sweep is rooted at the zero
/// state, whose index is eight at this diffusion strength.
pub fn example2() -> RunConfig {
    RunConfig {
        problem: ProblemConfig {
            dim: 2,
            extents: vec![1.0, 1.0],
            diffusion: DiffusionSelector::Constant { value: 0.006 },
            advection: AdvectionSelector::None,
            reaction: ReactionSelector::None,
            nonlinearity: NonlinearitySelector::Polynomial {
                coefficients: vec![0.0, 1.0, 0.0, -1.0],
            },
        },
        // the slowest Hessian gap of this model is ~0.02, so child runs need
        // a horizon far beyond t = 5 to reach the residual threshold
        discretization: DiscretizationConfig { cells: vec![64, 64], tau: 1e-3, final_time: 100.0 },
        scheme: SchemeConfig {
            v_solver: VSolverSelector::FrozenShift,
            ..scheme(8)
        },
        initial: InitialConfig {
            u: FieldSelector::Zero,
            v: DirectorSelector::SineModes { count: 8 },
        },
        output: output("example2"),
        landscape: Some(LandscapeConfig {
            max_runs: 300,
            epsilon_rel: 0.4,
            epsilon_abs: 0.4,
            dedup_tol: 1e-2,
            residual_threshold: 1e-3,
            upward_targets: vec![1],
            seed: 1,
        }),
        convergence: None,
    }
}

pub fn npo_comparison() -> RunConfig {
    let mut cfg = example1a();
    cfg.initial.u = FieldSelector::Sin { amplitude: 1.0, frequency: 1.0 };
    // the transient of this trajectory has stretches where the fixed-point
    // contraction is weak; give the iteration more headroom
    cfg.scheme.picard_max = 400;
    cfg.output = output("npo-comparison");
    cfg
}

pub fn convergence_time() -> RunConfig {
    let mut cfg = example1a();
    cfg.discretization = DiscretizationConfig { cells: vec![1024], tau: 1e-4, final_time: 5.0 };
    cfg.output = output("convergence-time");
    cfg.output.write_fields = false;
    cfg.output.spectrum_count = 0;
    cfg.convergence = Some(ConvergenceConfig {
        tau_list: vec![1.6e-2, 8e-3, 4e-3, 2e-3],
        cells_list: vec![],
        reference_tau: 1e-4,
        reference_cells: 1024,
    });
    cfg
}

pub fn convergence_space() -> RunConfig {
    let mut cfg = convergence_time();
    cfg.output = output("convergence-space");
    cfg.output.write_fields = false;
    cfg.output.spectrum_count = 0;
    cfg.convergence = Some(ConvergenceConfig {
        tau_list: vec![],
        cells_list: vec![64, 128, 256, 512],
        reference_tau: 1e-4,
        reference_cells: 1024,
    });
    cfg
}

pub fn preset(name: &str) -> anyhow::Result<RunConfig> {
    Ok(match name {
        "example1a" => example1a(),
        "example1b" => example1b(),
        "example2" => example2(),
        "npo-comparison" => npo_comparison(),
        "convergence-time" => convergence_time(),
        "convergence-space" => convergence_space(),
        other => bail!("unknown preset '{other}' (available: {})", PRESET_NAMES.join(", ")),
    })
}
