//! Executes configured runs: a single saddle search, the
//! preserving-vs-variant comparison, and landscape sweeps.

use anyhow::{anyhow, bail, Context};

use hisd_core::dynamics::{initialize, RunReport, SaddleState, Stepper};
use hisd_core::fem::{AnalyticField, FemSpace, Field, ProblemSpec};
use hisd_core::landscape::{LandscapeContext, LandscapeGraph};
use hisd_core::spectral::{
    assemble_hessian, default_shift, morse_index, real_part_spectrum, smallest_eigenpairs,
    Spectrum,
};

use crate::config::RunConfig;

pub struct SingleRun {
    pub space: FemSpace,
    pub problem: ProblemSpec,
    pub state: SaddleState,
    pub report: RunReport,
    /// Smallest eigenvalues of the final Hessian (real parts when b != 0).
    pub eigenvalues: Vec<f64>,
    pub spectrum: Option<Spectrum>,
    pub morse_index: Option<usize>,
    pub wall_seconds: f64,
}

/// The smallest eigenpairs with the window grown until the Morse count is
/// certified (zero tolerance 1e-8 scaled by the window's magnitude).
pub fn spectrum_with_index(
    space: &FemSpace,
    problem: &ProblemSpec,
    u: &Field,
    want: usize,
) -> anyhow::Result<(Spectrum, usize)> {
    let h = assemble_hessian(space, problem, u)?;
    let sigma = default_shift(space, problem, u);
    let n = h.matrix.n();
    let mut m = want.clamp(2, n);
    loop {
        let spec = smallest_eigenpairs(&h, m, sigma)?;
        let scale = spec.values().iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let tol = 1e-8 * scale.max(1.0);
        match morse_index(&spec, tol) {
            Ok(mi) if spec.pairs.len() >= want => return Ok((spec, mi.negative)),
            _ if m >= n => bail!("spectrum window exhausted at {m} pairs"),
            _ => m = (2 * m).min(n),
        }
    }
}

/// Index count for the advective case: real parts of the projected spectrum.
pub fn real_parts_with_index(
    space: &FemSpace,
    problem: &ProblemSpec,
    u: &Field,
    want: usize,
) -> anyhow::Result<(Vec<f64>, usize)> {
    let h = assemble_hessian(space, problem, u)?;
    let sigma = default_shift(space, problem, u);
    let n = h.matrix.n();
    let mut m = want.clamp(2, n);
    loop {
        let vals = real_part_spectrum(&h, m, sigma, 2 * m + 20)?;
        let reals: Vec<f64> = vals.iter().map(|(re, _)| *re).collect();
        let scale = reals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let tol = 1e-8 * scale.max(1.0);
        let certified = reals.last().is_some_and(|&last| last > tol);
        if certified && reals.len() >= want.min(n) {
            let neg = reals.iter().filter(|&&v| v < -tol).count();
            return Ok((reals, neg));
        }
        if m >= n {
            bail!("spectrum window exhausted at {m} pairs");
        }
        m = (2 * m).min(n);
    }
}

/// Runs one configured saddle search and computes the final spectrum.
pub fn run_single(config: &RunConfig) -> anyhow::Result<SingleRun> {
    config.validate()?;
    if config.landscape.is_some() {
        bail!("configuration carries a [landscape] block; use the landscape command");
    }
    let t0 = std::time::Instant::now();
    let space = config.build_space()?;
    let problem = config.build_problem();
    let params = config.scheme_params();
    let u0 = config.initial_u();
    let directors = config.initial_directors();
    if directors.len() < params.k {
        bail!("initial data provides {} directors, scheme needs {}", directors.len(), params.k);
    }
    let refs: Vec<&dyn AnalyticField> = directors
        .iter()
        .take(params.k)
        .map(|b| b.as_ref() as &dyn AnalyticField)
        .collect();
    let state0 = initialize(&space, &problem, u0.as_ref(), &refs)?;
    let mut stepper = Stepper::new(&space, &problem, params)?;
    let (state, report) = stepper.run(state0)?;
    drop(stepper);
    let (eigenvalues, spectrum, index) = if config.output.spectrum_count == 0 {
        (Vec::new(), None, None)
    } else if problem.advection.is_none() {
        let (s, i) = spectrum_with_index(&space, &problem, &state.u, config.output.spectrum_count)
            .context("final spectrum")?;
        (s.values(), Some(s), Some(i))
    } else {
        let (vals, i) =
            real_parts_with_index(&space, &problem, &state.u, config.output.spectrum_count)
                .context("final spectrum (real parts)")?;
        (vals, None, Some(i))
    };
    Ok(SingleRun {
        space,
        problem,
        state,
        report,
        eigenvalues,
        spectrum,
        morse_index: index,
        wall_seconds: t0.elapsed().as_secs_f64(),
    })
}

/// Runs the orthonormal scheme and its non-orthonormal variant from the
/// same configuration.
pub fn run_comparison(config: &RunConfig) -> anyhow::Result<(SingleRun, SingleRun)> {
    let mut preserving = config.clone();
    preserving.scheme.orthonormal_terms = true;
    let mut variant = config.clone();
    variant.scheme.orthonormal_terms = false;
    Ok((run_single(&preserving)?, run_single(&variant)?))
}

pub struct LandscapeRun {
    pub space: FemSpace,
    pub problem: ProblemSpec,
    pub graph: LandscapeGraph,
    pub wall_seconds: f64,
}

/// Runs a landscape sweep rooted at the configured initial state.
pub fn run_landscape(config: &RunConfig) -> anyhow::Result<LandscapeRun> {
    config.validate()?;
    let params = config
        .landscape_params()
        .ok_or_else(|| anyhow!("configuration lacks a [landscape] block"))?;
    let t0 = std::time::Instant::now();
    let space = config.build_space()?;
    let problem = config.build_problem();
    let scheme = config.scheme_params();
    let u0 = config.initial_u();
    let root = hisd_core::fem::interpolate(&space, |x| u0.value(x));
    let ctx = LandscapeContext::new(&space, &problem, scheme, params)?;
    let graph = ctx.build(root)?;
    drop(ctx);
    Ok(LandscapeRun { space, problem, graph, wall_seconds: t0.elapsed().as_secs_f64() })
}
