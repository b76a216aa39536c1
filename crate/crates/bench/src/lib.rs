//! Shared fixtures for the benchmark targets.

use std::f64::consts::PI;

use hisd_core::dynamics::{initialize, SaddleState, SchemeParams, Stepper, VSolver};
use hisd_core::fem::{analytic, build_mesh, AnalyticField, FemSpace, ProblemSpec};

pub fn interval_space(m: usize) -> FemSpace {
    FemSpace::new(build_mesh(1, &[PI], &[m]).unwrap())
}

pub fn square_space(m: usize) -> FemSpace {
    FemSpace::new(build_mesh(2, &[1.0, 1.0], &[m, m]).unwrap())
}

pub fn quartic_problem() -> ProblemSpec {
    ProblemSpec::elliptic(
        1.0,
        |u| u.powi(4) - 10.0 * u * u,
        |u| 4.0 * u.powi(3) - 20.0 * u,
    )
}

pub fn phase_field_problem() -> ProblemSpec {
    ProblemSpec::elliptic(0.006, |u| u - u.powi(3), |u| 1.0 - 3.0 * u * u)
}

pub fn sin_mode(amp: f64, freq: f64) -> impl AnalyticField {
    analytic(
        move |x: [f64; 2]| amp * (freq * x[0]).sin(),
        move |x: [f64; 2]| [amp * freq * (freq * x[0]).cos(), 0.0],
    )
}

/// A ready-to-step 1D configuration matching the quartic benchmark model.
pub fn prepared_1d(m: usize, k: usize) -> (FemSpace, ProblemSpec, SchemeParams) {
    let space = interval_space(m);
    let problem = quartic_problem();
    let params = SchemeParams::new(k, 1e-3, 5.0);
    (space, problem, params)
}

pub fn initial_state<'a>(
    space: &'a FemSpace,
    problem: &'a ProblemSpec,
    params: SchemeParams,
    u0_freq: f64,
) -> (Stepper<'a>, SaddleState) {
    let amp = (2.0 / PI).sqrt();
    let u0 = sin_mode(1.0, u0_freq);
    let modes: Vec<_> = (1..=params.k).map(|i| sin_mode(amp, i as f64)).collect();
    let refs: Vec<&dyn AnalyticField> = modes.iter().map(|m| m as &dyn AnalyticField).collect();
    let state = initialize(space, problem, &u0, &refs).unwrap();
    (Stepper::new(space, problem, params).unwrap(), state)
}

/// A 2D phase-field stepper with the frozen-shift director solver.
pub fn prepared_2d(m: usize, k: usize) -> (FemSpace, ProblemSpec, SchemeParams) {
    let space = square_space(m);
    let problem = phase_field_problem();
    let mut params = SchemeParams::new(k, 1e-2, 40.0);
    params.v_solver = VSolver::FrozenShift;
    (space, problem, params)
}
