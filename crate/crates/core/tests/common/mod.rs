//! Shared fixtures for the integration tests.

use std::f64::consts::PI;

use hisd_core::fem::{analytic, build_mesh, AnalyticField, FemSpace, ProblemSpec};

pub fn interval_space(m: usize) -> FemSpace {
    FemSpace::new(build_mesh(1, &[PI], &[m]).unwrap())
}

pub fn square_space(l: f64, m: usize) -> FemSpace {
    FemSpace::new(build_mesh(2, &[l, l], &[m, m]).unwrap())
}

/// amp * sin(freq * x) with its derivative.
pub fn sin_mode(amp: f64, freq: f64) -> impl AnalyticField {
    analytic(
        move |x: [f64; 2]| amp * (freq * x[0]).sin(),
        move |x: [f64; 2]| [amp * freq * (freq * x[0]).cos(), 0.0],
    )
}

/// The L2-normalized director family sqrt(2/pi) sin(i x).
pub fn director_modes(k: usize) -> Vec<impl AnalyticField> {
    let amp = (2.0 / PI).sqrt();
    (1..=k).map(|i| sin_mode(amp, i as f64)).collect()
}

/// The one-dimensional benchmark nonlinearity f(u) = u^4 - 10 u^2.
pub fn quartic_problem() -> ProblemSpec {
    ProblemSpec::elliptic(
        1.0,
        |u| u.powi(4) - 10.0 * u * u,
        |u| 4.0 * u.powi(3) - 20.0 * u,
    )
}

/// A gentle cubic model whose zero state has index 1 on (0, pi):
/// f(u) = 2u - u^3, so the Hessian at 0 is -Lap - 2.
pub fn cubic_problem() -> ProblemSpec {
    ProblemSpec::elliptic(1.0, |u| 2.0 * u - u.powi(3), |u| 2.0 - 3.0 * u * u)
}

pub fn assert_close(got: f64, want: f64, tol: f64, what: &str) {
    assert!(
        (got - want).abs() <= tol,
        "{what}: got {got:.6e}, want {want:.6e} (tol {tol:.1e})"
    );
}
