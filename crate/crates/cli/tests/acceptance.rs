//! The acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line with the measured quantities. Criteria that a faithful
//! implementation cannot attain (see notes in the repository history) still
//! run and report honestly.

use std::sync::OnceLock;

use hisd_cli::config::{ConvergenceConfig, RunConfig};
use hisd_cli::driver::spectrum_with_index;
use hisd_cli::{convergence_study, presets, run_comparison, run_landscape, run_single};
use hisd_cli::{ConvergenceReport, SingleRun};

use hisd_core::dynamics::{initialize, SchemeParams, Stepper};
use hisd_core::fem::{
    assemble_nonlinear_load, assemble_stiffness, assemble_weighted_mass, build_mesh, l2_norm,
    FemSpace, Field, ProblemSpec,
};
use hisd_core::linalg::dense::DenseMatrix;
use hisd_core::linalg::{factor_spd, woodbury_solve, SparseMatrix};
use hisd_core::spectral::{smallest_eigenpairs, HessianOperator};

fn verdict(n: usize, pass: bool, what: &str, detail: &str) -> bool {
    println!(
        "ACCEPTANCE {n:2} {}: {what} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}

static EXAMPLE1A: OnceLock<Result<SingleRun, String>> = OnceLock::new();

fn example1a_run() -> &'static Result<SingleRun, String> {
    EXAMPLE1A.get_or_init(|| {
        run_single(&presets::preset("example1a").unwrap()).map_err(|e| e.to_string())
    })
}

static CONVERGENCE: OnceLock<Result<ConvergenceReport, String>> = OnceLock::new();

/// One shared sweep carrying both the temporal and the spatial levels, so
/// the fine reference trajectory is computed once.
fn convergence_report() -> &'static Result<ConvergenceReport, String> {
    CONVERGENCE.get_or_init(|| {
        let mut cfg = presets::preset("convergence-time").unwrap();
        cfg.convergence = Some(ConvergenceConfig {
            tau_list: vec![1.6e-2, 8e-3, 4e-3, 2e-3],
            cells_list: vec![64, 128, 256, 512],
            reference_tau: 1e-4,
            reference_cells: 1024,
        });
        convergence_study(&cfg).map_err(|e| e.to_string())
    })
}

#[test]
fn criterion_01_orthonormality_preservation() {
    let pass = match example1a_run() {
        Ok(run) => {
            let drift = run.report.max_gram_drift();
            verdict(
                1,
                drift <= 1e-8,
                "Gram drift <= 1e-8 over the example1a run",
                &format!("max drift {drift:.3e}"),
            )
        }
        Err(e) => verdict(1, false, "example1a run completes", e),
    };
    assert!(pass, "see the printed verdict");
}

#[test]
fn criterion_02_cross_level_orthogonality() {
    let pass = match example1a_run() {
        Ok(run) => {
            let cross = run.report.max_cross_level();
            verdict(
                2,
                cross <= 1e-8,
                "cross-level orthogonality <= 1e-8 on example1a",
                &format!("max |(v_p^n, v_q^(n-1))| = {cross:.3e}"),
            )
        }
        Err(e) => verdict(2, false, "example1a run completes", e),
    };
    assert!(pass, "see the printed verdict");
}

#[test]
fn criterion_03_half_step_identity() {
    let pass = match example1a_run() {
        Ok(run) => {
            let defect = run.report.max_half_step_defect();
            verdict(
                3,
                defect <= 1e-12,
                "half-step identity defect <= 1e-12 on example1a",
                &format!("max defect {defect:.3e}"),
            )
        }
        Err(e) => verdict(3, false, "example1a run completes", e),
    };
    assert!(pass, "see the printed verdict");
}

#[test]
fn criterion_04_temporal_convergence() {
    let pass = match convergence_report() {
        Ok(rep) => {
            let reported = [1.43e-3, 7.75e-4, 3.80e-4, 1.92e-4];
            let mut ok = true;
            let mut notes = Vec::new();
            for (lvl, want) in rep.temporal.iter().zip(reported) {
                if let Some(f) = &lvl.failure {
                    ok = false;
                    notes.push(format!("{}: {f}", lvl.label));
                } else if !(lvl.err_u >= want / 3.0 && lvl.err_u <= want * 3.0) {
                    ok = false;
                    notes.push(format!("{}: Err(u) {:.3e} vs {want:.3e}", lvl.label, lvl.err_u));
                }
            }
            match rep.temporal_slope_u {
                Some(s) if (0.85..=1.15).contains(&s) => notes.push(format!("slope(u) {s:.3}")),
                s => {
                    ok = false;
                    notes.push(format!("slope(u) {s:?}"));
                }
            }
            for (i, s) in rep.temporal_slope_v.iter().enumerate() {
                match s {
                    Some(s) if (0.85..=1.15).contains(s) => {}
                    s => {
                        ok = false;
                        notes.push(format!("slope(v{}) {s:?}", i + 1));
                    }
                }
            }
            verdict(4, ok, "temporal rates ~1 and errors near reported values", &notes.join("; "))
        }
        Err(e) => verdict(4, false, "temporal convergence study completes", e),
    };
    assert!(pass, "see the printed verdict");
}

#[test]
fn criterion_05_spatial_convergence() {
    let pass = match convergence_report() {
        Ok(rep) => {
            let mut ok = true;
            let mut notes = Vec::new();
            for lvl in &rep.spatial {
                if let Some(f) = &lvl.failure {
                    ok = false;
                    notes.push(format!("{}: {f}", lvl.label));
                }
            }
            match rep.spatial_slope_u {
                Some(s) if (1.85..=2.15).contains(&s) => notes.push(format!("slope(u) {s:.3}")),
                s => {
                    ok = false;
                    notes.push(format!("slope(u) {s:?}"));
                }
            }
            for (i, s) in rep.spatial_slope_v.iter().enumerate() {
                match s {
                    Some(s) if (1.85..=2.15).contains(s) => {}
                    s => {
                        ok = false;
                        notes.push(format!("slope(v{}) {s:?}", i + 1));
                    }
                }
            }
            verdict(5, ok, "spatial rates ~2 for u and every director", &notes.join("; "))
        }
        Err(e) => verdict(5, false, "spatial convergence study completes", e),
    };
    assert!(pass, "see the printed verdict");
}

#[test]
fn criterion_06_residual_reproduction() {
    let a_ok = match example1a_run() {
        Ok(run) => {
            let r = run.report.final_residual_inf;
            verdict(6, r <= 1e-4, "example1a final residual <= 1e-4", &format!("{r:.3e}"))
        }
        Err(e) => verdict(6, false, "example1a run completes", e),
    };
    let b = run_single(&presets::preset("example1b").unwrap());
    let b_ok = match &b {
        Ok(run) => {
            let r = run.report.final_residual_inf;
            verdict(6, r <= 1e-1, "example1b final residual <= 1e-1", &format!("{r:.3e}"))
        }
        Err(e) => verdict(6, false, "example1b run completes", &e.to_string()),
    };
    assert!(a_ok && b_ok, "see the printed verdicts");
}

#[test]
fn criterion_07_index_preservation_under_refinement() {
    let mut signs = Vec::new();
    let mut ok = true;
    let mut notes = Vec::new();
    for m in [256usize, 512] {
        let mut cfg = presets::preset("example1a").unwrap();
        cfg.discretization.cells = vec![m];
        // headroom for the weakly contractive stretches of the transient
        cfg.scheme.picard_max = 400;
        match run_single(&cfg) {
            Ok(run) => {
                let vals = &run.eigenvalues;
                let neg = vals.iter().filter(|&&v| v < 0.0).count();
                let pattern: Vec<bool> = vals.iter().take(6).map(|&v| v < 0.0).collect();
                notes.push(format!(
                    "M={m}: {neg} negative of {:?}",
                    vals.iter().take(6).map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>()
                ));
                if neg != 3 {
                    ok = false;
                }
                signs.push(pattern);
            }
            Err(e) => {
                ok = false;
                notes.push(format!("M={m}: {e}"));
            }
        }
    }
    if signs.len() == 2 && signs[0] != signs[1] {
        ok = false;
        notes.push("sign patterns differ between resolutions".into());
    }
    let pass = verdict(
        7,
        ok,
        "exactly 3 negative eigenvalues at h=pi/256 and pi/512, stable signs",
        &notes.join("; "),
    );
    assert!(pass, "see the printed verdict");
}

#[test]
fn criterion_08_orthonormal_vs_variant_contrast() {
    let cfg = presets::preset("npo-comparison").unwrap();
    let pass = match run_comparison(&cfg) {
        Ok((preserving, variant)) => {
            let pi = preserving.morse_index;
            let vi = variant.morse_index;
            verdict(
                8,
                pi == Some(3) && vi == Some(2),
                "preserving scheme reaches index 3, variant index 2",
                &format!("preserving {pi:?}, variant {vi:?}"),
            )
        }
        Err(e) => verdict(8, false, "comparison runs complete", &e.to_string()),
    };
    assert!(pass, "see the printed verdict");
}

/// Dense damped-Newton solve of the full step relations (test-side oracle).
mod oracle {
    use super::*;

    pub struct StepResidual<'a> {
        pub space: &'a FemSpace,
        pub problem: &'a ProblemSpec,
        pub params: SchemeParams,
        pub u_prev: Field,
        pub v_prev: Vec<Field>,
        pub mass: DenseMatrix,
        pub stiffness: DenseMatrix,
        pub load_prev: Vec<f64>,
    }

    impl<'a> StepResidual<'a> {
        pub fn eval(&self, y: &[f64]) -> Vec<f64> {
            let n = self.space.n_dofs();
            let k = self.v_prev.len();
            let u = Field(y[0..n].to_vec());
            let vs: Vec<Field> = (0..k)
                .map(|i| Field(y[(i + 1) * n..(i + 2) * n].to_vec()))
                .collect();
            let inv_bt = 1.0 / (self.params.beta * self.params.tau);
            let inv_gt = 1.0 / (self.params.gamma * self.params.tau);
            let mut r = vec![0.0; (k + 1) * n];
            let mu = self.mass.matvec(&u);
            let mu_prev = self.mass.matvec(&self.u_prev);
            let au = self.stiffness.matvec(&u);
            for j in 0..n {
                r[j] = inv_bt * (mu[j] - mu_prev[j]) + au[j] - self.load_prev[j];
            }
            for vp in &self.v_prev {
                let mv = self.mass.matvec(vp);
                let av = self.stiffness.matvec(vp);
                let av_u: f64 = av.iter().zip(u.iter()).map(|(a, b)| a * b).sum();
                let v_load: f64 = vp.iter().zip(&self.load_prev).map(|(a, b)| a * b).sum();
                for j in 0..n {
                    r[j] += -2.0 * av_u * mv[j] + 2.0 * v_load * mv[j];
                }
            }
            let w_f = assemble_weighted_mass(self.space, &u, |z| (self.problem.fprime)(z))
                .unwrap()
                .to_dense();
            for i in 0..k {
                let x = &vs[i];
                let w: Vec<f64> = x
                    .iter()
                    .zip(self.v_prev[i].iter())
                    .map(|(a, b)| 0.5 * (a + b))
                    .collect();
                let mw = self.mass.matvec(&w);
                let aw = self.stiffness.matvec(&w);
                let wfw = w_f.matvec(&w);
                let kw: Vec<f64> = aw.iter().zip(&wfw).map(|(a, b)| a - b).collect();
                let s0: f64 = w.iter().zip(&mw).map(|(a, b)| a * b).sum();
                let sigma: f64 = w.iter().zip(&kw).map(|(a, b)| a * b).sum();
                let mx = self.mass.matvec(x);
                let mv_prev = self.mass.matvec(&self.v_prev[i]);
                for j in 0..n {
                    r[(i + 1) * n + j] = inv_gt * (mx[j] - mv_prev[j]) + s0 * kw[j] - sigma * mw[j];
                }
                for l in 0..k {
                    if l == i {
                        continue;
                    }
                    let z = if l < i { &vs[l] } else { &self.v_prev[l] };
                    let mz = self.mass.matvec(z);
                    let c: f64 = z.iter().zip(&kw).map(|(a, b)| a * b).sum();
                    for j in 0..n {
                        r[(i + 1) * n + j] -= s0 * c * mz[j];
                    }
                }
            }
            r
        }

        pub fn newton(&self, y0: Vec<f64>) -> Vec<f64> {
            let dim = y0.len();
            let mut y = y0;
            for _it in 0..60 {
                let r = self.eval(&y);
                let rnorm: f64 = r.iter().map(|v| v * v).sum::<f64>().sqrt();
                if rnorm < 1e-13 {
                    break;
                }
                let mut jac = DenseMatrix::zeros(dim, dim);
                for c in 0..dim {
                    let h = 1e-7 * (1.0 + y[c].abs());
                    let mut yp = y.clone();
                    yp[c] += h;
                    let rp = self.eval(&yp);
                    let mut ym = y.clone();
                    ym[c] -= h;
                    let rm = self.eval(&ym);
                    for rr in 0..dim {
                        jac[(rr, c)] = (rp[rr] - rm[rr]) / (2.0 * h);
                    }
                }
                let delta = jac.solve(&r).unwrap();
                let mut t = 1.0;
                loop {
                    let yt: Vec<f64> = y.iter().zip(&delta).map(|(a, d)| a - t * d).collect();
                    let rt = self.eval(&yt);
                    let rtn: f64 = rt.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if rtn < rnorm || t < 1e-4 {
                        y = yt;
                        break;
                    }
                    t *= 0.5;
                }
            }
            y
        }
    }
}

#[test]
fn criterion_09_small_instance_oracles() {
    // one full step on M = 8, k = 2 against a dense fully-coupled Newton solve
    let pi = std::f64::consts::PI;
    let space = FemSpace::new(build_mesh(1, &[pi], &[8]).unwrap());
    let problem = ProblemSpec::elliptic(
        1.0,
        |u| u.powi(4) - 10.0 * u * u,
        |u| 4.0 * u.powi(3) - 20.0 * u,
    );
    let params = SchemeParams::new(2, 1e-3, 5.0);
    let amp = (2.0 / pi).sqrt();
    let u0 = hisd_core::fem::analytic(
        |x: [f64; 2]| (2.0 * x[0]).sin(),
        |x: [f64; 2]| [2.0 * (2.0 * x[0]).cos(), 0.0],
    );
    let v1 = hisd_core::fem::analytic(
        move |x: [f64; 2]| amp * (x[0]).sin(),
        move |x: [f64; 2]| [amp * (x[0]).cos(), 0.0],
    );
    let v2 = hisd_core::fem::analytic(
        move |x: [f64; 2]| amp * (2.0 * x[0]).sin(),
        move |x: [f64; 2]| [amp * 2.0 * (2.0 * x[0]).cos(), 0.0],
    );
    let state0 = initialize(&space, &problem, &u0, &[&v1, &v2]).unwrap();
    let mut state = state0.clone();
    let mut stepper = Stepper::new(&space, &problem, params).unwrap();
    stepper.step(&mut state).unwrap();
    let n = space.n_dofs();
    let oracle = oracle::StepResidual {
        space: &space,
        problem: &problem,
        params,
        u_prev: state0.u.clone(),
        v_prev: state0.v.clone(),
        mass: space.mass().to_dense(),
        stiffness: assemble_stiffness(&space, |_| [[1.0, 0.0], [0.0, 1.0]])
            .unwrap()
            .to_dense(),
        load_prev: assemble_nonlinear_load(&space, &state0.u, |z| (problem.f)(z)).unwrap(),
    };
    let mut y0 = Vec::new();
    y0.extend_from_slice(&state0.u);
    for v in &state0.v {
        y0.extend_from_slice(v);
    }
    let y = oracle.newton(y0);
    let mut worst = {
        let d = Field(state.u.iter().zip(&y[0..n]).map(|(a, b)| a - b).collect());
        l2_norm(&space, &d)
    };
    for i in 0..2 {
        let d = Field(
            state.v[i]
                .iter()
                .zip(&y[(i + 1) * n..(i + 2) * n])
                .map(|(a, b)| a - b)
                .collect(),
        );
        worst = worst.max(l2_norm(&space, &d));
    }
    let step_ok = verdict(
        9,
        worst < 1e-9,
        "one full step matches the dense Newton oracle to 1e-9",
        &format!("max L2 deviation {worst:.3e}"),
    );

    // 50 randomized low-rank corrected solves against dense solves
    let mut seed = 0xc0ffee_5eedu64;
    let mut rng = move || {
        seed ^= seed << 13;
        seed ^= seed >> 7;
        seed ^= seed << 17;
        (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let mut worst_rel = 0.0f64;
    for trial in 0..50 {
        let n = 20 + (trial % 7) * 13;
        let k = 1 + trial % 5;
        let mut trips = Vec::new();
        for i in 0..n {
            let mut row = 0.0;
            for j in i + 1..(i + 3).min(n) {
                let v = rng();
                trips.push((i, j, v));
                trips.push((j, i, v));
                row += v.abs();
            }
            trips.push((i, i, 2.5 + row + rng().abs()));
        }
        let b = SparseMatrix::from_triplets(n, &trips);
        let f = factor_spd(&b).unwrap();
        let scale = 0.4 / k as f64;
        let u: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| scale * rng()).collect()).collect();
        let w: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| scale * rng()).collect()).collect();
        let rhs: Vec<f64> = (0..n).map(|_| rng()).collect();
        let got = woodbury_solve(&f, &u, &w, &rhs).unwrap();
        let mut dense = b.to_dense();
        for c in 0..k {
            for i in 0..n {
                for j in 0..n {
                    dense[(i, j)] -= u[c][i] * w[c][j];
                }
            }
        }
        let want = dense.solve(&rhs).unwrap();
        let nrm: f64 = want.iter().map(|v| v * v).sum::<f64>().sqrt();
        let err: f64 = got
            .iter()
            .zip(&want)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        worst_rel = worst_rel.max(err / nrm);
    }
    let wb_ok = verdict(
        9,
        worst_rel < 1e-9,
        "rank-k corrected solves match dense solves on 50 instances",
        &format!("worst relative deviation {worst_rel:.3e}"),
    );
    assert!(step_ok && wb_ok, "see the printed verdicts");
}

#[test]
fn criterion_10_analytic_spectra() {
    let pi = std::f64::consts::PI;
    let space = FemSpace::new(build_mesh(1, &[pi], &[512]).unwrap());
    let a = assemble_stiffness(&space, |_| [[1.0, 0.0], [0.0, 1.0]]).unwrap();
    let h = HessianOperator { matrix: a, mass: space.mass().clone(), symmetric: true };
    let spec = smallest_eigenpairs(&h, 3, -0.5).unwrap();
    let mut ok = true;
    let mut notes = Vec::new();
    for (got, want) in spec.values().iter().zip([1.0, 4.0, 9.0]) {
        let rel = (got - want).abs() / want;
        notes.push(format!("{got:.6} vs {want} ({:.4}%)", rel * 100.0));
        if rel > 0.005 {
            ok = false;
        }
    }
    let lap_ok = verdict(
        10,
        ok,
        "interval Laplacian eigenvalues within 0.5% of 1, 4, 9",
        &notes.join("; "),
    );

    // zero state of the phase-field model on its preset mesh: exactly eight
    // negative eigenvalues (0.006 pi^2 (m^2+n^2) - 1 analytically)
    let cfg = presets::preset("example2").unwrap();
    let space2 = cfg.build_space().unwrap();
    let problem2 = cfg.build_problem();
    let zero = Field::zeros(space2.n_dofs());
    let (spec2, index) = spectrum_with_index(&space2, &problem2, &zero, 10).unwrap();
    let idx_ok = verdict(
        10,
        index == 8,
        "phase-field zero state has exactly 8 negative eigenvalues",
        &format!(
            "count {index}, smallest {:?}",
            spec2.values().iter().take(3).map(|v| (v * 1e3).round() / 1e3).collect::<Vec<_>>()
        ),
    );
    assert!(lap_ok && idx_ok, "see the printed verdicts");
}

fn landscape_smoke_config() -> RunConfig {
    let mut cfg = presets::preset("example2").unwrap();
    cfg.discretization.cells = vec![32, 32];
    // the relaxation rates of this model are O(0.1..1) with a near-zero
    // Hessian gap, so children need a long horizon; the dynamics is slow
    // enough that a coarser step is ample for basin identification
    cfg.discretization.tau = 1e-2;
    cfg.discretization.final_time = 60.0;
    if let Some(l) = cfg.landscape.as_mut() {
        l.max_runs = 140;
        l.epsilon_rel = 0.4;
        l.epsilon_abs = 0.4;
        l.residual_threshold = 5e-3;
    }
    cfg
}

#[test]
fn criterion_11_landscape_smoke() {
    let cfg = landscape_smoke_config();
    let threshold = cfg.landscape.as_ref().unwrap().residual_threshold;
    let pass = match run_landscape(&cfg) {
        Ok(run) => {
            let classes = run.graph.nodes.len();
            let residual_ok = run.graph.nodes.iter().all(|n| n.residual <= threshold);
            let counts: Vec<(usize, usize)> = run
                .graph
                .by_index()
                .into_iter()
                .map(|(k, ids)| (k, ids.len()))
                .collect();
            verdict(
                11,
                classes >= 8 && residual_ok,
                "reduced sweep finds at least 8 solution classes",
                &format!("{classes} classes, by index {counts:?}, {} runs", run.graph.runs_used),
            )
        }
        Err(e) => verdict(11, false, "landscape sweep completes", &e.to_string()),
    };
    assert!(pass, "see the printed verdict");
}

#[test]
#[ignore = "full-resolution sweep, many hours of runtime; run explicitly"]
fn criterion_11_landscape_full() {
    let cfg = presets::preset("example2").unwrap();
    let pass = match run_landscape(&cfg) {
        Ok(run) => {
            let classes = run.graph.nodes.len();
            let residual_ok = run.graph.nodes.iter().all(|n| n.residual <= 1e-3);
            verdict(
                11,
                classes >= 16 && residual_ok,
                "full sweep finds at least 16 solution classes",
                &format!("{classes} classes in {} runs", run.graph.runs_used),
            )
        }
        Err(e) => verdict(11, false, "landscape sweep completes", &e.to_string()),
    };
    assert!(pass, "see the printed verdict");
}

#[test]
fn criterion_12_gradient_bound_stability() {
    let mut maxima = Vec::new();
    let mut notes = Vec::new();
    let mut ok = true;
    for tau in [4e-3, 2e-3, 1e-3] {
        let mut cfg = presets::preset("example1a").unwrap();
        cfg.discretization.tau = tau;
        cfg.output.spectrum_count = 0;
        cfg.scheme.picard_max = 400;
        match run_single(&cfg) {
            Ok(run) => {
                let m = run.report.max_grad_norm_sum();
                notes.push(format!("tau {tau:.0e}: {m:.4}"));
                maxima.push(m);
            }
            Err(e) => {
                ok = false;
                notes.push(format!("tau {tau:.0e}: {e}"));
            }
        }
    }
    if maxima.len() == 3 {
        let lo = maxima.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = maxima.iter().cloned().fold(0.0f64, f64::max);
        if hi / lo > 1.10 {
            ok = false;
            notes.push(format!("spread {:.1}%", (hi / lo - 1.0) * 100.0));
        }
    }
    let pass = verdict(
        12,
        ok,
        "max weighted-gradient sum stable within 10% across tau",
        &notes.join("; "),
    );
    assert!(pass, "see the printed verdict");
}
