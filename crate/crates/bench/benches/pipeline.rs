use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use hisd_bench::{initial_state, phase_field_problem, prepared_1d, prepared_2d, square_space};
use hisd_core::dynamics::initialize;
use hisd_core::fem::{
    assemble_stiffness, assemble_weighted_mass, interpolate, AnalyticField,
};
use hisd_core::linalg::{factor_general, factor_spd};
use hisd_core::spectral::{assemble_hessian, default_shift, smallest_eigenpairs};

fn bench_assembly(c: &mut Criterion) {
    let space = square_space(64);
    let u = interpolate(&space, |x| (x[0] * 3.0).sin() * (x[1] * 2.0).cos());
    c.bench_function("assemble_stiffness_2d_64", |b| {
        b.iter(|| assemble_stiffness(black_box(&space), |_| [[0.006, 0.0], [0.0, 0.006]]).unwrap())
    });
    c.bench_function("assemble_weighted_mass_2d_64", |b| {
        b.iter(|| assemble_weighted_mass(black_box(&space), &u, |z| 1.0 - 3.0 * z * z).unwrap())
    });
}

fn bench_factorization(c: &mut Criterion) {
    let space = square_space(64);
    let a = assemble_stiffness(&space, |_| [[1.0, 0.0], [0.0, 1.0]]).unwrap();
    c.bench_function("band_cholesky_2d_64", |b| {
        b.iter(|| factor_spd(black_box(&a)).unwrap())
    });
    c.bench_function("band_lu_2d_64", |b| {
        b.iter(|| factor_general(black_box(&a)).unwrap())
    });
    let f = factor_spd(&a).unwrap();
    let rhs = vec![1.0; a.n()];
    c.bench_function("band_solve_2d_64", |b| b.iter(|| f.solve(black_box(&rhs))));
}

fn bench_step(c: &mut Criterion) {
    let (space, problem, params) = prepared_1d(100, 3);
    let (mut stepper, state0) = initial_state(&space, &problem, params, 4.0);
    c.bench_function("step_1d_100_k3", |b| {
        b.iter_batched(
            || state0.clone(),
            |mut s| stepper.step(&mut s).unwrap(),
            criterion::BatchSize::SmallInput,
        )
    });

    let (space2, problem2, params2) = prepared_2d(32, 8);
    let amp = 2.0;
    let modes: Vec<_> = (1..=8)
        .map(|i| {
            let fx = (1 + i % 3) as f64 * std::f64::consts::PI;
            let fy = (1 + i / 3) as f64 * std::f64::consts::PI;
            hisd_core::fem::analytic(
                move |x: [f64; 2]| amp * (fx * x[0]).sin() * (fy * x[1]).sin(),
                move |x: [f64; 2]| {
                    [
                        amp * fx * (fx * x[0]).cos() * (fy * x[1]).sin(),
                        amp * fy * (fx * x[0]).sin() * (fy * x[1]).cos(),
                    ]
                },
            )
        })
        .collect();
    let refs: Vec<&dyn AnalyticField> = modes.iter().map(|m| m as &dyn AnalyticField).collect();
    let u0 = hisd_core::fem::analytic(|_| 0.0, |_| [0.0, 0.0]);
    let state2 = initialize(&space2, &problem2, &u0, &refs).unwrap();
    let mut stepper2 = hisd_core::dynamics::Stepper::new(&space2, &problem2, params2).unwrap();
    c.bench_function("step_2d_32_k8", |b| {
        b.iter_batched(
            || state2.clone(),
            |mut s| stepper2.step(&mut s).unwrap(),
            criterion::BatchSize::SmallInput,
        )
    });
}

fn bench_eigensolve(c: &mut Criterion) {
    let space = square_space(32);
    let problem = phase_field_problem();
    let u = hisd_core::fem::Field::zeros(space.n_dofs());
    c.bench_function("smallest_eigenpairs_2d_32_m10", |b| {
        b.iter(|| {
            let h = assemble_hessian(&space, &problem, &u).unwrap();
            let sigma = default_shift(&space, &problem, &u);
            smallest_eigenpairs(black_box(&h), 10, sigma).unwrap()
        })
    });
}

criterion_group!(benches, bench_assembly, bench_factorization, bench_step, bench_eigensolve);
criterion_main!(benches);
