//! Eigenvalue computations: analytic spectra, a dense-eigensolver oracle,
//! index counting, shift robustness, and the advective (nonsymmetric) path.

mod common;

use std::f64::consts::PI;

use common::{assert_close, interval_space, square_space};
use hisd_core::fem::{interpolate, Field, ProblemSpec};
use hisd_core::linalg::dense::{eigenvalues_real, jacobi_eigh, DenseMatrix};
use hisd_core::spectral::{
    assemble_hessian, default_shift, morse_index, real_part_spectrum, smallest_eigenpairs,
    EigenPair, Spectrum,
};
use hisd_core::Error;

fn zero_field(n: usize) -> Field {
    Field::zeros(n)
}

#[test]
fn hessian_at_zero_is_the_stiffness_for_quartic() {
    // fprime(0) = 0 for f = u^4 - 10 u^2
    let space = interval_space(32);
    let problem = ProblemSpec::elliptic(
        1.0,
        |u| u.powi(4) - 10.0 * u * u,
        |u| 4.0 * u.powi(3) - 20.0 * u,
    );
    let h = assemble_hessian(&space, &problem, &zero_field(space.n_dofs())).unwrap();
    let a = hisd_core::fem::assemble_stiffness(&space, |_| [[1.0, 0.0], [0.0, 1.0]]).unwrap();
    for (x, y) in h.matrix.values().iter().zip(a.values()) {
        assert_close(*x, *y, 1e-14, "hessian vs stiffness");
    }
    let spec = smallest_eigenpairs(&h, 3, default_shift(&space, &problem, &zero_field(space.n_dofs()))).unwrap();
    let h2 = (PI / 32.0) * (PI / 32.0);
    for (got, want) in spec.values().iter().zip([1.0f64, 4.0, 9.0]) {
        // P1 eigenvalue error is ~ lambda^2 h^2 / 12 from above
        assert!(
            *got >= want && got - want < 1.5 * want * want * h2 / 12.0 + 1e-9,
            "{got} vs {want}"
        );
    }
}

#[test]
fn phase_field_zero_state_has_index_eight() {
    // f = u - u^3, a = 0.006 I on the unit square: eigenvalues
    // 0.006 pi^2 (m^2 + n^2) - 1, exactly eight of them negative
    let space = square_space(1.0, 32);
    let problem = ProblemSpec::elliptic(0.006, |u| u - u.powi(3), |u| 1.0 - 3.0 * u * u);
    let u = zero_field(space.n_dofs());
    let h = assemble_hessian(&space, &problem, &u).unwrap();
    let sigma = default_shift(&space, &problem, &u);
    let spec = smallest_eigenpairs(&h, 12, sigma).unwrap();
    let mi = morse_index(&spec, 1e-6).unwrap();
    assert_eq!(mi.negative, 8, "eigenvalues: {:?}", spec.values());
    // spot check the smallest one against the analytic value
    assert_close(spec.pairs[0].value, 0.006 * PI * PI * 2.0 - 1.0, 5e-3, "smallest");
}

#[test]
fn agrees_with_dense_generalized_eigensolver() {
    // oracle: reduce (H, M) by the dense Cholesky of M and run Jacobi
    let space = interval_space(32);
    let problem = ProblemSpec::elliptic(1.0, |u| 3.0 * u - u.powi(3), |u| 3.0 - 3.0 * u * u);
    let u = interpolate(&space, |x| 0.8 * (x[0]).sin());
    let h = assemble_hessian(&space, &problem, &u).unwrap();
    let sigma = default_shift(&space, &problem, &u);
    let spec = smallest_eigenpairs(&h, 5, sigma).unwrap();

    let hd = h.matrix.to_dense();
    let md = h.mass.to_dense();
    let l = md.cholesky().unwrap();
    let n = space.n_dofs();
    // C = L^-1 H L^-T via triangular solves
    let mut c = DenseMatrix::zeros(n, n);
    for j in 0..n {
        // column j of H L^-T: solve L y = H e_j? do it as C = L^-1 (L^-1 H^T)^T
        let mut col: Vec<f64> = (0..n).map(|i| hd[(i, j)]).collect();
        forward_solve(&l, &mut col);
        for i in 0..n {
            c[(i, j)] = col[i];
        }
    }
    let ct = c.transpose();
    let mut c2 = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut col: Vec<f64> = (0..n).map(|i| ct[(i, j)]).collect();
        forward_solve(&l, &mut col);
        for i in 0..n {
            c2[(i, j)] = col[i];
        }
    }
    let (want, _) = jacobi_eigh(&c2);
    for (i, p) in spec.pairs.iter().enumerate() {
        assert!(
            (p.value - want[i]).abs() < 1e-8,
            "pair {i}: {} vs oracle {}",
            p.value,
            want[i]
        );
    }
}

fn forward_solve(l: &DenseMatrix, x: &mut [f64]) {
    let n = x.len();
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s -= l[(i, k)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
}

#[test]
fn residual_invariant_holds() {
    let space = interval_space(48);
    let problem = ProblemSpec::elliptic(1.0, |u| 5.0 * u - u * u, |u| 5.0 - 2.0 * u);
    let u = interpolate(&space, |x| 0.5 * (2.0 * x[0]).sin());
    let h = assemble_hessian(&space, &problem, &u).unwrap();
    let spec = smallest_eigenpairs(&h, 6, default_shift(&space, &problem, &u)).unwrap();
    for p in &spec.pairs {
        let hx = h.matrix.matvec(&p.vector);
        let mx = h.mass.matvec(&p.vector);
        let xnorm = hisd_core::linalg::dot(&p.vector, &mx).sqrt();
        let res: f64 = hx
            .iter()
            .zip(&mx)
            .map(|(a, b)| (a - p.value * b) * (a - p.value * b))
            .sum::<f64>()
            .sqrt();
        assert!(res / xnorm <= 1e-8, "residual {:.3e}", res / xnorm);
    }
}

#[test]
fn shift_choice_does_not_change_the_spectrum() {
    let space = interval_space(40);
    let problem = ProblemSpec::elliptic(1.0, |u| 4.0 * u, |_| 4.0);
    let u = zero_field(space.n_dofs());
    let h = assemble_hessian(&space, &problem, &u).unwrap();
    let s1 = smallest_eigenpairs(&h, 4, -5.0).unwrap();
    let s2 = smallest_eigenpairs(&h, 4, -11.0).unwrap();
    for (a, b) in s1.values().iter().zip(s2.values()) {
        assert_close(*a, b, 1e-8, "shift independence");
    }
}

#[test]
fn morse_index_counting() {
    let fake = |vals: &[f64]| Spectrum {
        pairs: vals
            .iter()
            .map(|&v| EigenPair { value: v, vector: Field::zeros(1) })
            .collect(),
    };
    let mi = morse_index(&fake(&[-2.0, -0.5, 0.3]), 1e-6).unwrap();
    assert_eq!(mi.negative, 2);
    assert_eq!(mi.near_zero, 0);
    // SPD spectrum
    let mi = morse_index(&fake(&[1.0, 4.0, 9.0]), 1e-6).unwrap();
    assert_eq!(mi.negative, 0);
    // near-degenerate values are reported separately
    let mi = morse_index(&fake(&[-1.0, 1e-9, 2.0]), 1e-6).unwrap();
    assert_eq!(mi.negative, 1);
    assert_eq!(mi.near_zero, 1);
    // window too small to certify the count
    let res = morse_index(&fake(&[-3.0, -1.0]), 1e-6);
    assert!(matches!(res, Err(Error::SpectrumWindow { available: 2 })));
}

#[test]
fn nonsymmetric_real_parts_match_dense_oracle() {
    let space = interval_space(24);
    let problem = ProblemSpec::elliptic(0.05, |u| -u * u, |u| -2.0 * u)
        .with_advection(|x| [0.05 * (x[0]).cos(), 0.0])
        .with_reaction(|_| 0.4);
    let u = interpolate(&space, |x| 0.2 * (x[0]).sin());
    let h = assemble_hessian(&space, &problem, &u).unwrap();
    assert!(!h.symmetric);
    assert!(smallest_eigenpairs(&h, 3, -2.0).is_err());

    let got = real_part_spectrum(&h, 4, -2.0, 23).unwrap();

    // dense oracle: eigenvalues of M^-1 H
    let hd = h.matrix.to_dense();
    let md = h.mass.to_dense();
    let n = space.n_dofs();
    let mut minv_h = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let col: Vec<f64> = (0..n).map(|i| hd[(i, j)]).collect();
        let sol = md.solve(&col).unwrap();
        for i in 0..n {
            minv_h[(i, j)] = sol[i];
        }
    }
    let mut want = eigenvalues_real(&minv_h).unwrap();
    want.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for (i, (re, _im)) in got.iter().enumerate() {
        assert!(
            (re - want[i].0).abs() < 1e-6 * (1.0 + want[i].0.abs()),
            "real part {i}: {re} vs {}",
            want[i].0
        );
    }
}
