//! Hessian assembly and smallest-eigenvalue computation for saddle-index
//! verification. The symmetric path runs shift-invert Lanczos on the
//! generalized pencil (H, M) in the M-inner product with full
//! reorthogonalization; the advective (nonsymmetric) path projects onto an
//! Arnoldi subspace and takes real parts from a small dense eigensolve.

use crate::error::{Error, Result};
use crate::fem::{assemble_advection_reaction, assemble_stiffness, assemble_weighted_mass, FemSpace, Field, ProblemSpec};
use crate::linalg::dense::{eigenvalues_real, tridiag_eigh, DenseMatrix};
use crate::linalg::{dot, factor_general, Factorization, SparseMatrix};

/// Discrete second variation at a state u: H = A - G - W(u), where W is the
/// fprime(u_h)-weighted mass and G the advection-reaction matrix (absent for
/// the pure elliptic model). Symmetric whenever b = 0.
#[derive(Debug)]
pub struct HessianOperator {
    pub matrix: SparseMatrix,
    pub mass: SparseMatrix,
    pub symmetric: bool,
}

pub fn assemble_hessian(space: &FemSpace, problem: &ProblemSpec, u: &Field) -> Result<HessianOperator> {
    let a = assemble_stiffness(space, |x| (problem.diffusion)(x))?;
    let w = assemble_weighted_mass(space, u, |z| (problem.fprime)(z))?;
    let mut terms = vec![(1.0, &a), (-1.0, &w)];
    let g;
    let symmetric = problem.advection.is_none();
    if problem.has_advection_reaction() {
        let b = problem.advection.clone();
        let c = problem.reaction.clone();
        g = assemble_advection_reaction(
            space,
            move |x| b.as_ref().map_or([0.0, 0.0], |f| f(x)),
            move |x| c.as_ref().map_or(0.0, |f| f(x)),
        );
        terms.push((-1.0, &g));
        let matrix = SparseMatrix::linear_combination(&terms);
        return Ok(HessianOperator { matrix, mass: space.mass().clone(), symmetric });
    }
    let matrix = SparseMatrix::linear_combination(&terms);
    Ok(HessianOperator { matrix, mass: space.mass().clone(), symmetric })
}

/// A lower bound for the shift: the generalized spectrum of (A - G - W, M)
/// with b = 0 is bounded below by -max(c + fprime(u)) over the quadrature
/// points, since the diffusion part is nonnegative.
pub fn default_shift(space: &FemSpace, problem: &ProblemSpec, u: &Field) -> f64 {
    let mut hi = 0.0f64;
    for el in space.elements() {
        let mut loc = [0.0; 3];
        for a in 0..el.nloc {
            let d = el.dofs[a];
            if d != crate::fem::NO_DOF {
                loc[a] = u[d];
            }
        }
        for q in 0..3 {
            let mut uq = 0.0;
            for a in 0..el.nloc {
                uq += el.qphi[q][a] * loc[a];
            }
            let mut zq = (self_fprime(problem))(uq);
            if let Some(c) = &problem.reaction {
                zq += c(el.qpt[q]);
            }
            hi = hi.max(zq);
        }
    }
    -(1.05 * hi + 0.5)
}

fn self_fprime(problem: &ProblemSpec) -> &crate::fem::PointwiseFn {
    &problem.fprime
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Field,
}

/// Generalized eigenpairs sorted ascending, with the count certified against
/// the residual bound ||H x - lambda M x|| / ||x||_M <= 1e-8.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub pairs: Vec<EigenPair>,
}

impl Spectrum {
    pub fn values(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.value).collect()
    }
}

/// Result of a Morse-index count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MorseIndex {
    pub negative: usize,
    /// Eigenvalues inside [-zero_tol, zero_tol], reported separately.
    pub near_zero: usize,
}

/// Counts eigenvalues below -zero_tol. The spectrum must extend past
/// zero_tol, otherwise the window is insufficient to certify the count.
pub fn morse_index(spectrum: &Spectrum, zero_tol: f64) -> Result<MorseIndex> {
    let vals = spectrum.values();
    match vals.last() {
        Some(&last) if last > zero_tol => {}
        _ => return Err(Error::SpectrumWindow { available: vals.len() }),
    }
    let negative = vals.iter().filter(|&&v| v < -zero_tol).count();
    let near_zero = vals.iter().filter(|&&v| v.abs() <= zero_tol).count();
    Ok(MorseIndex { negative, near_zero })
}

const RESIDUAL_TOL: f64 = 1e-8;

/// The m algebraically smallest generalized eigenpairs of (H, M) by
/// shift-invert Lanczos; sigma must sit below the spectrum's left edge.
/// A factorization hitting an eigenvalue retries with a perturbed shift.
pub fn smallest_eigenpairs(h: &HessianOperator, m: usize, sigma: f64) -> Result<Spectrum> {
    assert!(m >= 1);
    if !h.symmetric {
        return Err(Error::InvalidParameter(
            "smallest_eigenpairs requires a symmetric operator; use real_part_spectrum".into(),
        ));
    }
    let n = h.matrix.n();
    if m > n {
        return Err(Error::InvalidParameter(format!(
            "requested {m} eigenpairs of an {n}-dimensional operator"
        )));
    }
    let mut shift = sigma;
    let mut last_err = None;
    for _attempt in 0..4 {
        match try_factor_shifted(h, shift) {
            Ok(fact) => match lanczos(h, &fact, m, shift) {
                Ok(spec) => return Ok(spec),
                Err(e @ Error::EigenNotConverged { .. }) => return Err(e),
                Err(e) => last_err = Some(e),
            },
            Err(e) => last_err = Some(e),
        }
        shift = shift * 1.25 - 0.37;
    }
    Err(last_err.unwrap_or(Error::FactorizationFailed("shifted operator".into())))
}

fn try_factor_shifted(h: &HessianOperator, sigma: f64) -> Result<Factorization> {
    let shifted = SparseMatrix::linear_combination(&[(1.0, &h.matrix), (-sigma, &h.mass)]);
    factor_general(&shifted)
}

fn lanczos(h: &HessianOperator, fact: &Factorization, m: usize, sigma: f64) -> Result<Spectrum> {
    let n = h.matrix.n();
    let max_dim = (6 * m + 40).min(n);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_dim);
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();

    // deterministic start vector
    let mut q = pseudo_random(n, 0x5eed_1234_abcd_0001);
    m_normalize(&h.mass, &mut q)?;
    basis.push(q);

    let mut converged: Option<Spectrum> = None;
    for j in 0..max_dim {
        // z = (H - sigma M)^-1 M q_j
        let mq = h.mass.matvec(&basis[j]);
        let mut z = fact.solve(&mq);
        // full reorthogonalization in the M-inner product, two passes
        let mut alpha = 0.0;
        for pass in 0..2 {
            let mz = h.mass.matvec(&z);
            for (idx, qb) in basis.iter().enumerate() {
                let c = dot(qb, &mz);
                if pass == 0 && idx == j {
                    alpha = c;
                }
                crate::linalg::axpy(-c, qb, &mut z);
            }
        }
        alphas.push(alpha);
        let mz = h.mass.matvec(&z);
        let beta = dot(&z, &mz).max(0.0).sqrt();

        let do_check = beta < 1e-13 || basis.len() >= max_dim || (j + 1) >= m && (j + 1) % 4 == 0;
        if do_check {
            if let Some(spec) = ritz_check(h, &basis, &alphas, &betas, m, sigma)? {
                converged = Some(spec);
                break;
            }
        }
        if beta < 1e-13 {
            // invariant subspace: restart with a fresh orthogonal direction
            let mut fresh = pseudo_random(n, 0x0dd_5eed ^ (j as u64 + 17));
            for _pass in 0..2 {
                let mf = h.mass.matvec(&fresh);
                for qb in &basis {
                    let c = dot(qb, &mf);
                    crate::linalg::axpy(-c, qb, &mut fresh);
                }
            }
            let ok = m_normalize(&h.mass, &mut fresh).is_ok();
            if !ok {
                break;
            }
            betas.push(0.0);
            basis.push(fresh);
            continue;
        }
        betas.push(beta);
        for zi in &mut z {
            *zi /= beta;
        }
        basis.push(z);
    }
    if converged.is_none() {
        // final attempt with everything we accumulated
        converged = ritz_check(h, &basis, &alphas, &betas, m, sigma)?;
    }
    converged.ok_or(Error::EigenNotConverged {
        iterations: alphas.len(),
        converged: 0,
        requested: m,
    })
}

fn ritz_check(
    h: &HessianOperator,
    basis: &[Vec<f64>],
    alphas: &[f64],
    betas: &[f64],
    m: usize,
    sigma: f64,
) -> Result<Option<Spectrum>> {
    let dim = alphas.len();
    if dim < m {
        return Ok(None);
    }
    let (theta, s) = tridiag_eigh(alphas, &betas[..dim - 1])?;
    // theta = 1/(lambda - sigma); the largest thetas are the smallest lambdas
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| theta[b].partial_cmp(&theta[a]).unwrap());
    let mut pairs = Vec::with_capacity(m);
    for &col in order.iter().take(m) {
        let th = theta[col];
        if th.abs() < 1e-300 {
            return Ok(None);
        }
        let lambda = sigma + 1.0 / th;
        let mut x = vec![0.0; h.matrix.n()];
        for (qb, &w) in basis.iter().take(dim).zip((0..dim).map(|r| s[(r, col)]).collect::<Vec<_>>().iter()) {
            crate::linalg::axpy(w, qb, &mut x);
        }
        // explicit residual ||H x - lambda M x|| / ||x||_M
        let hx = h.matrix.matvec(&x);
        let mx = h.mass.matvec(&x);
        let xnorm = dot(&x, &mx).max(0.0).sqrt();
        if xnorm < 1e-300 {
            return Ok(None);
        }
        let rnorm = hx
            .iter()
            .zip(&mx)
            .map(|(a, b)| (a - lambda * b) * (a - lambda * b))
            .sum::<f64>()
            .sqrt();
        if rnorm / xnorm > RESIDUAL_TOL {
            return Ok(None);
        }
        for xi in &mut x {
            *xi /= xnorm;
        }
        // deterministic sign convention
        if let Some(first) = x.iter().find(|v| v.abs() > 1e-10) {
            if *first < 0.0 {
                for xi in &mut x {
                    *xi = -*xi;
                }
            }
        }
        pairs.push(EigenPair { value: lambda, vector: Field(x) });
    }
    pairs.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap());
    Ok(Some(Spectrum { pairs }))
}

fn m_normalize(mass: &SparseMatrix, x: &mut [f64]) -> Result<()> {
    let mx = mass.matvec(x);
    let nrm = dot(x, &mx).max(0.0).sqrt();
    if nrm < 1e-300 {
        return Err(Error::FactorizationFailed("zero vector in normalization".into()));
    }
    for xi in x.iter_mut() {
        *xi /= nrm;
    }
    Ok(())
}

fn pseudo_random(n: usize, seed: u64) -> Vec<f64> {
    let mut s = seed | 1;
    (0..n)
        .map(|_| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect()
}

/// Leading (re, im) pairs of the generalized spectrum for the nonsymmetric
/// operator: Arnoldi in the M-inner product on (H - sigma M)^-1 M, then a
/// dense eigensolve of the projected Hessenberg matrix. Sorted by real part.
pub fn real_part_spectrum(h: &HessianOperator, m: usize, sigma: f64, subspace: usize) -> Result<Vec<(f64, f64)>> {
    let n = h.matrix.n();
    let dim = subspace.max(2 * m + 10).min(n);
    let fact = try_factor_shifted(h, sigma)?;
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(dim);
    let mut hess = DenseMatrix::zeros(dim, dim);
    let mut q = pseudo_random(n, 0xa5a5_5a5a_1111_2222);
    m_normalize(&h.mass, &mut q)?;
    basis.push(q);
    let mut actual = dim;
    for j in 0..dim {
        let mq = h.mass.matvec(&basis[j]);
        let mut z = fact.solve(&mq);
        for pass in 0..2 {
            let mz = h.mass.matvec(&z);
            for (i, qb) in basis.iter().enumerate() {
                let c = dot(qb, &mz);
                if pass == 0 {
                    hess[(i, j)] += c;
                }
                crate::linalg::axpy(-c, qb, &mut z);
            }
        }
        let mz = h.mass.matvec(&z);
        let beta = dot(&z, &mz).max(0.0).sqrt();
        if j + 1 < dim {
            if beta < 1e-12 {
                actual = j + 1;
                break;
            }
            hess[(j + 1, j)] = beta;
            for zi in &mut z {
                *zi /= beta;
            }
            basis.push(z);
        }
    }
    let mut proj = DenseMatrix::zeros(actual, actual);
    for i in 0..actual {
        for j in 0..actual {
            proj[(i, j)] = hess[(i, j)];
        }
    }
    let thetas = eigenvalues_real(&proj)?;
    let mut out: Vec<(f64, f64)> = thetas
        .iter()
        .filter(|(re, im)| re * re + im * im > 1e-24)
        .map(|&(re, im)| {
            // lambda = sigma + 1/theta
            let d = re * re + im * im;
            (sigma + re / d, -im / d)
        })
        .collect();
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out.truncate(m);
    Ok(out)
}
