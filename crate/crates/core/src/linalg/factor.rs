//! Direct solvers for the assembled operators. The meshes are structured, so
//! every system matrix is banded under the natural interior numbering; we
//! factor within the band: Cholesky on the SPD path, LU with partial
//! pivoting on the general path.

use crate::error::{Error, Result};
use crate::linalg::sparse::SparseMatrix;

const SYMMETRY_TOL: f64 = 1e-12;

/// Opaque factorization handle. Immutable after construction; solves may run
/// concurrently from several threads.
#[derive(Debug, Clone)]
pub enum Factorization {
    Cholesky(BandCholesky),
    Lu(BandLu),
}

impl Factorization {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        match self {
            Factorization::Cholesky(f) => f.solve_in_place(x),
            Factorization::Lu(f) => f.solve_in_place(x),
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Factorization::Cholesky(f) => f.n,
            Factorization::Lu(f) => f.n,
        }
    }
}

/// Sparse symmetric positive definite factorization.
pub fn factor_spd(a: &SparseMatrix) -> Result<Factorization> {
    if !a.is_symmetric(SYMMETRY_TOL) {
        return Err(Error::NotSymmetric);
    }
    BandCholesky::new(a).map(Factorization::Cholesky)
}

/// Sparse LU with partial pivoting for general square matrices.
pub fn factor_general(a: &SparseMatrix) -> Result<Factorization> {
    BandLu::new(a).map(Factorization::Lu)
}

/// Lower band Cholesky, stored row-wise: entry (i, j) with i-kd <= j <= i
/// lives at `ab[i*(kd+1) + (j + kd - i)]`.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    kd: usize,
    ab: Vec<f64>,
}

impl BandCholesky {
    fn new(a: &SparseMatrix) -> Result<Self> {
        let n = a.n();
        let (kl, ku) = a.bandwidth();
        let kd = kl.max(ku);
        let w = kd + 1;
        let mut ab = vec![0.0; n * w];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j <= i {
                    ab[i * w + (j + kd - i)] = v;
                }
            }
        }
        for j in 0..n {
            let k0 = j.saturating_sub(kd);
            let mut d = ab[j * w + kd];
            for k in k0..j {
                let l = ab[j * w + (k + kd - j)];
                d -= l * l;
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::FactorizationFailed(format!(
                    "matrix is not positive definite (pivot {d:.3e} at column {j})"
                )));
            }
            let dj = d.sqrt();
            ab[j * w + kd] = dj;
            let imax = (j + kd).min(n - 1);
            for i in j + 1..=imax {
                let mut s = ab[i * w + (j + kd - i)];
                let k0 = i.saturating_sub(kd).max(k0);
                for k in k0..j {
                    s -= ab[i * w + (k + kd - i)] * ab[j * w + (k + kd - j)];
                }
                ab[i * w + (j + kd - i)] = s / dj;
            }
        }
        Ok(BandCholesky { n, kd, ab })
    }

    fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        let w = self.kd + 1;
        for i in 0..self.n {
            let k0 = i.saturating_sub(self.kd);
            let mut s = x[i];
            for k in k0..i {
                s -= self.ab[i * w + (k + self.kd - i)] * x[k];
            }
            x[i] = s / self.ab[i * w + self.kd];
        }
        for i in (0..self.n).rev() {
            let imax = (i + self.kd).min(self.n - 1);
            let mut s = x[i];
            for k in i + 1..=imax {
                s -= self.ab[k * w + (i + self.kd - k)] * x[k];
            }
            x[i] = s / self.ab[i * w + self.kd];
        }
    }
}

/// Band LU with partial pivoting. Column-major band storage with room for
/// the `kl` extra superdiagonals of fill produced by row interchanges:
/// entry (i, j) lives at `ab[j*ldab + (kl + ku + i - j)]`.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandLu {
    fn new(a: &SparseMatrix) -> Result<Self> {
        let n = a.n();
        let (kl, ku) = a.bandwidth();
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![0.0; n * ldab];
        let mut scale = 0.0f64;
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                ab[j * ldab + (kl + ku + i - j)] = v;
                scale = scale.max(v.abs());
            }
        }
        let tiny = f64::EPSILON * scale.max(f64::MIN_POSITIVE) * (n as f64);
        let idx = |i: usize, j: usize| j * ldab + (kl + ku + i - j);
        let mut ipiv = vec![0usize; n];
        for j in 0..n {
            let imax = (j + kl).min(n - 1);
            let mut p = j;
            let mut best = ab[idx(j, j)].abs();
            for i in j + 1..=imax {
                let c = ab[idx(i, j)].abs();
                if c > best {
                    best = c;
                    p = i;
                }
            }
            if best <= tiny || !best.is_finite() {
                return Err(Error::FactorizationFailed(format!(
                    "singular pivot {best:.3e} at column {j}"
                )));
            }
            ipiv[j] = p;
            let cmax = (j + kl + ku).min(n - 1);
            if p != j {
                for c in j..=cmax {
                    ab.swap(idx(j, c), idx(p, c));
                }
            }
            let piv = ab[idx(j, j)];
            for i in j + 1..=imax {
                let l = ab[idx(i, j)] / piv;
                ab[idx(i, j)] = l;
                if l == 0.0 {
                    continue;
                }
                for c in j + 1..=cmax {
                    ab[idx(i, c)] -= l * ab[idx(j, c)];
                }
            }
        }
        Ok(BandLu { n, kl, ku, ab, ipiv })
    }

    fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        let ldab = 2 * self.kl + self.ku + 1;
        let idx = |i: usize, j: usize| j * ldab + (self.kl + self.ku + i - j);
        if self.n == 0 {
            return;
        }
        for j in 0..self.n - 1 {
            let p = self.ipiv[j];
            if p != j {
                x.swap(j, p);
            }
            let imax = (j + self.kl).min(self.n - 1);
            let xj = x[j];
            if xj != 0.0 {
                for i in j + 1..=imax {
                    x[i] -= self.ab[idx(i, j)] * xj;
                }
            }
        }
        let ubw = self.kl + self.ku;
        for j in (0..self.n).rev() {
            let xj = x[j] / self.ab[idx(j, j)];
            x[j] = xj;
            if xj != 0.0 {
                let i0 = j.saturating_sub(ubw);
                for i in i0..j {
                    x[i] -= self.ab[idx(i, j)] * xj;
                }
            }
        }
    }
}
