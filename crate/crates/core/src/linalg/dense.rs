//! Small dense kernels: LU with partial pivoting for capacitance systems,
//! a cyclic Jacobi eigensolver, a symmetric tridiagonal QL solver for the
//! Lanczos projections, and a Hessenberg QR eigenvalue routine for the
//! nonsymmetric path.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows[0].len();
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c);
            m.data[i * c..(i + 1) * c].copy_from_slice(row);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self[(i, k)];
                if aik == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += aik * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    /// Solves A x = b by Gaussian elimination with partial pivoting.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(self.rows, self.cols);
        assert_eq!(b.len(), self.rows);
        let n = self.rows;
        let mut a = self.data.clone();
        let mut x = b.to_vec();
        let mut scale = 0.0f64;
        for &v in &a {
            scale = scale.max(v.abs());
        }
        let tiny = f64::EPSILON * scale.max(1.0) * n as f64;
        for k in 0..n {
            let mut p = k;
            let mut best = a[k * n + k].abs();
            for i in k + 1..n {
                let c = a[i * n + k].abs();
                if c > best {
                    best = c;
                    p = i;
                }
            }
            if best <= tiny {
                return Err(Error::FactorizationFailed(format!(
                    "dense pivot {best:.3e} at column {k}"
                )));
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                x.swap(k, p);
            }
            let piv = a[k * n + k];
            for i in k + 1..n {
                let l = a[i * n + k] / piv;
                if l == 0.0 {
                    continue;
                }
                for j in k + 1..n {
                    a[i * n + j] -= l * a[k * n + j];
                }
                x[i] -= l * x[k];
            }
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= a[i * n + j] * x[j];
            }
            x[i] = acc / a[i * n + i];
        }
        Ok(x)
    }

    /// Lower Cholesky factor; errors if the matrix is not positive definite.
    pub fn cholesky(&self) -> Result<DenseMatrix> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut l = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d <= 0.0 {
                return Err(Error::FactorizationFailed(format!(
                    "dense Cholesky: nonpositive pivot {d:.3e} at {j}"
                )));
            }
            let dj = d.sqrt();
            l[(j, j)] = dj;
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / dj;
            }
        }
        Ok(l)
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Cyclic Jacobi eigensolver for a symmetric matrix. Returns eigenvalues in
/// ascending order and the matching eigenvectors as columns.
pub fn jacobi_eigh(a: &DenseMatrix) -> (Vec<f64>, DenseMatrix) {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    let mut m = a.clone();
    let mut v = DenseMatrix::identity(n);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if off.sqrt() < 1e-300 || off.sqrt() < 1e-15 * frobenius(&m) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].partial_cmp(&m[(j, j)]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, new)] = v[(k, old)];
        }
    }
    (values, vectors)
}

fn frobenius(m: &DenseMatrix) -> f64 {
    m.data.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Eigen-decomposition of a symmetric tridiagonal matrix by the implicit QL
/// method with Wilkinson shifts. `diag` has length n, `off` length n-1.
/// Returns ascending eigenvalues and eigenvectors as columns.
pub fn tridiag_eigh(diag: &[f64], off: &[f64]) -> Result<(Vec<f64>, DenseMatrix)> {
    let n = diag.len();
    assert_eq!(off.len(), n.saturating_sub(1));
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(off);
    let mut z = DenseMatrix::identity(n);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(Error::EigenNotConverged { iterations: 50, converged: l, requested: n });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0f64, 1.0f64);
            let mut p = 0.0f64;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    f = z[(k, i + 1)];
                    z[(k, i + 1)] = s * z[(k, i)] + c * f;
                    z[(k, i)] = c * z[(k, i)] - s * f;
                }
            }
            if r == 0.0 && m > l + 1 {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, new)] = z[(k, old)];
        }
    }
    Ok((values, vectors))
}

/// All eigenvalues (re, im) of a small real matrix: Householder reduction to
/// Hessenberg form followed by the shifted QR iteration. Only used for the
/// projected nonsymmetric operators, so no eigenvectors are produced.
pub fn eigenvalues_real(a: &DenseMatrix) -> Result<Vec<(f64, f64)>> {
    assert_eq!(a.rows, a.cols);
    let mut h = a.clone();
    hessenberg_in_place(&mut h);
    hqr_eigenvalues(&mut h)
}

fn hessenberg_in_place(a: &mut DenseMatrix) {
    let n = a.rows;
    for k in 1..n.saturating_sub(1) {
        let mut x = 0.0f64;
        let mut i0 = k;
        for i in k..n {
            if a[(i, k - 1)].abs() > x.abs() {
                x = a[(i, k - 1)];
                i0 = i;
            }
        }
        if i0 != k {
            for j in k - 1..n {
                let t = a[(i0, j)];
                a[(i0, j)] = a[(k, j)];
                a[(k, j)] = t;
            }
            for i in 0..n {
                let t = a[(i, i0)];
                a[(i, i0)] = a[(i, k)];
                a[(i, k)] = t;
            }
        }
        if x != 0.0 {
            for i in k + 1..n {
                let mut y = a[(i, k - 1)];
                if y != 0.0 {
                    y /= x;
                    a[(i, k - 1)] = y;
                    for j in k..n {
                        let akj = a[(k, j)];
                        a[(i, j)] -= y * akj;
                    }
                    for jj in 0..n {
                        let v = a[(jj, i)];
                        a[(jj, k)] += y * v;
                    }
                }
            }
        }
    }
    // zero the sub-subdiagonal multipliers left by the elimination
    for i in 2..n {
        for j in 0..i - 1 {
            a[(i, j)] = 0.0;
        }
    }
}

/// Eigenvalues of an upper Hessenberg matrix; classic double-shift QR.
fn hqr_eigenvalues(a: &mut DenseMatrix) -> Result<Vec<(f64, f64)>> {
    let nn = a.rows;
    let mut out = Vec::with_capacity(nn);
    let mut anorm = 0.0f64;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            anorm += a[(i, j)].abs();
        }
    }
    if anorm == 0.0 {
        return Ok(vec![(0.0, 0.0); nn]);
    }
    let mut n = nn as i64 - 1;
    let mut t = 0.0f64;
    let mut total_its = 0usize;
    while n >= 0 {
        let mut its = 0;
        loop {
            let mut l = n;
            while l >= 1 {
                let s = a[((l - 1) as usize, (l - 1) as usize)].abs() + a[(l as usize, l as usize)].abs();
                let s = if s == 0.0 { anorm } else { s };
                if a[(l as usize, (l - 1) as usize)].abs() <= f64::EPSILON * s {
                    break;
                }
                l -= 1;
            }
            let x = a[(n as usize, n as usize)];
            if l == n {
                out.push((x + t, 0.0));
                n -= 1;
                break;
            }
            let y = a[((n - 1) as usize, (n - 1) as usize)];
            let w = a[(n as usize, (n - 1) as usize)] * a[((n - 1) as usize, n as usize)];
            if l == n - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let z = q.abs().sqrt();
                let x2 = x + t;
                if q >= 0.0 {
                    let z = p + z.copysign(p);
                    out.push((x2 + z, 0.0));
                    out.push(if z != 0.0 { (x2 - w / z, 0.0) } else { (x2 + z, 0.0) });
                } else {
                    out.push((x2 + p, z));
                    out.push((x2 + p, -z));
                }
                n -= 2;
                break;
            }
            if its == 30 {
                return Err(Error::EigenNotConverged {
                    iterations: total_its,
                    converged: out.len(),
                    requested: nn,
                });
            }
            let (mut x, mut y, mut w) = (x, y, w);
            if its == 10 || its == 20 {
                // exceptional shift
                t += x;
                for i in 0..=n as usize {
                    a[(i, i)] -= x;
                }
                let s = a[(n as usize, (n - 1) as usize)].abs()
                    + a[((n - 1) as usize, (n - 2) as usize)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            total_its += 1;
            let mut m = n - 2;
            let (mut p, mut q, mut r) = (0.0f64, 0.0f64, 0.0f64);
            while m >= l {
                let z = a[(m as usize, m as usize)];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[((m + 1) as usize, m as usize)] + a[(m as usize, (m + 1) as usize)];
                q = a[((m + 1) as usize, (m + 1) as usize)] - z - rr - ss;
                r = a[((m + 2) as usize, (m + 1) as usize)];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[(m as usize, (m - 1) as usize)].abs() * (q.abs() + r.abs());
                let v = p.abs()
                    * (a[((m - 1) as usize, (m - 1) as usize)].abs()
                        + a[(m as usize, m as usize)].abs()
                        + a[((m + 1) as usize, (m + 1) as usize)].abs());
                if u <= f64::EPSILON * v {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=n {
                a[(i as usize, (i - 2) as usize)] = 0.0;
                if i != m + 2 {
                    a[(i as usize, (i - 3) as usize)] = 0.0;
                }
            }
            let mut k = m;
            while k <= n - 1 {
                if k != m {
                    p = a[(k as usize, (k - 1) as usize)];
                    q = a[((k + 1) as usize, (k - 1) as usize)];
                    r = if k != n - 1 { a[((k + 2) as usize, (k - 1) as usize)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = (p * p + q * q + r * r).sqrt().copysign(p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            let v = a[(k as usize, (k - 1) as usize)];
                            a[(k as usize, (k - 1) as usize)] = -v;
                        }
                    } else {
                        a[(k as usize, (k - 1) as usize)] = -s * x;
                    }
                    p += s;
                    let px = p / s;
                    let qy = q / s;
                    let rz = r / s;
                    let q2 = q / p;
                    let r2 = r / p;
                    for j in k as usize..=n as usize {
                        let mut pj = a[(k as usize, j)] + q2 * a[((k + 1) as usize, j)];
                        if k != n - 1 {
                            pj += r2 * a[((k + 2) as usize, j)];
                            a[((k + 2) as usize, j)] -= pj * rz;
                        }
                        a[((k + 1) as usize, j)] -= pj * qy;
                        a[(k as usize, j)] -= pj * px;
                    }
                    let mmin = if n < k + 3 { n } else { k + 3 };
                    for i in l as usize..=mmin as usize {
                        let mut pi = px * a[(i, k as usize)] + qy * a[(i, (k + 1) as usize)];
                        if k != n - 1 {
                            pi += rz * a[(i, (k + 2) as usize)];
                            a[(i, (k + 2) as usize)] -= pi * r2;
                        }
                        a[(i, (k + 1) as usize)] -= pi * q2;
                        a[(i, k as usize)] -= pi;
                    }
                }
                k += 1;
            }
        }
    }
    Ok(out)
}
