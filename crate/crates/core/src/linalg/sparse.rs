use std::sync::Arc;

use crate::error::{Error, Result};

/// Square sparse matrix in compressed row storage. Column indices are
/// strictly increasing within each row. The structural pattern is shared
/// behind `Arc` so that matrices assembled on the same mesh can be combined
/// entry-wise without re-sorting.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Arc<[usize]>,
    col_idx: Arc<[usize]>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut per_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            assert!(i < n && j < n, "triplet ({i}, {j}) outside {n}x{n}");
            per_row[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in &mut per_row {
            row.sort_unstable_by_key(|&(j, _)| j);
            let mut last: Option<usize> = None;
            for &(j, v) in row.iter() {
                if last == Some(j) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    vals.push(v);
                    last = Some(j);
                }
            }
            row_ptr.push(col_idx.len());
        }
        SparseMatrix {
            n,
            row_ptr: row_ptr.into(),
            col_idx: col_idx.into(),
            vals,
        }
    }

    /// An all-zero matrix on an existing structural pattern.
    pub fn zeros_on_pattern(row_ptr: Arc<[usize]>, col_idx: Arc<[usize]>) -> Self {
        let n = row_ptr.len() - 1;
        let nnz = col_idx.len();
        SparseMatrix { n, row_ptr, col_idx, vals: vec![0.0; nnz] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.vals
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.vals
    }

    pub fn pattern(&self) -> (Arc<[usize]>, Arc<[usize]>) {
        (Arc::clone(&self.row_ptr), Arc::clone(&self.col_idx))
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        (&self.col_idx[lo..hi], &self.vals[lo..hi])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    /// Adds `v` to the (i, j) entry, which must exist in the pattern.
    pub fn add_at(&mut self, i: usize, j: usize, v: f64) {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        match self.col_idx[lo..hi].binary_search(&j) {
            Ok(p) => self.vals[lo + p] += v,
            Err(_) => panic!("entry ({i}, {j}) not present in sparsity pattern"),
        }
    }

    /// y = A x
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let lo = self.row_ptr[i];
            let hi = self.row_ptr[i + 1];
            let mut acc = 0.0;
            for p in lo..hi {
                acc += self.vals[p] * x[self.col_idx[p]];
            }
            y[i] = acc;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    /// Quadratic/bilinear form x^T A y.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        let mut acc = 0.0;
        for i in 0..self.n {
            let lo = self.row_ptr[i];
            let hi = self.row_ptr[i + 1];
            let mut row = 0.0;
            for p in lo..hi {
                row += self.vals[p] * y[self.col_idx[p]];
            }
            acc += x[i] * row;
        }
        acc
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.vals {
            *v *= c;
        }
    }

    /// Linear combination of matrices sharing one structural pattern.
    pub fn linear_combination(terms: &[(f64, &SparseMatrix)]) -> SparseMatrix {
        assert!(!terms.is_empty());
        let first = terms[0].1;
        let mut out = SparseMatrix::zeros_on_pattern(
            Arc::clone(&first.row_ptr),
            Arc::clone(&first.col_idx),
        );
        for &(c, m) in terms {
            assert!(
                Arc::ptr_eq(&m.row_ptr, &first.row_ptr) && Arc::ptr_eq(&m.col_idx, &first.col_idx),
                "linear_combination requires matrices assembled on a shared pattern"
            );
            for (o, v) in out.vals.iter_mut().zip(&m.vals) {
                *o += c * v;
            }
        }
        out
    }

    /// Overwrites the values with a linear combination, reusing the allocation.
    pub fn set_linear_combination(&mut self, terms: &[(f64, &SparseMatrix)]) {
        self.vals.fill(0.0);
        for &(c, m) in terms {
            assert!(
                Arc::ptr_eq(&m.row_ptr, &self.row_ptr) && Arc::ptr_eq(&m.col_idx, &self.col_idx),
                "set_linear_combination requires a shared pattern"
            );
            for (o, v) in self.vals.iter_mut().zip(&m.vals) {
                *o += c * v;
            }
        }
    }

    /// Maximum relative asymmetry max |A_ij - A_ji| / scale.
    pub fn asymmetry(&self) -> f64 {
        let mut scale = 0.0f64;
        for &v in &self.vals {
            scale = scale.max(v.abs());
        }
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j > i {
                    worst = worst.max((v - self.get(j, i)).abs());
                }
            }
        }
        worst / scale
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        self.asymmetry() <= rel_tol
    }

    /// (kl, ku): lower and upper bandwidth.
    pub fn bandwidth(&self) -> (usize, usize) {
        let mut kl = 0usize;
        let mut ku = 0usize;
        for i in 0..self.n {
            let (cols, _) = self.row(i);
            for &j in cols {
                if j < i {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        (kl, ku)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let (_, vals) = self.row(i);
                vals.iter().sum()
            })
            .collect()
    }

    pub fn to_dense(&self) -> crate::linalg::dense::DenseMatrix {
        let mut d = crate::linalg::dense::DenseMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                d[(i, j)] += v;
            }
        }
        d
    }

    /// Validates the storage invariants (strictly increasing column indices).
    pub fn validate(&self) -> Result<()> {
        if self.row_ptr.len() != self.n + 1 {
            return Err(Error::InvalidParameter("row pointer length".into()));
        }
        for i in 0..self.n {
            let (cols, _) = self.row(i);
            for w in cols.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::InvalidParameter(format!(
                        "columns not strictly increasing in row {i}"
                    )));
                }
            }
        }
        Ok(())
    }
}
