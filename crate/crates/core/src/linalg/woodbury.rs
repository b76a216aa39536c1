//! Rank-k corrected solves. The state update couples a fixed SPD operator
//! with a rank-k reflection along the directors; with B prefactored, each
//! step costs k+1 backsolves plus a dense k-by-k capacitance system.

use crate::error::{Error, Result};
use crate::linalg::dense::DenseMatrix;
use crate::linalg::factor::Factorization;

/// Solves (B - U W^T) x = b given a factorization of B and the low-rank
/// columns U, W via
///   x = B^-1 b + B^-1 U (I_k - W^T B^-1 U)^-1 W^T B^-1 b.
/// Errors if the k-by-k capacitance matrix is singular to working precision.
pub fn woodbury_solve(
    b_fact: &Factorization,
    u_cols: &[Vec<f64>],
    w_cols: &[Vec<f64>],
    b: &[f64],
) -> Result<Vec<f64>> {
    let n = b_fact.n();
    assert_eq!(b.len(), n);
    assert_eq!(u_cols.len(), w_cols.len());
    let k = u_cols.len();
    let y = b_fact.solve(b);
    if k == 0 {
        return Ok(y);
    }
    let z: Vec<Vec<f64>> = u_cols
        .iter()
        .map(|u| {
            assert_eq!(u.len(), n);
            b_fact.solve(u)
        })
        .collect();
    let mut cap = DenseMatrix::zeros(k, k);
    for i in 0..k {
        assert_eq!(w_cols[i].len(), n);
        for j in 0..k {
            let wz: f64 = w_cols[i].iter().zip(&z[j]).map(|(a, b)| a * b).sum();
            cap[(i, j)] = if i == j { 1.0 - wz } else { -wz };
        }
    }
    let t: Vec<f64> = (0..k)
        .map(|i| w_cols[i].iter().zip(&y).map(|(a, b)| a * b).sum())
        .collect();
    let s = cap.solve(&t).map_err(|_| Error::CapacitanceSingular)?;
    let mut x = y;
    for j in 0..k {
        let sj = s[j];
        for (xi, zi) in x.iter_mut().zip(&z[j]) {
            *xi += sj * zi;
        }
    }
    Ok(x)
}
