//! Thin layer over `faer` for the dense complex kernels the rest of the crate needs.

use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::C64;

pub type CMat = Mat<C64>;

pub fn zeros(rows: usize, cols: usize) -> CMat {
    Mat::zeros(rows, cols)
}

pub fn identity(n: usize) -> CMat {
    Mat::identity(n, n)
}

pub fn from_rows(rows: &[Vec<C64>]) -> CMat {
    let n = rows.len();
    let m = if n == 0 { 0 } else { rows[0].len() };
    Mat::from_fn(n, m, |i, j| rows[i][j])
}

pub fn from_real_rows(rows: &[&[f64]]) -> CMat {
    let n = rows.len();
    let m = if n == 0 { 0 } else { rows[0].len() };
    Mat::from_fn(n, m, |i, j| C64::new(rows[i][j], 0.0))
}

pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    a * b
}

pub fn matmul3(a: &CMat, b: &CMat, c: &CMat) -> CMat {
    &(a * b) * c
}

pub fn adjoint(a: &CMat) -> CMat {
    a.adjoint().to_owned()
}

pub fn add(a: &CMat, b: &CMat) -> CMat {
    a + b
}

pub fn sub(a: &CMat, b: &CMat) -> CMat {
    a - b
}

pub fn scale(a: &CMat, s: C64) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

pub fn scale_real(a: &CMat, s: f64) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

/// `½(A + A*)`.
pub fn hermitian_part(a: &CMat) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
}

/// Frobenius norm.
pub fn fro(a: &CMat) -> f64 {
    a.norm_l2()
}

pub fn max_abs(a: &CMat) -> f64 {
    a.norm_max()
}

/// `‖A − A*‖_F / max(‖A‖_F, tiny)`.
pub fn hermiticity_residual(a: &CMat) -> f64 {
    let mut num = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            num += (a[(i, j)] - a[(j, i)].conj()).norm_sqr();
        }
    }
    num.sqrt() / fro(a).max(f64::MIN_POSITIVE)
}

/// Kronecker product `a ⊗ b` with `a` the outer (slow) index.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac, br, bc) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    Mat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Hermitian eigendecomposition via faer. Eigenvalues ascending, eigenvectors in columns.
pub fn eigh_faer(a: &CMat) -> Result<(Vec<f64>, CMat)> {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Structure(format!("eigensolver failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let values: Vec<f64> = (0..a.nrows()).map(|i| s[i].re).collect();
    Ok(sort_pairs(values, evd.U().to_owned()))
}

pub(crate) fn sort_pairs(values: Vec<f64>, vectors: CMat) -> (Vec<f64>, CMat) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    if order.iter().enumerate().all(|(i, &j)| i == j) {
        return (values, vectors);
    }
    let v = Mat::from_fn(vectors.nrows(), vectors.ncols(), |i, j| vectors[(i, order[j])]);
    (order.iter().map(|&i| values[i]).collect(), v)
}

/// General inverse by partially pivoted LU.
pub fn inverse(a: &CMat) -> Result<CMat> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!("inverse of {}x{} matrix", a.nrows(), a.ncols())));
    }
    let inv = a.partial_piv_lu().inverse();
    let check = fro(&(&inv * a - identity(a.nrows())));
    if !check.is_finite() || check > 1e-6 * (a.nrows() as f64).sqrt() {
        return Err(Error::Structure(format!("matrix is numerically singular (residual {check:e})")));
    }
    Ok(inv)
}

/// Lower Cholesky factor `L` with `A = L L*`.
pub fn cholesky_lower(a: &CMat) -> Result<CMat> {
    let llt = a
        .llt(Side::Lower)
        .map_err(|e| Error::InnerProduct(format!("gram not positive definite: {e:?}")))?;
    Ok(llt.L().to_owned())
}

pub fn mat_vec(a: &CMat, v: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); a.nrows()];
    for j in 0..a.ncols() {
        let vj = v[j];
        if vj == C64::new(0.0, 0.0) {
            continue;
        }
        let col = a.col(j);
        for (i, o) in out.iter_mut().enumerate() {
            *o += col[i] * vj;
        }
    }
    out
}

pub fn column(a: &CMat, j: usize) -> Vec<C64> {
    (0..a.nrows()).map(|i| a[(i, j)]).collect()
}

pub fn from_columns(cols: &[Vec<C64>]) -> CMat {
    let n = cols.first().map_or(0, |c| c.len());
    Mat::from_fn(n, cols.len(), |i, j| cols[j][i])
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `U diag(d) U*` for real `d`.
pub fn reconstruct(vectors: &CMat, d: &[C64]) -> CMat {
    let n = vectors.nrows();
    let scaled = Mat::from_fn(n, d.len(), |i, j| vectors[(i, j)] * d[j]);
    &scaled * vectors.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kron_matches_block_layout() {
        let a = from_real_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let k = kron(&a, &b);
        assert_eq!(k[(0, 1)], C64::new(1.0, 0.0));
        assert_eq!(k[(2, 1)], C64::new(3.0, 0.0));
        assert_eq!(k[(3, 2)], C64::new(4.0, 0.0));
        assert_eq!(k[(1, 2)], C64::new(2.0, 0.0));
    }

    #[test]
    fn inverse_rejects_singular() {
        let a = from_real_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(inverse(&a).is_err());
    }

    #[test]
    fn faer_eigh_sorted() {
        let a = from_real_rows(&[&[3.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 2.0]]);
        let (v, _) = eigh_faer(&a).unwrap();
        assert_eq!(v, vec![1.0, 2.0, 3.0]);
    }
}
