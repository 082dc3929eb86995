//! High-frequency block norms, the finite-rank stand-in for smoothing remainders.

use serde::Serialize;

use super::dense::{self, CMat};
use super::{mode_of, SpatialOperator};
use crate::C64;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct DecayProfile {
    pub thresholds: Vec<usize>,
    /// `μ(K') = ‖Q_{K'} A Q_{K'}‖₂`.
    pub norms: Vec<f64>,
    /// Least-squares slope of `log μ` against `log K'` over the top decade of thresholds.
    pub slope: f64,
}

impl DecayProfile {
    pub fn from_norms(thresholds: Vec<usize>, norms: Vec<f64>) -> Self {
        let top = thresholds.iter().copied().max().unwrap_or(1) as f64;
        let slope = fit_slope(&thresholds, &norms, |k| k as f64 >= top / 10.0);
        Self { thresholds, norms, slope }
    }

    /// Fitted slope restricted to `lo ≤ K' ≤ hi`.
    pub fn slope_between(&self, lo: usize, hi: usize) -> f64 {
        fit_slope(&self.thresholds, &self.norms, |k| k >= lo && k <= hi)
    }

    pub fn norm_at(&self, k_prime: usize) -> Option<f64> {
        self.thresholds.iter().position(|&k| k == k_prime).map(|i| self.norms[i])
    }

    /// Pointwise maximum of two profiles on the same thresholds.
    pub fn worst(&self, other: &DecayProfile) -> DecayProfile {
        let norms = self.norms.iter().zip(&other.norms).map(|(a, b)| a.max(*b)).collect();
        DecayProfile::from_norms(self.thresholds.clone(), norms)
    }
}

fn fit_slope(thresholds: &[usize], norms: &[f64], keep: impl Fn(usize) -> bool) -> f64 {
    let pts: Vec<(f64, f64)> = thresholds
        .iter()
        .zip(norms)
        .filter(|(k, _)| **k > 0 && keep(**k))
        .map(|(&k, &m)| ((k as f64).ln(), m.max(f64::MIN_POSITIVE).ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Geometric thresholds between `lo` and `hi` (inclusive, deduplicated).
pub fn geometric_thresholds(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..count)
        .map(|i| {
            let f = if count == 1 { 0.0 } else { i as f64 / (count - 1) as f64 };
            ((lo as f64) * ((hi as f64) / (lo as f64)).powf(f)).round() as usize
        })
        .collect();
    out.dedup();
    out
}

/// Spectral norm of the compression of `a` to modes `|k| ≥ k_prime`.
pub fn block_norm(a: &CMat, k_cut: usize, rank: usize, k_prime: usize) -> f64 {
    let idx: Vec<usize> = (0..a.nrows()).filter(|&i| mode_of(k_cut, rank, i).unsigned_abs() as usize >= k_prime).collect();
    if idx.is_empty() {
        return 0.0;
    }
    let b = CMat::from_fn(idx.len(), idx.len(), |i, j| a[(idx[i], idx[j])]);
    spectral_norm(&b)
}

/// Largest singular value. Exact (via eigenvalues of `B*B`) for small blocks, Lanczos otherwise.
pub fn spectral_norm(b: &CMat) -> f64 {
    let n = b.nrows();
    if n == 0 {
        return 0.0;
    }
    let fro = dense::fro(b);
    if fro == 0.0 {
        return 0.0;
    }
    if n <= 48 {
        let bb = dense::matmul(&dense::adjoint(b), b);
        let (vals, _) = super::jacobi::jacobi_eigh(&bb).expect("jacobi on a Hermitian Gram matrix");
        return vals.last().copied().unwrap_or(0.0).max(0.0).sqrt();
    }
    lanczos_top(b, fro)
}

fn lanczos_top(b: &CMat, fro: f64) -> f64 {
    let n = b.ncols();
    let steps = n.min(80);
    let bh = dense::adjoint(b);
    // Deterministic start vector with all modes present.
    let mut q: Vec<C64> = (0..n).map(|i| C64::new(1.0 + 0.37 * ((i * 7919) % 101) as f64 / 101.0, 0.11 * (i % 13) as f64)).collect();
    let nq = dense::vec_norm(&q);
    q.iter_mut().for_each(|z| *z /= nq);
    let mut basis: Vec<Vec<C64>> = vec![q];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut last = 0.0;
    for j in 0..steps {
        let w1 = dense::mat_vec(b, &basis[j]);
        let mut w = dense::mat_vec(&bh, &w1);
        let a = dense::dot(&basis[j], &w).re;
        alpha.push(a);
        // Full reorthogonalization, twice.
        for _ in 0..2 {
            for v in &basis {
                let c = dense::dot(v, &w);
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= c * vi;
                }
            }
        }
        let top = tridiagonal_top(&alpha, &beta);
        let bnorm = dense::vec_norm(&w);
        if j > 2 && ((top - last).abs() <= 1e-14 * top || bnorm <= 1e-14 * fro * fro) {
            return top.max(0.0).sqrt();
        }
        last = top;
        if bnorm <= 1e-14 * fro * fro || j + 1 == steps {
            return top.max(0.0).sqrt();
        }
        beta.push(bnorm);
        basis.push(w.iter().map(|z| z / bnorm).collect());
    }
    last.max(0.0).sqrt()
}

fn tridiagonal_top(alpha: &[f64], beta: &[f64]) -> f64 {
    let m = alpha.len();
    let t = CMat::from_fn(m, m, |i, j| {
        if i == j {
            C64::new(alpha[i], 0.0)
        } else if i + 1 == j {
            C64::new(beta[i], 0.0)
        } else if j + 1 == i {
            C64::new(beta[j], 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let (vals, _) = super::jacobi::jacobi_eigh(&t).expect("jacobi on a tridiagonal matrix");
    vals.last().copied().unwrap_or(0.0)
}

pub fn decay_profile(a: &SpatialOperator, thresholds: &[usize]) -> DecayProfile {
    decay_profile_mat(&a.mat, a.k_cut, a.rank, thresholds)
}

pub fn decay_profile_mat(a: &CMat, k_cut: usize, rank: usize, thresholds: &[usize]) -> DecayProfile {
    let norms = thresholds.iter().map(|&k| block_norm(a, k_cut, rank, k)).collect();
    DecayProfile::from_norms(thresholds.to_vec(), norms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psdo::jacobi::jacobi_eigh;

    #[test]
    fn identity_profile_is_flat() {
        let a = dense::identity(2 * 21);
        let p = decay_profile_mat(&a, 10, 2, &[1, 2, 4, 8]);
        assert!(p.norms.iter().all(|&m| (m - 1.0).abs() < 1e-14));
        assert!(p.slope.abs() < 1e-12);
    }

    #[test]
    fn derivative_profile_is_k() {
        let k_cut = 40;
        let d = super::super::fourier_multiplier(k_cut, |k| C64::new(k as f64, 0.0));
        let p = decay_profile_mat(&d, k_cut, 1, &[5, 10, 20]);
        assert!(p.norms.iter().all(|&m| (m - k_cut as f64).abs() < 1e-10));
    }

    #[test]
    fn lanczos_agrees_with_dense_route() {
        let n = 120;
        let b = CMat::from_fn(n, n, |i, j| C64::new(((i * 31 + j * 17) % 23) as f64 / 23.0 - 0.5, ((i + 3 * j) % 7) as f64 / 14.0) * (1.0 / (1.0 + (i as f64 - j as f64).abs())));
        let (vals, _) = jacobi_eigh(&dense::matmul(&dense::adjoint(&b), &b)).unwrap();
        let exact = vals.last().unwrap().sqrt();
        let lz = lanczos_top(&b, dense::fro(&b));
        assert!((exact - lz).abs() <= 1e-10 * exact, "{exact} {lz}");
    }

    #[test]
    fn geometric_thresholds_cover_range() {
        assert_eq!(geometric_thresholds(16, 64, 5), vec![16, 23, 32, 45, 64]);
    }
}
