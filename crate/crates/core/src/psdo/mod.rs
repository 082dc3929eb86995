//! Fourier-truncated operator algebra on the circle.
//!
//! Sections of the spinor bundle over `S¹` are truncated to the modes `e^{ikx}`, `|k| ≤ K`,
//! tensored with `C^N`. The flat index of `(k, α)` is `(k + K)·N + α`.

pub mod decay;
pub mod dense;
pub mod funcs;
pub mod jacobi;
pub mod quantize;

use std::sync::Arc;

pub use decay::{block_norm, decay_profile, decay_profile_mat, DecayProfile};
pub use dense::CMat;
pub use funcs::{
    exp_i, hermitian_function, hermitize_and_eig, hermitize_and_eig_with, inverse_sqrt, inverse_sqrt_quadrature,
    operator_function, operator_function_complex, sign, EigenBackend, Eigen,
};
pub use quantize::{
    aliasing_fraction, fourier_multiplier, multiplication_matrix, quantize, quantize_scalar, x_points,
};

use crate::error::{Error, Result};
use crate::C64;

/// Inner product `⟨f, W g⟩` with `W = L L*`.
#[derive(Debug)]
pub struct GramFactor {
    pub w: CMat,
    pub l: CMat,
    pub l_inv: CMat,
}

impl GramFactor {
    /// Factor a positive-definite Hermitian gram by Cholesky.
    pub fn from_gram(w: CMat) -> Result<Self> {
        if dense::hermiticity_residual(&w) > 1e-12 {
            return Err(Error::InnerProduct("gram is not Hermitian".into()));
        }
        let l = dense::cholesky_lower(&w)?;
        let l_inv = dense::inverse(&l)?;
        Ok(Self { w, l, l_inv })
    }

    /// Gram `W = L L*` from a given invertible factor.
    pub fn from_factor(l: CMat) -> Result<Self> {
        let l_inv = dense::inverse(&l).map_err(|_| Error::InnerProduct("gram factor is singular".into()))?;
        let w = dense::matmul(&l, &dense::adjoint(&l));
        Ok(Self { w, l, l_inv })
    }
}

#[derive(Debug, Clone)]
pub enum Gram {
    Identity,
    Factored(Arc<GramFactor>),
}

impl Gram {
    pub fn factored(f: GramFactor) -> Self {
        Gram::Factored(Arc::new(f))
    }

    pub fn matrix(&self, dim: usize) -> CMat {
        match self {
            Gram::Identity => dense::identity(dim),
            Gram::Factored(f) => f.w.clone(),
        }
    }

    /// `L* A L^{-*}`, the Hermitian representative of a gram-self-adjoint `A`.
    pub fn to_hat(&self, a: &CMat) -> CMat {
        match self {
            Gram::Identity => a.clone(),
            Gram::Factored(f) => dense::matmul3(&dense::adjoint(&f.l), a, &dense::adjoint(&f.l_inv)),
        }
    }

    /// Inverse of [`Gram::to_hat`]: `L^{-*} Â L*`.
    pub fn from_hat(&self, a: &CMat) -> CMat {
        match self {
            Gram::Identity => a.clone(),
            Gram::Factored(f) => dense::matmul3(&dense::adjoint(&f.l_inv), a, &dense::adjoint(&f.l)),
        }
    }

    pub fn same_as(&self, other: &Gram) -> bool {
        match (self, other) {
            (Gram::Identity, Gram::Identity) => true,
            (Gram::Factored(a), Gram::Factored(b)) => {
                Arc::ptr_eq(a, b) || dense::fro(&(&a.w - &b.w)) <= 1e-14 * dense::fro(&a.w)
            }
            _ => false,
        }
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        match self {
            Gram::Identity => Ok(1.0),
            Gram::Factored(f) => Ok(dense::eigh_faer(&f.w)?.0.first().copied().unwrap_or(1.0)),
        }
    }
}

/// Dense operator on the truncated Fourier × spinor space.
#[derive(Debug, Clone)]
pub struct SpatialOperator {
    pub k_cut: usize,
    pub rank: usize,
    pub mat: CMat,
    pub gram: Gram,
    /// Declared symbol order (metadata only).
    pub order: f64,
}

impl SpatialOperator {
    pub fn new(k_cut: usize, rank: usize, mat: CMat, gram: Gram, order: f64) -> Result<Self> {
        let dim = (2 * k_cut + 1) * rank;
        if mat.nrows() != dim || mat.ncols() != dim {
            return Err(Error::Dimension(format!(
                "operator is {}x{}, basis has dimension {dim}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        if let Gram::Factored(f) = &gram {
            if f.w.nrows() != dim {
                return Err(Error::Dimension(format!("gram is {}x{}, basis has dimension {dim}", f.w.nrows(), f.w.ncols())));
            }
        }
        Ok(Self { k_cut, rank, mat, gram, order })
    }

    pub fn identity(k_cut: usize, rank: usize, gram: Gram) -> Self {
        let dim = (2 * k_cut + 1) * rank;
        Self { k_cut, rank, mat: dense::identity(dim), gram, order: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn index(&self, k: i64, spin: usize) -> usize {
        mode_index(self.k_cut, self.rank, k, spin)
    }

    /// `‖W A − A* W‖_F / ‖W A‖_F`.
    pub fn self_adjoint_residual(&self) -> f64 {
        match &self.gram {
            Gram::Identity => dense::hermiticity_residual(&self.mat),
            Gram::Factored(f) => {
                let wa = dense::matmul(&f.w, &self.mat);
                let aw = dense::matmul(&dense::adjoint(&self.mat), &f.w);
                dense::fro(&(&wa - &aw)) / dense::fro(&wa).max(f64::MIN_POSITIVE)
            }
        }
    }

    pub fn hat(&self) -> CMat {
        self.gram.to_hat(&self.mat)
    }

    pub fn from_hat(k_cut: usize, rank: usize, hat: &CMat, gram: Gram, order: f64) -> Result<Self> {
        let mat = gram.from_hat(hat);
        Self::new(k_cut, rank, mat, gram, order)
    }

    /// Adjoint with respect to the gram: `W^{-1} A* W`.
    pub fn gram_adjoint(&self) -> Self {
        let hat_adj = dense::adjoint(&self.hat());
        let mat = self.gram.from_hat(&hat_adj);
        Self { mat, ..self.clone() }
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.k_cut != other.k_cut || self.rank != other.rank {
            return Err(Error::Dimension("operators live on different truncations".into()));
        }
        if !self.gram.same_as(&other.gram) {
            return Err(Error::InnerProduct("operators carry different grams".into()));
        }
        Ok(())
    }

    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(Self { mat: dense::matmul(&self.mat, &other.mat), order: self.order + other.order, ..self.clone() })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(Self { mat: &self.mat + &other.mat, order: self.order.max(other.order), ..self.clone() })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(Self { mat: &self.mat - &other.mat, order: self.order.max(other.order), ..self.clone() })
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { mat: dense::scale(&self.mat, s), ..self.clone() }
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        dense::mat_vec(&self.mat, v)
    }
}

pub fn mode_index(k_cut: usize, rank: usize, k: i64, spin: usize) -> usize {
    debug_assert!(k.unsigned_abs() as usize <= k_cut && spin < rank);
    (k + k_cut as i64) as usize * rank + spin
}

/// Mode number of a flat index.
pub fn mode_of(k_cut: usize, rank: usize, index: usize) -> i64 {
    (index / rank) as i64 - k_cut as i64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_roundtrip() {
        for k in -3..=3 {
            for s in 0..2 {
                let i = mode_index(3, 2, k, s);
                assert_eq!(mode_of(3, 2, i), k);
                assert_eq!(i % 2, s);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let err = SpatialOperator::new(2, 2, dense::identity(9), Gram::Identity, 0.0).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    #[test]
    fn hat_roundtrip_with_factored_gram() {
        let l = CMat::from_fn(3, 3, |i, j| {
            if i == j {
                C64::new(2.0 + i as f64, 0.0)
            } else if i > j {
                C64::new(0.3, -0.1)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let gram = Gram::factored(GramFactor::from_factor(l).unwrap());
        let a = CMat::from_fn(3, 3, |i, j| C64::new((i * 3 + j) as f64, (i as f64) - (j as f64)));
        let back = gram.from_hat(&gram.to_hat(&a));
        assert!(dense::fro(&(&back - &a)) < 1e-12);
    }
}
