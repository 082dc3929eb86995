//! Gamma matrices for `Cl(1, d)` with `η = diag(−1, 1, …, 1)`.
//!
//! The `n = 2` seed is `γ₀ = [[0,1],[−1,0]]`, `γ₁ = [[0,1],[1,0]]`. The representation for
//! `n + 2` is built from the one for `n` as `γ_a ⊗ σ₃` together with `1 ⊗ σ₁` and `1 ⊗ σ₂`.
//! This keeps `γ₀` anti-Hermitian and the spatial gammas Hermitian, so `β = iγ₀` works in
//! every dimension.

use crate::error::{Error, Result};
use crate::psdo::dense::{self, CMat};
use crate::psdo::jacobi::jacobi_eigh;
use crate::C64;

/// Charge conjugation `ψ ↦ K·conj(ψ)`.
#[derive(Debug, Clone)]
pub struct Kappa {
    pub k: CMat,
}

impl Kappa {
    pub fn apply(&self, psi: &[C64]) -> Vec<C64> {
        let conj: Vec<C64> = psi.iter().map(|z| z.conj()).collect();
        dense::mat_vec(&self.k, &conj)
    }
}

#[derive(Debug, Clone)]
pub struct GammaRep {
    pub n: usize,
    pub rank: usize,
    pub gammas: Vec<CMat>,
    pub beta: CMat,
    pub kappa: Option<Kappa>,
    pub eta: Vec<f64>,
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn pauli() -> [CMat; 3] {
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    [
        dense::from_rows(&[vec![z, o], vec![o, z]]),
        dense::from_rows(&[vec![z, -i], vec![i, z]]),
        dense::from_rows(&[vec![o, z], vec![z, -o]]),
    ]
}

pub fn build_gamma_rep(n: usize) -> Result<GammaRep> {
    if n % 2 != 0 || !(2..=8).contains(&n) {
        return Err(Error::Dimension(format!("spacetime dimension must be even and in 2..=8, got {n}")));
    }
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    let mut gammas = vec![dense::from_rows(&[vec![z, o], vec![-o, z]]), dense::from_rows(&[vec![z, o], vec![o, z]])];
    let [s1, s2, s3] = pauli();
    while gammas.len() < n {
        let id = dense::identity(gammas[0].nrows());
        let mut next: Vec<CMat> = gammas.iter().map(|g| dense::kron(g, &s3)).collect();
        next.push(dense::kron(&id, &s1));
        next.push(dense::kron(&id, &s2));
        gammas = next;
    }
    let rank = gammas[0].nrows();
    let beta = dense::scale(&gammas[0], c(0.0, 1.0));
    let mut eta = vec![1.0; n];
    eta[0] = -1.0;
    let kappa = if matches!(n % 8, 2 | 4) { Some(find_kappa(&gammas)?) } else { None };
    Ok(GammaRep { n, rank, gammas, beta, kappa, eta })
}

/// Real `K` with `K·conj(γ_a) = γ_a·K` and `K² = 1`, from the null space of the linear conditions.
fn find_kappa(gammas: &[CMat]) -> Result<Kappa> {
    let r = gammas[0].nrows();
    let unknowns = r * r;
    // Each condition (K conj(γ) − γ K)_{ij} = 0 splits into real and imaginary rows.
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for g in gammas {
        for i in 0..r {
            for j in 0..r {
                let mut re = vec![0.0; unknowns];
                let mut im = vec![0.0; unknowns];
                for l in 0..r {
                    // (K conj γ)_{ij} = Σ_l K_{il} conj(γ_{lj})
                    let v = g[(l, j)].conj();
                    re[i * r + l] += v.re;
                    im[i * r + l] += v.im;
                    // (γ K)_{ij} = Σ_l γ_{il} K_{lj}
                    let w = g[(i, l)];
                    re[l * r + j] -= w.re;
                    im[l * r + j] -= w.im;
                }
                rows.push(re);
                rows.push(im);
            }
        }
    }
    let normal = CMat::from_fn(unknowns, unknowns, |a, b| c(rows.iter().map(|row| row[a] * row[b]).sum(), 0.0));
    let (vals, vecs) = jacobi_eigh(&normal)?;
    if vals[0].abs() > 1e-10 {
        return Err(Error::Structure("no real charge conjugation exists for this representation".into()));
    }
    // Fix the overall phase so that the largest entry is real positive.
    let (mut bi, mut bj, mut best) = (0, 0, 0.0);
    for i in 0..r {
        for j in 0..r {
            let v = vecs[(i * r + j, 0)].norm();
            if v > best + 1e-12 {
                best = v;
                bi = i;
                bj = j;
            }
        }
    }
    let ph = vecs[(bi * r + bj, 0)];
    let ph = ph / ph.norm();
    let k = CMat::from_fn(r, r, |i, j| c((vecs[(i * r + j, 0)] / ph).re, 0.0));
    let k2 = dense::matmul(&k, &k);
    let s = k2[(0, 0)].re;
    if s <= 0.0 || dense::fro(&(&k2 - dense::scale_real(&dense::identity(r), s))) > 1e-10 * s {
        return Err(Error::Structure("charge conjugation candidate does not square to a positive multiple of 1".into()));
    }
    let k = dense::scale_real(&k, 1.0 / s.sqrt());
    Ok(Kappa { k: CMat::from_fn(r, r, |i, j| c(k[(i, j)].re.round_to(1e-15), 0.0)) })
}

trait RoundTo {
    fn round_to(self, eps: f64) -> f64;
}

impl RoundTo for f64 {
    fn round_to(self, eps: f64) -> f64 {
        if self.abs() < eps {
            0.0
        } else {
            self
        }
    }
}

impl GammaRep {
    pub fn gamma0(&self) -> &CMat {
        &self.gammas[0]
    }

    /// `γ^a = η^{aa} γ_a`.
    pub fn gamma_upper(&self, a: usize) -> CMat {
        dense::scale_real(&self.gammas[a], self.eta[a])
    }

    pub fn gamma_of_vector(&self, v: &[f64]) -> Result<CMat> {
        if v.len() != self.n {
            return Err(Error::Dimension(format!("vector has length {}, expected {}", v.len(), self.n)));
        }
        let mut out = dense::zeros(self.rank, self.rank);
        for (a, &va) in v.iter().enumerate() {
            if va != 0.0 {
                out = &out + &dense::scale_real(&self.gammas[a], va);
            }
        }
        Ok(out)
    }

    /// `iβγ₀`, the positive form that defines the spinor inner product on a slice.
    pub fn i_beta_gamma0(&self) -> CMat {
        dense::scale(&dense::matmul(&self.beta, self.gamma0()), c(0.0, 1.0))
    }

    /// Lorentz matrix `Ad(a)` with `a γ(v) a⁻¹ = γ(Ad(a) v)`.
    pub fn ad_action(&self, a: &CMat) -> Result<Vec<Vec<f64>>> {
        if a.nrows() != self.rank || a.ncols() != self.rank {
            return Err(Error::Dimension(format!("element is {}x{}, spinor rank is {}", a.nrows(), a.ncols(), self.rank)));
        }
        let inv = dense::inverse(a).map_err(|_| Error::Structure("element is not invertible".into()))?;
        let nf = self.rank as f64;
        let mut ad = vec![vec![0.0; self.n]; self.n];
        for col in 0..self.n {
            let x = dense::matmul3(a, &self.gammas[col], &inv);
            let scale = dense::fro(&x).max(1.0);
            let mut rebuilt = dense::zeros(self.rank, self.rank);
            for row in 0..self.n {
                // tr(γ_b γ_c) = N η_bc
                let prod = dense::matmul(&self.gammas[row], &x);
                let tr: C64 = (0..self.rank).map(|i| prod[(i, i)]).sum();
                let coef = tr * (self.eta[row] / nf);
                if coef.im.abs() > 1e-10 * scale {
                    return Err(Error::Structure("conjugated gamma has a non-real coefficient".into()));
                }
                ad[row][col] = coef.re;
                rebuilt = &rebuilt + &dense::scale_real(&self.gammas[row], coef.re);
            }
            if dense::fro(&(&rebuilt - &x)) > 1e-10 * scale {
                return Err(Error::Structure("element does not normalize the span of the gammas".into()));
            }
        }
        Ok(ad)
    }
}

/// Largest violation of `γ_aγ_b + γ_bγ_a = 2η_ab` (Frobenius).
pub fn clifford_residual(rep: &GammaRep) -> f64 {
    let id = dense::identity(rep.rank);
    let mut worst: f64 = 0.0;
    for a in 0..rep.n {
        for b in 0..rep.n {
            let ac = &dense::matmul(&rep.gammas[a], &rep.gammas[b]) + &dense::matmul(&rep.gammas[b], &rep.gammas[a]);
            let target = if a == b { dense::scale_real(&id, 2.0 * rep.eta[a]) } else { dense::zeros(rep.rank, rep.rank) };
            worst = worst.max(dense::fro(&(&ac - &target)));
        }
    }
    worst
}

/// Largest violation among `β = β*` and `γ_a* β = −β γ_a`.
pub fn beta_residual(rep: &GammaRep) -> f64 {
    let mut worst = dense::fro(&(&rep.beta - &dense::adjoint(&rep.beta)));
    for g in &rep.gammas {
        let lhs = dense::matmul(&dense::adjoint(g), &rep.beta);
        let rhs = dense::matmul(&rep.beta, g);
        worst = worst.max(dense::fro(&(&lhs + &rhs)));
    }
    worst
}

/// Largest violation among `K conj(γ_a) = γ_a K` and `K conj(K) = 1`; `None` without κ.
pub fn kappa_residual(rep: &GammaRep) -> Option<f64> {
    let kappa = rep.kappa.as_ref()?;
    let k = &kappa.k;
    let conj = |m: &CMat| CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].conj());
    let mut worst = dense::fro(&(&dense::matmul(k, &conj(k)) - &dense::identity(rep.rank)));
    for g in &rep.gammas {
        worst = worst.max(dense::fro(&(&dense::matmul(k, &conj(g)) - &dense::matmul(g, k))));
    }
    Some(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn n2_seed_matrices() {
        let rep = build_gamma_rep(2).unwrap();
        assert_eq!(rep.rank, 2);
        assert_eq!(rep.gammas[0][(0, 1)], c(1.0, 0.0));
        assert_eq!(rep.gammas[0][(1, 0)], c(-1.0, 0.0));
        assert_eq!(rep.gammas[1][(0, 1)], c(1.0, 0.0));
        assert_eq!(rep.gammas[1][(1, 0)], c(1.0, 0.0));
        assert_eq!(rep.beta[(0, 1)], c(0.0, 1.0));
        assert_eq!(rep.beta[(1, 0)], c(0.0, -1.0));
        let k = &rep.kappa.as_ref().unwrap().k;
        assert!(dense::fro(&(k - &dense::identity(2))) < 1e-15);
        assert_eq!(clifford_residual(&rep), 0.0);
        assert_eq!(beta_residual(&rep), 0.0);
        assert_eq!(kappa_residual(&rep), Some(0.0));
    }

    #[test]
    fn odd_or_large_dimension_rejected() {
        assert!(matches!(build_gamma_rep(3), Err(Error::Dimension(_))));
        assert!(matches!(build_gamma_rep(10), Err(Error::Dimension(_))));
        assert!(matches!(build_gamma_rep(0), Err(Error::Dimension(_))));
    }

    #[test]
    fn kappa_presence_follows_dimension() {
        for n in [2, 4, 6, 8] {
            let rep = build_gamma_rep(n).unwrap();
            assert_eq!(rep.kappa.is_some(), matches!(n % 8, 2 | 4), "n = {n}");
            assert_eq!(rep.rank, 1 << (n / 2));
        }
    }

    #[test]
    fn gamma_of_vector_basics() {
        let rep = build_gamma_rep(4).unwrap();
        let zero = rep.gamma_of_vector(&[0.0; 4]).unwrap();
        assert_eq!(dense::fro(&zero), 0.0);
        let g0 = rep.gamma_of_vector(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(dense::fro(&(&g0 - &rep.gammas[0])), 0.0);
        assert!(matches!(rep.gamma_of_vector(&[1.0, 0.0]), Err(Error::Dimension(_))));
    }

    #[test]
    fn ad_of_identity_and_minus_identity() {
        let rep = build_gamma_rep(4).unwrap();
        for s in [1.0, -1.0] {
            let a = dense::scale_real(&dense::identity(4), s);
            let ad = rep.ad_action(&a).unwrap();
            for (i, row) in ad.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    assert_eq!(v, if i == j { 1.0 } else { 0.0 });
                }
            }
        }
    }

    #[test]
    fn ad_rejects_non_normalizer() {
        let rep = build_gamma_rep(2).unwrap();
        let a = dense::from_real_rows(&[&[1.0, 0.5], &[0.0, 1.0]]);
        assert!(matches!(rep.ad_action(&a), Err(Error::Structure(_))));
    }
}
