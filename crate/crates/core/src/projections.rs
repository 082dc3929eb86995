//! Gap regularization, spectral projections and the adiabatic correction `P̃± = e^{−iR}P±e^{iR}`.
//!
//! Everything here works on the Hermitian (hat) representatives produced by the reduction
//! module, so projections are orthogonal and `e^{iR}` is unitary; the `ν̃` picture is recovered
//! through the family's gram when operators are handed out.

use crate::error::{Error, Result};
use crate::psdo::dense::{self, CMat};
use crate::psdo::funcs::{eigh, hermitian_function, EigenBackend};
use crate::psdo::{decay_profile_mat, DecayProfile, Gram, SpatialOperator};
use crate::reduction::ReducedHamiltonianFamily;
use crate::timegrid::TimeGrid;
use crate::C64;

/// Largest λ tried before giving up.
pub const LAMBDA_MAX: f64 = 4096.0;
/// Slack on the gap condition `min |spec| ≥ 1`, absorbing rounding in the eigensolver.
pub const GAP_SLACK: f64 = 1e-9;

/// `H̃(t) = H(t) + λχ(λ⁻²h₂)⊗iγ₀` on the grid, with the eigenpairs of each slice.
#[derive(Debug, Clone)]
pub struct RegularizedFamily {
    pub grid: TimeGrid,
    pub k_cut: usize,
    pub rank: usize,
    pub gram: Gram,
    pub lambda: f64,
    pub h_tilde: Vec<CMat>,
    /// Smallest `|eigenvalue|` of `H` before regularization, per node.
    pub min_abs_before: Vec<f64>,
    /// Smallest `|eigenvalue|` of `H̃`, per node.
    pub min_abs: Vec<f64>,
    /// Decay profile of the perturbation, worst over nodes.
    pub perturbation_profile: DecayProfile,
    eigen: Vec<(Vec<f64>, CMat)>,
}

impl RegularizedFamily {
    pub fn len(&self) -> usize {
        self.h_tilde.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h_tilde.is_empty()
    }

    pub fn operator(&self, i: usize) -> Result<SpatialOperator> {
        SpatialOperator::from_hat(self.k_cut, self.rank, &self.h_tilde[i], self.gram.clone(), 1.0)
    }

    pub fn eigenpairs(&self, i: usize) -> (&[f64], &CMat) {
        (&self.eigen[i].0, &self.eigen[i].1)
    }
}

fn min_abs(values: &[f64]) -> f64 {
    values.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min)
}

/// Profile thresholds used for diagnostics at cutoff `k_cut`: `K/16 … K/2`, geometric.
pub fn default_thresholds(k_cut: usize) -> Vec<usize> {
    crate::psdo::decay::geometric_thresholds((k_cut / 16).max(1), (k_cut / 2).max(2), 5)
}

pub fn gap_regularize(fam: &ReducedHamiltonianFamily) -> Result<RegularizedFamily> {
    gap_regularize_with(fam, &default_thresholds(fam.k_cut()))
}

pub fn gap_regularize_with(fam: &ReducedHamiltonianFamily, thresholds: &[usize]) -> Result<RegularizedFamily> {
    let (k_cut, rank) = (fam.k_cut(), fam.rank());
    let base: Vec<(Vec<f64>, CMat)> = fam.h_hat.iter().map(|h| eigh(h, EigenBackend::Auto)).collect::<Result<_>>()?;
    let before: Vec<f64> = base.iter().map(|e| min_abs(&e.0)).collect();
    let mut lambda = 0.0;
    let mut eigen = base;
    let mut h_tilde = fam.h_hat.clone();
    let mut worst = before.iter().copied().fold(f64::INFINITY, f64::min);
    let mut pert_profile = DecayProfile::from_norms(thresholds.to_vec(), vec![0.0; thresholds.len()]);
    while worst < 1.0 - GAP_SLACK {
        lambda = if lambda == 0.0 { 2.0 } else { 2.0 * lambda };
        if lambda > LAMBDA_MAX {
            return Err(Error::Regularization { lambda, min_abs: worst });
        }
        h_tilde.clear();
        eigen.clear();
        pert_profile = DecayProfile::from_norms(thresholds.to_vec(), vec![0.0; thresholds.len()]);
        for (h, &t) in fam.h_hat.iter().zip(&fam.grid.nodes) {
            let p = fam.assembler.regularizer(t, lambda)?;
            pert_profile = pert_profile.worst(&decay_profile_mat(&p, k_cut, rank, thresholds));
            let ht = h + &p;
            eigen.push(eigh(&ht, EigenBackend::Auto)?);
            h_tilde.push(ht);
        }
        worst = eigen.iter().map(|e| min_abs(&e.0)).fold(f64::INFINITY, f64::min);
        log::debug!("gap regularization: lambda = {lambda}, min |spec| = {worst}");
    }
    let min_abs_after = eigen.iter().map(|e| min_abs(&e.0)).collect();
    Ok(RegularizedFamily {
        grid: fam.grid.clone(),
        k_cut,
        rank,
        gram: fam.assembler.gram(),
        lambda,
        h_tilde,
        min_abs_before: before,
        min_abs: min_abs_after,
        perturbation_profile: pert_profile,
        eigen,
    })
}

/// Projection family `P̃±(t)` with its generator and defect diagnostics.
#[derive(Debug, Clone)]
pub struct ProjectorFamily {
    pub grid: TimeGrid,
    pub k_cut: usize,
    pub rank: usize,
    pub gram: Gram,
    pub order: usize,
    /// Uncorrected spectral projections `P⁺(t)` (hat picture).
    pub p0_plus: Vec<CMat>,
    /// Corrected `P̃⁺(t)` (hat picture).
    pub p_plus: Vec<CMat>,
    /// Generator `R(t)` of the last iteration (zero at order 0).
    pub generator: Vec<CMat>,
    /// `Δ(t) = ∂tP̃⁺ + [P̃⁺, iH̃(t)]` at the final order (hat picture).
    pub defect: Vec<CMat>,
    /// Defect profile (worst over nodes) for each order `0..=order`.
    pub defect_profiles: Vec<DecayProfile>,
    pub thresholds: Vec<usize>,
    /// Orders at which the defect grew compared with the previous order.
    pub non_contraction: Vec<usize>,
}

impl ProjectorFamily {
    pub fn len(&self) -> usize {
        self.p_plus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_plus.is_empty()
    }

    pub fn dim(&self) -> usize {
        (2 * self.k_cut + 1) * self.rank
    }

    /// `P̃⁻ = 1 − P̃⁺` in the hat picture.
    pub fn minus_hat(&self, i: usize) -> CMat {
        &dense::identity(self.dim()) - &self.p_plus[i]
    }

    /// `P̃⁺(t_i)` in the `ν̃` picture.
    pub fn plus(&self, i: usize) -> Result<SpatialOperator> {
        SpatialOperator::from_hat(self.k_cut, self.rank, &self.p_plus[i], self.gram.clone(), 0.0)
    }

    /// `P̃⁻(t_i) = 1 − P̃⁺(t_i)` in the `ν̃` picture, exact complement.
    pub fn minus(&self, i: usize) -> Result<SpatialOperator> {
        let p = self.plus(i)?;
        Ok(SpatialOperator { mat: &dense::identity(self.dim()) - &p.mat, ..p })
    }

    pub fn final_profile(&self) -> &DecayProfile {
        self.defect_profiles.last().expect("at least the order-0 profile")
    }

    /// `max(‖P̃⁺² − P̃⁺‖, ‖P̃⁻² − P̃⁻‖, hat-picture hermiticity)` over the grid (Frobenius, relative to `‖P̃⁺‖`).
    pub fn projection_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.len() {
            let p = &self.p_plus[i];
            let m = self.minus_hat(i);
            let scale = dense::fro(p).max(1.0);
            worst = worst.max(dense::fro(&(&dense::matmul(p, p) - p)) / scale);
            worst = worst.max(dense::fro(&(&dense::matmul(&m, &m) - &m)) / scale);
            worst = worst.max(dense::fro(&(p - &dense::adjoint(p))) / scale);
        }
        worst
    }

    /// `max(‖P⁺RP⁺‖, ‖P⁻RP⁻‖)` relative to `‖R‖`, using the uncorrected projections.
    pub fn generator_block_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let id = dense::identity(self.dim());
        for (p, r) in self.p0_plus.iter().zip(&self.generator) {
            let scale = dense::fro(r);
            if scale == 0.0 {
                continue;
            }
            let m = &id - p;
            worst = worst.max(dense::fro(&dense::matmul3(p, r, p)) / scale);
            worst = worst.max(dense::fro(&dense::matmul3(&m, r, &m)) / scale);
        }
        worst
    }
}

/// Projection onto the positive spectral subspace from eigenpairs.
pub fn positive_projection(values: &[f64], vectors: &CMat) -> CMat {
    let d: Vec<C64> = values.iter().map(|&v| C64::new(if v > 0.0 { 1.0 } else { 0.0 }, 0.0)).collect();
    dense::reconstruct(vectors, &d)
}

/// `P± = ½(1 ± sign(H̃))` on every node (order 0).
pub fn spectral_projections(reg: &RegularizedFamily) -> Result<ProjectorFamily> {
    spectral_projections_with(reg, &default_thresholds(reg.k_cut))
}

pub fn spectral_projections_with(reg: &RegularizedFamily, thresholds: &[usize]) -> Result<ProjectorFamily> {
    for (i, m) in reg.min_abs.iter().enumerate() {
        if *m < 1.0 - GAP_SLACK {
            return Err(Error::Gap(format!("node {i}: min |spec| = {m} inside (−1, 1)")));
        }
    }
    let p: Vec<CMat> = (0..reg.len()).map(|i| {
        let (v, u) = reg.eigenpairs(i);
        positive_projection(v, u)
    }).collect();
    let dp = reg.grid.differentiate_family(&p)?;
    let defect: Vec<CMat> = dp
        .into_iter()
        .zip(p.iter().zip(&reg.h_tilde))
        .map(|(d, (p, h))| &d + &commutator_i(p, h))
        .collect();
    let profile = worst_profile(&defect, reg.k_cut, reg.rank, thresholds);
    let dim = (2 * reg.k_cut + 1) * reg.rank;
    Ok(ProjectorFamily {
        grid: reg.grid.clone(),
        k_cut: reg.k_cut,
        rank: reg.rank,
        gram: reg.gram.clone(),
        order: 0,
        p0_plus: p.clone(),
        p_plus: p,
        generator: vec![dense::zeros(dim, dim); reg.len()],
        defect,
        defect_profiles: vec![profile],
        thresholds: thresholds.to_vec(),
        non_contraction: vec![],
    })
}

/// `[P, iH] = i(PH − HP)`.
fn commutator_i(p: &CMat, h: &CMat) -> CMat {
    dense::scale(&(&dense::matmul(p, h) - &dense::matmul(h, p)), C64::new(0.0, 1.0))
}

fn worst_profile(family: &[CMat], k_cut: usize, rank: usize, thresholds: &[usize]) -> DecayProfile {
    family
        .iter()
        .map(|d| decay_profile_mat(d, k_cut, rank, thresholds))
        .reduce(|a, b| a.worst(&b))
        .expect("nonempty family")
}

/// Scalar decay check of `P⁺H̃ − εP⁺` at node `i` (order-0 behaviour expected).
pub fn symbol_check_profile(fam: &ReducedHamiltonianFamily, reg: &RegularizedFamily, proj: &ProjectorFamily, i: usize) -> DecayProfile {
    let p = &proj.p0_plus[i];
    let a = &dense::matmul(p, &reg.h_tilde[i]) - &dense::matmul(&fam.eps[i], p);
    decay_profile_mat(&a, proj.k_cut, proj.rank, &proj.thresholds)
}

/// `R = P⁺SP⁻ + P⁻S*P⁺`.
pub fn generator_from(p: &CMat, s: &CMat) -> CMat {
    let m = &dense::identity(p.nrows()) - p;
    let a = dense::matmul3(p, s, &m);
    &a + &dense::adjoint(&a)
}

/// Adiabatic fixed-point iteration to order `r ≥ 1`.
///
/// With `E = e^{iR}` the conjugated Hamiltonian is `H̃_R = EH̃E* + (1/i)(∂tE)E*` and the
/// defect of `P̃⁺ = E*P⁺E` equals `E*(∂tP⁺ + [P⁺, iH̃_R])E`. Each step removes the leading
/// off-diagonal part of that defect through `S ← S − (2ε)⁻¹P⁺DP⁻`.
pub fn adiabatic_correct(proj0: &ProjectorFamily, reg: &RegularizedFamily, fam: &ReducedHamiltonianFamily, r: usize) -> Result<ProjectorFamily> {
    adiabatic_correct_observed(proj0, reg, fam, r, &mut |_, _| Ok(()))
}

/// As [`adiabatic_correct`], handing the corrected family `P̃⁺` of every intermediate order
/// `1..r` to `observer` (the final order is returned).
pub fn adiabatic_correct_observed(
    proj0: &ProjectorFamily,
    reg: &RegularizedFamily,
    fam: &ReducedHamiltonianFamily,
    r: usize,
    observer: &mut dyn FnMut(usize, &[CMat]) -> Result<()>,
) -> Result<ProjectorFamily> {
    if r == 0 {
        return Err(Error::Dimension("correction order must be at least 1".into()));
    }
    if proj0.order != 0 {
        return Err(Error::Dimension("adiabatic_correct expects the order-0 family".into()));
    }
    let grid = &proj0.grid;
    let (k_cut, rank) = (proj0.k_cut, proj0.rank);
    let thresholds = proj0.thresholds.clone();
    let p = &proj0.p0_plus;
    let id = dense::identity(proj0.dim());
    let dp = grid.differentiate_family(p)?;
    let inv2eps: Vec<CMat> =
        fam.eps.iter().map(|e| hermitian_function(e, |x| C64::new(0.5 / x, 0.0))).collect::<Result<_>>()?;
    // S₁ = −(2ε)⁻¹ ∂tP⁺
    let mut s: Vec<CMat> = inv2eps.iter().zip(&dp).map(|(a, d)| dense::scale_real(&dense::matmul(a, d), -1.0)).collect();
    let mut profiles = vec![proj0.defect_profiles[0].clone()];
    let mut non_contraction = vec![];
    let mut generator = vec![];
    let mut e_family = vec![];
    let mut defect = vec![];
    for j in 1..=r {
        generator = p.iter().zip(&s).map(|(p, s)| generator_from(p, s)).collect();
        e_family = generator
            .iter()
            .map(|rr| hermitian_function(rr, |x| C64::from_polar(1.0, x)))
            .collect::<Result<Vec<_>>>()?;
        let de = grid.differentiate_family(&e_family)?;
        let mut d_j = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            let e_adj = dense::adjoint(&e_family[i]);
            let conj = dense::matmul3(&e_family[i], &reg.h_tilde[i], &e_adj);
            let drift = dense::scale(&dense::matmul(&de[i], &e_adj), C64::new(0.0, -1.0));
            let h_r = &conj + &drift;
            d_j.push(&dp[i] + &commutator_i(&p[i], &h_r));
        }
        drop(de);
        defect = d_j
            .iter()
            .zip(&e_family)
            .map(|(d, e)| dense::matmul3(&dense::adjoint(e), d, e))
            .collect::<Vec<_>>();
        let prof = worst_profile(&defect, k_cut, rank, &thresholds);
        let prev = profiles.last().unwrap();
        let (a, b) = (prev.norms.last().copied().unwrap_or(0.0), prof.norms.last().copied().unwrap_or(0.0));
        if b > a {
            log::warn!("adiabatic iteration {j}: defect at K'={} grew from {a:e} to {b:e}; scenario may be too rough for K={k_cut}", thresholds.last().unwrap());
            non_contraction.push(j);
        }
        profiles.push(prof);
        if j < r {
            let p_j: Vec<CMat> = p.iter().zip(&e_family).map(|(p, e)| dense::matmul3(&dense::adjoint(e), p, e)).collect();
            observer(j, &p_j)?;
            for i in 0..grid.len() {
                let m = &id - &p[i];
                let upd = dense::matmul(&inv2eps[i], &dense::matmul3(&p[i], &d_j[i], &m));
                s[i] = &s[i] - &upd;
            }
        }
    }
    let p_plus = p.iter().zip(&e_family).map(|(p, e)| dense::matmul3(&dense::adjoint(e), p, e)).collect();
    Ok(ProjectorFamily {
        grid: grid.clone(),
        k_cut,
        rank,
        gram: proj0.gram.clone(),
        order: r,
        p0_plus: p.clone(),
        p_plus,
        generator,
        defect,
        defect_profiles: profiles,
        thresholds,
        non_contraction,
    })
}

/// The defect of a projection family measured directly: `∂tP̃⁺ + [P̃⁺, iH̃]` with spectral `∂t`.
pub fn direct_defect(proj: &ProjectorFamily, reg: &RegularizedFamily) -> Result<Vec<CMat>> {
    let d = proj.grid.differentiate_family(&proj.p_plus)?;
    Ok(d.into_iter().zip(proj.p_plus.iter().zip(&reg.h_tilde)).map(|(d, (p, h))| &d + &commutator_i(p, h)).collect())
}

/// `max ‖e^{−iR}(1 − P⁺)e^{iR} − (1 − P̃⁺)‖`: correcting `P⁻` with the same generator.
pub fn complement_symmetry_residual(proj: &ProjectorFamily) -> Result<f64> {
    let id = dense::identity(proj.dim());
    let mut worst: f64 = 0.0;
    for i in 0..proj.len() {
        let e = hermitian_function(&proj.generator[i], |x| C64::from_polar(1.0, x))?;
        let m0 = &id - &proj.p0_plus[i];
        let corrected = dense::matmul3(&dense::adjoint(&e), &m0, &e);
        worst = worst.max(dense::max_abs(&(&corrected - &proj.minus_hat(i))));
    }
    Ok(worst)
}
