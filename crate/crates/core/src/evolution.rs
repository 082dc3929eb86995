//! Cauchy evolution for `∂t − iH(t)` and the Green time kernels.
//!
//! One step of the exponential midpoint rule is `exp(iΔt Ĥ(t + Δt/2))`, formed from a Hermitian
//! eigendecomposition, so every step is exactly unitary in the hat picture (gram-unitary in the
//! `ν̃` picture). Propagators to and from the reference slice are stored at the time-grid nodes;
//! anything else is composed from them or stepped directly.

use crate::error::{Error, Result};
use crate::psdo::dense::{self, CMat};
use crate::psdo::funcs::{eigh, EigenBackend};
use crate::psdo::{decay, fourier_multiplier, Gram};
use crate::reduction::HamiltonianAssembler;
use crate::timegrid::TimeGrid;
use crate::C64;

/// Step caches above this many bytes are not kept; steps are recomputed on demand instead.
pub const STEP_CACHE_BYTES: usize = 256 << 20;

/// `Ĥ(t) + λχ(λ⁻²h₂)⊗iγ₀` at arbitrary times (λ = 0 gives the unregularized Hamiltonian).
#[derive(Debug, Clone)]
pub struct HamiltonianSource {
    pub assembler: HamiltonianAssembler,
    pub lambda: f64,
}

impl HamiltonianSource {
    pub fn new(assembler: HamiltonianAssembler, lambda: f64) -> Self {
        Self { assembler, lambda }
    }

    pub fn at(&self, t: f64) -> Result<CMat> {
        let h = self.assembler.h_hat(t)?;
        if self.lambda == 0.0 {
            Ok(h)
        } else {
            Ok(&h + &self.assembler.regularizer(t, self.lambda)?)
        }
    }

    pub fn dim(&self) -> usize {
        self.assembler.dim()
    }
}

/// `exp(iΔt·H)` for Hermitian `H`.
pub fn exp_step(h: &CMat, dt: f64) -> Result<CMat> {
    let (vals, vecs) = eigh(h, EigenBackend::Auto)?;
    let d: Vec<C64> = vals.iter().map(|&l| C64::from_polar(1.0, dt * l)).collect();
    Ok(dense::reconstruct(&vecs, &d))
}

/// One-step rule. Both are exponentials of a Hermitian matrix, hence exactly unitary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    /// `exp(iΔt H(t + Δt/2))`, second order.
    #[default]
    Midpoint,
    /// Fourth-order Magnus: `exp(iΔt[½(H₁ + H₂) + i(√3/12)Δt[H₂, H₁]])` at the two Gauss points.
    Magnus4,
    /// Sixth-order Magnus on three Gauss points (one exponential, nested commutators).
    Magnus6,
}

fn comm(a: &CMat, b: &CMat) -> CMat {
    &dense::matmul(a, b) - &dense::matmul(b, a)
}

/// One step from `a` to `b` with the chosen rule.
pub fn step_between(source: &HamiltonianSource, a: f64, b: f64, integrator: Integrator) -> Result<CMat> {
    let dt = b - a;
    match integrator {
        Integrator::Midpoint => exp_step(&source.at(0.5 * (a + b))?, dt),
        Integrator::Magnus4 => {
            let c = 3f64.sqrt() / 6.0;
            let h1 = source.at(a + (0.5 - c) * dt)?;
            let h2 = source.at(a + (0.5 + c) * dt)?;
            let comm = &dense::matmul(&h2, &h1) - &dense::matmul(&h1, &h2);
            let corr = dense::scale(&comm, C64::new(0.0, 3f64.sqrt() / 12.0 * dt));
            let heff = dense::hermitian_part(&(&dense::scale_real(&(&h1 + &h2), 0.5) + &corr));
            exp_step(&heff, dt)
        }
        Integrator::Magnus6 => {
            // Generator written for A = iH; Ω = iΔt·H_eff with H_eff Hermitian.
            let c = 15f64.sqrt() / 10.0;
            let i = C64::new(0.0, 1.0);
            let a1 = dense::scale(&source.at(a + (0.5 - c) * dt)?, i * dt);
            let a2 = dense::scale(&source.at(a + 0.5 * dt)?, i * dt);
            let a3 = dense::scale(&source.at(a + (0.5 + c) * dt)?, i * dt);
            let b1 = a2;
            let b2 = dense::scale_real(&(&a3 - &a1), 15f64.sqrt() / 3.0);
            let b3 = dense::scale_real(&(&(&a3 - &dense::scale_real(&b1, 2.0)) + &a1), 10.0 / 3.0);
            let c1 = comm(&b1, &b2);
            let c2 = dense::scale_real(&comm(&b1, &(&dense::scale_real(&b3, 2.0) + &c1)), -1.0 / 60.0);
            let left = &(&dense::scale_real(&b1, -20.0) - &b3) + &c1;
            let right = &b2 + &c2;
            let omega = &(&b1 + &dense::scale_real(&b3, 1.0 / 12.0)) + &dense::scale_real(&comm(&left, &right), 1.0 / 240.0);
            let heff = dense::hermitian_part(&dense::scale(&omega, C64::new(0.0, -1.0 / dt)));
            exp_step(&heff, dt)
        }
    }
}

/// `‖S*S − 1‖_F / √dim`.
pub fn unitarity_drift(s: &CMat) -> f64 {
    let n = s.nrows();
    dense::fro(&(&dense::matmul(&dense::adjoint(s), s) - &dense::identity(n))) / (n as f64).sqrt()
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub source: HamiltonianSource,
    pub grid: TimeGrid,
    pub mesh: Vec<f64>,
    /// Mesh index of each grid node.
    pub node_mesh: Vec<usize>,
    pub ref_index: usize,
    /// `𝒰̂(t_i, t_ref)` for every node `i` (hat picture).
    pub from_ref: Vec<CMat>,
    /// Worst per-step unitarity drift seen while building.
    pub max_step_drift: f64,
    pub integrator: Integrator,
    steps: Option<Vec<CMat>>,
}

impl Evolution {
    /// Builds the node propagators on a mesh refining `grid` with steps at most `max_step`.
    pub fn new(source: HamiltonianSource, grid: &TimeGrid, max_step: f64) -> Result<Self> {
        Self::with_integrator(source, grid, max_step, Integrator::Midpoint)
    }

    pub fn with_integrator(source: HamiltonianSource, grid: &TimeGrid, max_step: f64, integrator: Integrator) -> Result<Self> {
        let (mesh, node_mesh) = grid.refine(max_step)?;
        let ref_index = grid.reference_index();
        let dim = source.dim();
        let cache = (mesh.len() - 1) * dim * dim * 16 <= STEP_CACHE_BYTES;
        let mut this = Self {
            source,
            grid: grid.clone(),
            mesh,
            node_mesh,
            ref_index,
            from_ref: vec![],
            max_step_drift: 0.0,
            integrator,
            steps: None,
        };
        let mut steps = Vec::with_capacity(if cache { this.mesh.len() - 1 } else { 0 });
        let mut drift: f64 = 0.0;
        // Forward sweep from the reference node, then backward; only node propagators are kept.
        let r_mesh = this.node_mesh[ref_index];
        let mut at_mesh: Vec<Option<CMat>> = vec![None; this.mesh.len()];
        let is_node: Vec<bool> = (0..this.mesh.len()).map(|q| this.node_mesh.contains(&q)).collect();
        at_mesh[r_mesh] = Some(dense::identity(dim));
        let mut all_steps: Vec<Option<CMat>> = vec![None; this.mesh.len() - 1];
        let mut u = dense::identity(dim);
        for q in r_mesh..this.mesh.len() - 1 {
            let s = this.step(q)?;
            drift = drift.max(unitarity_drift(&s));
            u = dense::matmul(&s, &u);
            if is_node[q + 1] {
                at_mesh[q + 1] = Some(u.clone());
            }
            if cache {
                all_steps[q] = Some(s);
            }
        }
        let mut u = dense::identity(dim);
        for q in (0..r_mesh).rev() {
            let s = this.step(q)?;
            drift = drift.max(unitarity_drift(&s));
            u = dense::matmul(&dense::adjoint(&s), &u);
            if is_node[q] {
                at_mesh[q] = Some(u.clone());
            }
            if cache {
                all_steps[q] = Some(s);
            }
        }
        this.from_ref = this.node_mesh.iter().map(|&q| at_mesh[q].take().expect("node propagator computed")).collect();
        if cache {
            steps.extend(all_steps.into_iter().map(|s| s.expect("all steps computed")));
            this.steps = Some(steps);
        }
        this.max_step_drift = drift;
        Ok(this)
    }

    pub fn dim(&self) -> usize {
        self.source.dim()
    }

    /// One-step factor from `mesh[q]` to `mesh[q+1]`.
    pub fn step(&self, q: usize) -> Result<CMat> {
        if let Some(s) = &self.steps {
            return Ok(s[q].clone());
        }
        step_between(&self.source, self.mesh[q], self.mesh[q + 1], self.integrator)
    }

    fn mesh_index(&self, t: f64) -> Result<usize> {
        self.mesh
            .iter()
            .position(|&s| (s - t).abs() <= 1e-12 * (1.0 + t.abs()))
            .ok_or(Error::OffGrid { time: t })
    }

    /// `𝒰̂(t_to, t_from)` by stepping directly along the mesh.
    pub fn propagate(&self, t_from: f64, t_to: f64) -> Result<CMat> {
        let (a, b) = (self.mesh_index(t_from)?, self.mesh_index(t_to)?);
        let mut u = dense::identity(self.dim());
        if b >= a {
            for q in a..b {
                u = dense::matmul(&self.step(q)?, &u);
            }
        } else {
            for q in (b..a).rev() {
                u = dense::matmul(&dense::adjoint(&self.step(q)?), &u);
            }
        }
        Ok(u)
    }

    /// Apply `𝒰̂(t_to, t_from)` to a vector, returning the state at every mesh point passed.
    pub fn evolve_vector(&self, t_from: f64, t_to: f64, v: &[C64]) -> Result<Vec<(f64, Vec<C64>)>> {
        let (a, b) = (self.mesh_index(t_from)?, self.mesh_index(t_to)?);
        let mut out = vec![(self.mesh[a], v.to_vec())];
        let mut cur = v.to_vec();
        if b >= a {
            for q in a..b {
                cur = dense::mat_vec(&self.step(q)?, &cur);
                out.push((self.mesh[q + 1], cur.clone()));
            }
        } else {
            for q in (b..a).rev() {
                cur = dense::mat_vec(&dense::adjoint(&self.step(q)?), &cur);
                out.push((self.mesh[q], cur.clone()));
            }
        }
        Ok(out)
    }

    /// `𝒰̂(t_i, t_j)` composed through the reference slice.
    pub fn between_nodes(&self, i: usize, j: usize) -> CMat {
        dense::matmul(&self.from_ref[i], &dense::adjoint(&self.from_ref[j]))
    }

    /// Largest `‖⟨D⟩^m 𝒰(t_i, t_ref) ⟨D⟩^{−m}‖₂` over nodes, for each requested `m`.
    pub fn sobolev_norms(&self, orders: &[i32]) -> Vec<(i32, f64)> {
        let k = self.source.assembler.k_cut;
        let id = dense::identity(self.source.assembler.rep.rank);
        orders
            .iter()
            .map(|&m| {
                let w = dense::kron(&fourier_multiplier(k, |q| C64::new((1.0 + (q * q) as f64).powf(0.5 * m as f64), 0.0)), &id);
                let w_inv = dense::kron(&fourier_multiplier(k, |q| C64::new((1.0 + (q * q) as f64).powf(-0.5 * m as f64), 0.0)), &id);
                let worst = self
                    .from_ref
                    .iter()
                    .map(|u| decay::spectral_norm(&dense::matmul3(&w, u, &w_inv)))
                    .fold(0.0, f64::max);
                (m, worst)
            })
            .collect()
    }

    /// Discrete residual of `(∂t − iĤ)ψ = 0` along a mesh trajectory started at `t_from`,
    /// using centred differences at step midpoints (second order in the step).
    pub fn homogeneity_residual(&self, t_from: f64, t_to: f64, v: &[C64]) -> Result<f64> {
        let traj = self.evolve_vector(t_from, t_to, v)?;
        let mut worst: f64 = 0.0;
        for w in traj.windows(2) {
            let (ta, a) = (&w[0].0, &w[0].1);
            let (tb, b) = (&w[1].0, &w[1].1);
            let dt = tb - ta;
            let mid: Vec<C64> = a.iter().zip(b).map(|(x, y)| (x + y) * 0.5).collect();
            let hv = dense::mat_vec(&self.source.at(0.5 * (ta + tb))?, &mid);
            let r: Vec<C64> = (0..a.len()).map(|q| (b[q] - a[q]) / dt - C64::new(0.0, 1.0) * hv[q]).collect();
            worst = worst.max(dense::vec_norm(&r) / dense::vec_norm(&mid).max(f64::MIN_POSITIVE));
        }
        Ok(worst)
    }
}

/// Which side of the diagonal a coincident kernel is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `t = s⁺`
    After,
    /// `t = s⁻`
    Before,
}

fn theta(i: usize, j: usize, grid: &TimeGrid, side: Side) -> f64 {
    let (t, s) = (grid.nodes[i], grid.nodes[j]);
    if t > s || (i == j && side == Side::After) {
        1.0
    } else {
        0.0
    }
}

/// Full evolution `U(t,s) = ρ_t 𝒰(t,s) ρ_s⁻¹` on raw slice data and the time kernels built from it.
#[derive(Debug, Clone)]
pub struct EvolutionKernels {
    pub evolution: Evolution,
    /// `T_{ρ_t} ⊗ 1` and its exact inverse at each node.
    pub rho: Vec<CMat>,
    pub rho_inv: Vec<CMat>,
    /// `1 ⊗ γ₀` on the truncated basis.
    pub gamma0: CMat,
    gram: Gram,
}

impl EvolutionKernels {
    pub fn new(evolution: Evolution) -> Result<Self> {
        let a = &evolution.source.assembler;
        let mut rho = Vec::with_capacity(evolution.grid.len());
        let mut rho_inv = Vec::with_capacity(evolution.grid.len());
        for &t in &evolution.grid.nodes {
            let r = a.density(t)?;
            rho_inv.push(dense::inverse(&r)?);
            rho.push(r);
        }
        let gamma0 = dense::kron(&dense::identity(2 * a.k_cut + 1), &a.rep.gammas[0]);
        let gram = a.gram();
        Ok(Self { evolution, rho, rho_inv, gamma0, gram })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.evolution.grid
    }

    pub fn ref_index(&self) -> usize {
        self.evolution.ref_index
    }

    /// Hat-picture propagator to the `ν̃` picture.
    fn to_nu(&self, u_hat: &CMat) -> CMat {
        self.gram.from_hat(u_hat)
    }

    /// `𝒰(t_i, t_j)` in the `ν̃` picture, composed through the reference slice.
    pub fn reduced(&self, i: usize, j: usize) -> CMat {
        self.to_nu(&self.evolution.between_nodes(i, j))
    }

    /// `U(t_i, t_j)`.
    pub fn cauchy(&self, i: usize, j: usize) -> CMat {
        dense::matmul3(&self.rho[i], &self.reduced(i, j), &self.rho_inv[j])
    }

    /// `U(t_i, t_j)` with `𝒰` stepped directly from `t_j` to `t_i`.
    pub fn cauchy_direct(&self, i: usize, j: usize) -> Result<CMat> {
        let g = &self.evolution.grid.nodes;
        let u = self.to_nu(&self.evolution.propagate(g[j], g[i])?);
        Ok(dense::matmul3(&self.rho[i], &u, &self.rho_inv[j]))
    }

    pub fn g_ret(&self, i: usize, j: usize, side: Side) -> CMat {
        let th = theta(i, j, self.grid(), side);
        if th == 0.0 {
            return dense::zeros(self.gamma0.nrows(), self.gamma0.ncols());
        }
        dense::matmul(&self.cauchy(i, j), &self.gamma0)
    }

    pub fn g_adv(&self, i: usize, j: usize, side: Side) -> CMat {
        let th = 1.0 - theta(i, j, self.grid(), side);
        if th == 0.0 {
            return dense::zeros(self.gamma0.nrows(), self.gamma0.ncols());
        }
        dense::scale_real(&dense::matmul(&self.cauchy(i, j), &self.gamma0), -1.0)
    }

    /// `G = G_ret − G_adv`.
    pub fn g(&self, i: usize, j: usize) -> CMat {
        dense::matmul(&self.cauchy(i, j), &self.gamma0)
    }

    /// `U(t_i, 0) X U(0, t_j) γ₀` for a slice operator `X` at the reference slice.
    pub fn sandwich(&self, x: &CMat, i: usize, j: usize) -> CMat {
        let r = self.ref_index();
        let left = self.cauchy(i, r);
        let right = self.cauchy(r, j);
        dense::matmul(&dense::matmul3(&left, x, &right), &self.gamma0)
    }

    /// `Λ±(t_i, t_j) = iU(t_i,0)c±U(0,t_j)γ₀`.
    pub fn lambda(&self, c: &CMat, i: usize, j: usize) -> CMat {
        dense::scale(&self.sandwich(c, i, j), C64::new(0.0, 1.0))
    }

    /// `G_F(t_i, t_j) = U(t_i,0)(θ(t−s)c⁺ − θ(s−t)c⁻)U(0,t_j)γ₀`.
    pub fn g_feynman(&self, c_plus: &CMat, c_minus: &CMat, i: usize, j: usize, side: Side) -> CMat {
        let th = theta(i, j, self.grid(), side);
        let x = if th == 1.0 { c_plus.clone() } else { dense::scale_real(c_minus, -1.0) };
        self.sandwich(&x, i, j)
    }

    /// `G_F = i⁻¹Λ⁺ + G_adv`.
    pub fn g_feynman_via_plus(&self, c_plus: &CMat, i: usize, j: usize, side: Side) -> CMat {
        let l = dense::scale(&self.lambda(c_plus, i, j), C64::new(0.0, -1.0));
        &l + &self.g_adv(i, j, side)
    }

    /// `G_F = −i⁻¹Λ⁻ + G_ret`.
    pub fn g_feynman_via_minus(&self, c_minus: &CMat, i: usize, j: usize, side: Side) -> CMat {
        let l = dense::scale(&self.lambda(c_minus, i, j), C64::new(0.0, 1.0));
        &l + &self.g_ret(i, j, side)
    }
}

/// `(E(Δt) − E(Δt/2)) / (E(Δt/2) − E(Δt/4))` for the propagator over `[a, b]`, where `E(h)` is
/// the midpoint propagator with `n` uniform steps of size `h`; ≈ 4 for a second-order method.
pub fn richardson_ratio(source: &HamiltonianSource, a: f64, b: f64, n: usize) -> Result<f64> {
    richardson_ratio_with(source, a, b, n, Integrator::Midpoint)
}

/// As [`richardson_ratio`] for any rule; a method of order `p` gives `2^p`.
pub fn richardson_ratio_with(source: &HamiltonianSource, a: f64, b: f64, n: usize, integrator: Integrator) -> Result<f64> {
    let run = |steps: usize| -> Result<CMat> {
        let dt = (b - a) / steps as f64;
        let mut u = dense::identity(source.dim());
        for q in 0..steps {
            let t = a + q as f64 * dt;
            let s = step_between(source, t, t + dt, integrator)?;
            u = dense::matmul(&s, &u);
        }
        Ok(u)
    };
    let (e1, e2, e4) = (run(n)?, run(2 * n)?, run(4 * n)?);
    Ok(dense::fro(&(&e1 - &e2)) / dense::fro(&(&e2 - &e4)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::build_gamma_rep;
    use crate::modelspec::MetricModel;
    use crate::psdo::funcs::hermitian_function;

    fn source(h: &str, m: &str, k: usize) -> HamiltonianSource {
        let rep = build_gamma_rep(2).unwrap();
        let model = MetricModel::parse(h, m, "0", -1.0, 1.0, 2).unwrap();
        HamiltonianSource::new(HamiltonianAssembler::new(&model, &rep, k, 4 * k + 4, 0.0).unwrap(), 0.0)
    }

    #[test]
    fn autonomous_case_matches_exponential() {
        let src = source("1+0.2*cos(x)", "1", 6);
        let grid = TimeGrid::chebyshev(-1.0, 1.0, 5).unwrap();
        let evo = Evolution::new(src.clone(), &grid, 0.1).unwrap();
        let h = src.at(0.0).unwrap();
        let exact = hermitian_function(&h, |l| C64::from_polar(1.0, l)).unwrap();
        assert!(dense::max_abs(&(&evo.from_ref[4] - &exact)) < 1e-9);
        assert!(evo.max_step_drift < 1e-12);
    }

    #[test]
    fn plane_wave_phase() {
        let src = source("1", "0.5", 4);
        let grid = TimeGrid::chebyshev(-1.0, 1.0, 3).unwrap();
        let evo = Evolution::new(src, &grid, 0.5).unwrap();
        let (vals, vecs) = eigh(&evo.source.at(0.0).unwrap(), EigenBackend::Jacobi).unwrap();
        let top = vals.len() - 1;
        let v = dense::column(&vecs, top);
        let out = dense::mat_vec(&evo.from_ref[2], &v);
        let w = (16.0_f64 + 0.25).sqrt();
        assert!((vals[top] - w).abs() < 1e-12);
        for (a, b) in out.iter().zip(&v) {
            assert!((a - b * C64::from_polar(1.0, w)).norm() < 1e-12);
        }
    }

    #[test]
    fn groupoid_and_direct_stepping_agree() {
        let src = source("(1+0.2*tanh(t)*cos(x))^2", "1", 5);
        let grid = TimeGrid::chebyshev(-1.0, 1.0, 7).unwrap();
        let evo = Evolution::new(src, &grid, 0.05).unwrap();
        let composed = evo.between_nodes(6, 1);
        let direct = evo.propagate(grid.nodes[1], grid.nodes[6]).unwrap();
        assert!(dense::max_abs(&(&composed - &direct)) < 1e-12);
        assert!(evo.propagate(0.123, 0.5).is_err());
    }

    #[test]
    fn richardson_second_order() {
        let src = source("(1+0.2*tanh(t)*cos(x))^2", "1+0.2*tanh(t)", 4);
        let ratio = richardson_ratio(&src, -1.0, 1.0, 20).unwrap();
        assert!((ratio - 4.0).abs() < 0.5, "ratio {ratio}");
        let ratio = richardson_ratio_with(&src, -1.0, 1.0, 10, Integrator::Magnus4).unwrap();
        assert!((ratio - 16.0).abs() < 3.0, "ratio {ratio}");
    }

    #[test]
    fn kernel_jumps_and_causality() {
        let src = source("(1+0.2*tanh(t)*cos(x))^2", "1", 4);
        let grid = TimeGrid::chebyshev(-1.0, 1.0, 5).unwrap();
        let ker = EvolutionKernels::new(Evolution::new(src, &grid, 0.1).unwrap()).unwrap();
        let ret_jump = &ker.g_ret(3, 3, Side::After) - &ker.g_ret(3, 3, Side::Before);
        let adv_jump = &ker.g_adv(3, 3, Side::After) - &ker.g_adv(3, 3, Side::Before);
        assert!(dense::max_abs(&(&ret_jump - &ker.gamma0)) < 1e-12);
        assert!(dense::max_abs(&(&adv_jump - &ker.gamma0)) < 1e-12);
        assert_eq!(dense::max_abs(&ker.g_ret(1, 3, Side::After)), 0.0);
        assert_eq!(dense::max_abs(&ker.g_adv(3, 1, Side::After)), 0.0);
        let u = dense::matmul(&ker.cauchy(4, 2), &ker.cauchy(2, 0));
        assert!(dense::max_abs(&(&u - &ker.cauchy(4, 0))) < 1e-10);
    }
}
