//! The Dirac operator on `I × S¹` and its reduction to `∂t − iH(t)`.
//!
//! Working representation: with `φ = |h_t|^{1/4} ψ` the reduced equation reads `∂tφ = iĤ(t)φ`,
//! `Ĥ = −γ₀γ₁ ⊗ ½(T_a D + D T_a) + iγ₀ ⊗ T_m`, `a = h^{-1/2}`, `D = D_x`, which is Hermitian on
//! the truncated basis. The `ν̃` picture of the density-transported sections `χ = |h_0|^{-1/4}φ`
//! is reached by the similarity `H = V⁻¹ĤV`, `V = T_{|h_0|^{1/4}} ⊗ 1`, with gram `W = V*V`.
//! Because `iβγ₀ = 1` in our representation, no spinor factor enters `V`.

use std::f64::consts::PI;

use rustfft::FftPlanner;

use crate::clifford::GammaRep;
use crate::error::{Error, Result};
use crate::frames::{self, frame_christoffels, spin_coefficients, FrameData};
use crate::modelspec::{BinaryOp, Dual, ExprAst, MetricModel, Scalar, UnaryOp};
use crate::psdo::dense::{self, CMat};
use crate::psdo::{multiplication_matrix, quantize_scalar, x_points, Gram, GramFactor, SpatialOperator};
use crate::timegrid::{fd4_derivative, TimeGrid};
use crate::C64;

/// Tolerance of the runtime check `Γ^a_{0b} = 0` that licenses the trivial parallel transport.
pub const PARALLEL_FRAME_TOL: f64 = 1e-12;
/// Gram-self-adjointness residual above which assembly is rejected.
pub const ASSEMBLY_TOL: f64 = 1e-6;

fn re(v: f64) -> C64 {
    C64::new(v, 0.0)
}

/// Multiplication by a real function, made exactly Hermitian.
pub fn real_multiplication(k_cut: usize, samples: &[f64]) -> CMat {
    let c: Vec<C64> = samples.iter().map(|&v| re(v)).collect();
    dense::hermitian_part(&multiplication_matrix(k_cut, &c))
}

/// Field values at one time on the x grid.
#[derive(Debug, Clone)]
struct Slice {
    h: Vec<Dual>,
    m: Vec<Dual>,
}

/// Builds `Ĥ(t)`, `∂tĤ(t)`, `ε(t)` and the transport data at arbitrary times.
#[derive(Debug, Clone)]
pub struct HamiltonianAssembler {
    pub model: MetricModel,
    pub rep: GammaRep,
    pub k_cut: usize,
    pub m_pts: usize,
    /// Slice whose density defines the `ν̃` gram.
    pub t_ref: f64,
    /// `+1`, or `−1` for the reversed-energy family `−H` (used by the time-reversal checks).
    pub sign: f64,
    v: CMat,
    gram: Gram,
    spin_kinetic: CMat,
    spin_mass: CMat,
}

impl HamiltonianAssembler {
    pub fn new(model: &MetricModel, rep: &GammaRep, k_cut: usize, m_pts: usize, t_ref: f64) -> Result<Self> {
        if model.n != rep.n {
            return Err(Error::Dimension(format!("model dimension {} vs representation {}", model.n, rep.n)));
        }
        if m_pts < 4 || m_pts % 2 != 0 {
            return Err(Error::Dimension(format!("space grid must be even and at least 4, got {m_pts}")));
        }
        if m_pts < 2 * k_cut + 2 {
            return Err(Error::Dimension(format!("space grid {m_pts} cannot resolve cutoff K = {k_cut}")));
        }
        let xs = x_points(m_pts);
        let h0: Vec<f64> = xs.iter().map(|&x| Ok(model.point(t_ref, x)?.h.v.powf(0.25))).collect::<Result<_>>()?;
        let id = dense::identity(rep.rank);
        let v = dense::kron(&real_multiplication(k_cut, &h0), &id);
        let gram = Gram::factored(GramFactor::from_factor(dense::adjoint(&v))?);
        let g0g1 = dense::matmul(&rep.gammas[0], &rep.gammas[1]);
        Ok(Self {
            model: model.clone(),
            rep: rep.clone(),
            k_cut,
            m_pts,
            t_ref,
            sign: 1.0,
            v,
            gram,
            spin_kinetic: dense::scale_real(&g0g1, -1.0),
            spin_mass: dense::scale(&rep.gammas[0], C64::new(0.0, 1.0)),
        })
    }

    pub fn dim(&self) -> usize {
        (2 * self.k_cut + 1) * self.rep.rank
    }

    /// `ν̃` gram `W = V*V`.
    pub fn gram(&self) -> Gram {
        self.gram.clone()
    }

    /// `V = T_{|h_0|^{1/4}} ⊗ 1`.
    pub fn v(&self) -> &CMat {
        &self.v
    }

    fn slice(&self, t: f64) -> Result<Slice> {
        let xs = x_points(self.m_pts);
        let mut h = Vec::with_capacity(xs.len());
        let mut m = Vec::with_capacity(xs.len());
        for &x in &xs {
            let p = self.model.point(t, x)?;
            h.push(p.h);
            m.push(p.m);
        }
        Ok(Slice { h, m })
    }

    /// `½(T_f D + D T_f)` for real samples `f`.
    fn symmetric_kinetic(&self, f: &[f64]) -> CMat {
        let t = real_multiplication(self.k_cut, f);
        let k = self.k_cut as i64;
        CMat::from_fn(t.nrows(), t.ncols(), |r, c| t[(r, c)] * (0.5 * ((c as i64 - k) + (r as i64 - k)) as f64))
    }

    fn assemble(&self, a: &[f64], m: &[f64]) -> CMat {
        let kin = self.symmetric_kinetic(a);
        let mass = real_multiplication(self.k_cut, m);
        let h = &dense::kron(&kin, &self.spin_kinetic) + &dense::kron(&mass, &self.spin_mass);
        if self.sign == 1.0 {
            h
        } else {
            dense::scale_real(&h, self.sign)
        }
    }

    /// The same assembler producing `−Ĥ`.
    pub fn negated(&self) -> Self {
        Self { sign: -self.sign, ..self.clone() }
    }

    /// Massless part `Ĥ₀(t)`.
    pub fn h0_hat(&self, t: f64) -> Result<CMat> {
        let s = self.slice(t)?;
        let a: Vec<f64> = s.h.iter().map(|h| 1.0 / h.v.sqrt()).collect();
        Ok(self.assemble(&a, &vec![0.0; a.len()]))
    }

    /// `Ĥ(t)` (Hermitian).
    pub fn h_hat(&self, t: f64) -> Result<CMat> {
        let s = self.slice(t)?;
        let a: Vec<f64> = s.h.iter().map(|h| 1.0 / h.v.sqrt()).collect();
        let m: Vec<f64> = s.m.iter().map(|m| m.v).collect();
        Ok(self.assemble(&a, &m))
    }

    /// `∂tĤ(t)` from the exact time derivatives of the symbols.
    pub fn dt_h_hat(&self, t: f64) -> Result<CMat> {
        let s = self.slice(t)?;
        let a: Vec<f64> = s.h.iter().map(|h| (Dual::cst(1.0) / h.sqrt()).dt).collect();
        let m: Vec<f64> = s.m.iter().map(|m| m.dt).collect();
        Ok(self.assemble(&a, &m))
    }

    /// Scalar symbol `(k²/h + 1)^{1/2}` quantized and symmetrized, tensored with `1_N`.
    pub fn epsilon(&self, t: f64) -> Result<CMat> {
        let s = self.slice(t)?;
        let q = quantize_scalar(self.k_cut, self.m_pts, |j, k| re(((k * k) as f64 / s.h[j].v + 1.0).sqrt()));
        Ok(dense::kron(&dense::hermitian_part(&q), &dense::identity(self.rep.rank)))
    }

    /// `χ(λ⁻²h₂)` with `h₂ = ε² − 1 = k²/h`, quantized and symmetrized (scalar, without `1_N`).
    pub fn bump(&self, t: f64, lambda: f64) -> Result<CMat> {
        let s = self.slice(t)?;
        let q = quantize_scalar(self.k_cut, self.m_pts, |j, k| re(bump((k * k) as f64 / (s.h[j].v * lambda * lambda))));
        Ok(dense::hermitian_part(&q))
    }

    /// Gap-regularization perturbation `λ · χ(λ⁻²h₂) ⊗ iγ₀` in the hat picture.
    pub fn regularizer(&self, t: f64, lambda: f64) -> Result<CMat> {
        if lambda == 0.0 {
            return Ok(dense::zeros(self.dim(), self.dim()));
        }
        Ok(dense::kron(&dense::scale_real(&self.bump(t, lambda)?, self.sign * lambda), &self.spin_mass))
    }

    /// `σ_pr(H)(t,x,k) = −γ₀γ₁ h^{-1/2} k`.
    pub fn principal_symbol(&self, t: f64, x: f64, k: f64) -> Result<CMat> {
        let h = self.model.point(t, x)?.h.v;
        Ok(dense::scale_real(&self.spin_kinetic, self.sign * k / h.sqrt()))
    }

    /// `ρ_t = |h_t|^{-1/4}|h_0|^{1/4}` on the x grid.
    pub fn density_samples(&self, t: f64) -> Result<Vec<f64>> {
        let xs = x_points(self.m_pts);
        xs.iter()
            .map(|&x| Ok((self.model.point(self.t_ref, x)?.h.v / self.model.point(t, x)?.h.v).powf(0.25)))
            .collect()
    }

    /// Matrix of multiplication by `ρ_t`, tensored with `1_N`.
    pub fn density(&self, t: f64) -> Result<CMat> {
        Ok(dense::kron(&real_multiplication(self.k_cut, &self.density_samples(t)?), &dense::identity(self.rep.rank)))
    }

    /// `H(t)` in the `ν̃` picture.
    pub fn operator(&self, t: f64) -> Result<SpatialOperator> {
        SpatialOperator::from_hat(self.k_cut, self.rep.rank, &self.h_hat(t)?, self.gram(), 1.0)
    }

    /// `‖H e_{k,v} − σ_pr(H)(·,k) e_{k,v}‖ / |k|` in the hat picture, worst over spinor basis vectors.
    pub fn principal_symbol_residual(&self, t: f64, k: i64) -> Result<f64> {
        let h = self.h_hat(t)?;
        let s = self.slice(t)?;
        let a: Vec<C64> = s.h.iter().map(|h| re(k as f64 / h.v.sqrt())).collect();
        let ma = multiplication_matrix(self.k_cut, &a);
        let n = self.rep.rank;
        let col = (k + self.k_cut as i64) as usize;
        let mut worst: f64 = 0.0;
        for spin in 0..n {
            let j = col * n + spin;
            let mut diff = 0.0;
            for row in 0..(2 * self.k_cut + 1) {
                for alpha in 0..n {
                    let sym = ma[(row, col)] * self.spin_kinetic[(alpha, spin)] * self.sign;
                    diff += (h[(row * n + alpha, j)] - sym).norm_sqr();
                }
            }
            worst = worst.max(diff.sqrt() / k.unsigned_abs() as f64);
        }
        Ok(worst)
    }
}

/// `χ(s) = exp(1 − 1/(1 − s²))` for `|s| < 1`, else 0.
pub fn bump(s: f64) -> f64 {
    if s.abs() < 1.0 {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

/// The reduced Hamiltonian sampled on a time grid.
#[derive(Debug, Clone)]
pub struct ReducedHamiltonianFamily {
    pub assembler: HamiltonianAssembler,
    pub grid: TimeGrid,
    pub h_hat: Vec<CMat>,
    pub dt_h_hat: Vec<CMat>,
    pub eps: Vec<CMat>,
    /// Gram-self-adjointness residual of `H(t)` in the `ν̃` picture at each node.
    pub self_adjoint_residuals: Vec<f64>,
}

impl ReducedHamiltonianFamily {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn k_cut(&self) -> usize {
        self.assembler.k_cut
    }

    pub fn rank(&self) -> usize {
        self.assembler.rep.rank
    }

    pub fn operator(&self, i: usize) -> Result<SpatialOperator> {
        SpatialOperator::from_hat(self.k_cut(), self.rank(), &self.h_hat[i], self.assembler.gram(), 1.0)
    }

    pub fn epsilon_operator(&self, i: usize) -> Result<SpatialOperator> {
        SpatialOperator::new(self.k_cut(), self.rank(), self.eps[i].clone(), Gram::Identity, 1.0)
    }

    pub fn max_self_adjoint_residual(&self) -> f64 {
        self.self_adjoint_residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// Fails unless `Γ^a_{0b} = 0` on a sample of the grid (the parallel-frame gate).
pub fn check_parallel_frame(model: &MetricModel, times: &[f64], m_pts: usize) -> Result<f64> {
    let xs: Vec<f64> = x_points(m_pts.min(16));
    let fd = frame_christoffels(model, times, &xs, false)?;
    let worst = fd.max_time_connection();
    if worst > PARALLEL_FRAME_TOL {
        return Err(Error::Assembly(format!("Γ^a_0b = {worst:e} is nonzero; the trivial transport does not apply")));
    }
    Ok(worst)
}

pub fn assemble_h(model: &MetricModel, rep: &GammaRep, grid: &TimeGrid, k_cut: usize, m_pts: usize) -> Result<ReducedHamiltonianFamily> {
    check_parallel_frame(model, &grid.nodes, m_pts)?;
    let t_ref = grid.nodes[grid.reference_index()];
    assemble_family(HamiltonianAssembler::new(model, rep, k_cut, m_pts, t_ref)?, grid)
}

/// Samples an existing assembler on the grid nodes.
pub fn assemble_family(assembler: HamiltonianAssembler, grid: &TimeGrid) -> Result<ReducedHamiltonianFamily> {
    let (k_cut, rank) = (assembler.k_cut, assembler.rep.rank);
    let mut h_hat = Vec::with_capacity(grid.len());
    let mut dt_h_hat = Vec::with_capacity(grid.len());
    let mut eps = Vec::with_capacity(grid.len());
    let mut residuals = Vec::with_capacity(grid.len());
    for &t in &grid.nodes {
        let h = assembler.h_hat(t)?;
        let op = SpatialOperator::from_hat(k_cut, rank, &h, assembler.gram(), 1.0)?;
        let r = op.self_adjoint_residual();
        if !(r <= ASSEMBLY_TOL) {
            return Err(Error::Assembly(format!("H({t}) gram-self-adjointness residual {r:e}")));
        }
        residuals.push(r);
        h_hat.push(h);
        dt_h_hat.push(assembler.dt_h_hat(t)?);
        eps.push(assembler.epsilon(t)?);
    }
    Ok(ReducedHamiltonianFamily { assembler, grid: grid.clone(), h_hat, dt_h_hat, eps, self_adjoint_residuals: residuals })
}

/// Density transport `ρ_t = |h_t|^{-1/4}|h_0|^{1/4}` on a time list (pointwise samples).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityTransport {
    pub times: Vec<f64>,
    pub t_ref: f64,
    pub rho: Vec<Vec<f64>>,
    pub rho_inv: Vec<Vec<f64>>,
}

impl DensityTransport {
    /// `max |ρ(t)·|h_t|^{1/2}·ρ(t) − |h_s|^{1/2}·ρ(s)²|` over grid points, with both sides
    /// evaluated from the model: the gram compatibility `𝒯(t,s)*β_t𝒯(t,s) = β_s`.
    pub fn gram_compatibility_residual(&self, model: &MetricModel, m_pts: usize) -> Result<f64> {
        let xs = x_points(m_pts);
        let mut worst: f64 = 0.0;
        for (i, &t) in self.times.iter().enumerate() {
            for (j, &x) in xs.iter().enumerate() {
                let ht = model.point(t, x)?.h.v;
                let h0 = model.point(self.t_ref, x)?.h.v;
                worst = worst.max((self.rho[i][j] * ht.sqrt() * self.rho[i][j] - h0.sqrt()).abs());
            }
        }
        Ok(worst)
    }
}

pub fn density_transport(model: &MetricModel, times: &[f64], t_ref: f64, m_pts: usize) -> Result<DensityTransport> {
    let xs = x_points(m_pts);
    let mut rho = Vec::with_capacity(times.len());
    let mut rho_inv = Vec::with_capacity(times.len());
    for &t in times {
        let r: Vec<f64> = xs
            .iter()
            .map(|&x| Ok((model.point(t, x)?.h.v.powf(-0.25)) * model.point(t_ref, x)?.h.v.powf(0.25)))
            .collect::<Result<_>>()?;
        rho_inv.push(r.iter().map(|v| 1.0 / v).collect());
        rho.push(r);
    }
    Ok(DensityTransport { times: times.to_vec(), t_ref, rho, rho_inv })
}

/// Spinor field on a uniform `t × x` grid, indexed `[(i·nx + j)·N + α]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorField {
    pub nt: usize,
    pub nx: usize,
    pub rank: usize,
    pub data: Vec<C64>,
}

impl SpinorField {
    pub fn zeros(nt: usize, nx: usize, rank: usize) -> Self {
        Self { nt, nx, rank, data: vec![C64::new(0.0, 0.0); nt * nx * rank] }
    }

    pub fn from_fn(nt: usize, nx: usize, rank: usize, f: impl Fn(usize, usize, usize) -> C64) -> Self {
        let mut s = Self::zeros(nt, nx, rank);
        for i in 0..nt {
            for j in 0..nx {
                for a in 0..rank {
                    s.data[(i * nx + j) * rank + a] = f(i, j, a);
                }
            }
        }
        s
    }

    pub fn at(&self, i: usize, j: usize) -> &[C64] {
        let o = (i * self.nx + j) * self.rank;
        &self.data[o..o + self.rank]
    }

    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut [C64] {
        let o = (i * self.nx + j) * self.rank;
        &mut self.data[o..o + self.rank]
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(), ..self.clone() }
    }

    /// Pointwise multiplication by a real scalar field `f[i][j]`.
    pub fn scaled(&self, f: &[Vec<f64>]) -> Self {
        let mut out = self.clone();
        for i in 0..self.nt {
            for j in 0..self.nx {
                let s = f[i][j];
                for v in out.at_mut(i, j) {
                    *v *= s;
                }
            }
        }
        out
    }

    /// Discrete `ℓ²` norm with cell weights `Δt·Δx`.
    pub fn norm(&self, dt: f64) -> f64 {
        let dx = 2.0 * PI / self.nx as f64;
        (self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * dt * dx).sqrt()
    }
}

/// Space-time Dirac operator `D = Σ_a η^{aa}γ_a(e_a + σ_a) + mass` on a uniform grid.
///
/// `∂t` is the fourth-order finite difference, `∂x` the spectral derivative.
#[derive(Debug, Clone)]
pub struct SpacetimeDirac {
    pub times: Vec<f64>,
    pub xs: Vec<f64>,
    pub rep: GammaRep,
    pub conformal: bool,
    pub frames: FrameData,
    sigmas: Vec<Vec<Vec<CMat>>>,
    /// Mass at each grid point (`m`, or `e^{−u}m` for the conformally rescaled operator).
    pub mass: Vec<Vec<f64>>,
    /// `|det g|^{1/2}` at each grid point.
    pub volume: Vec<Vec<f64>>,
}

/// Assemble `D` for the reduced metric (`conformal = false`, mass `m`) or for the physical metric
/// `e^{2u}(−dt² + h dx²)` (`conformal = true`, mass `e^{−u}m`).
pub fn assemble_dirac(model: &MetricModel, rep: &GammaRep, times: &[f64], m_pts: usize, conformal: bool) -> Result<SpacetimeDirac> {
    if model.n != rep.n {
        return Err(Error::Dimension(format!("model dimension {} vs representation {}", model.n, rep.n)));
    }
    if times.len() < 5 {
        return Err(Error::Dimension("space-time grid needs at least 5 time points".into()));
    }
    let dt = times[1] - times[0];
    if times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-12 * (1.0 + dt.abs())) {
        return Err(Error::Dimension("space-time grid must be uniform in t".into()));
    }
    let xs = x_points(m_pts);
    let frames = frame_christoffels(model, times, &xs, conformal)?;
    let sigmas = spin_coefficients(&frames, rep)?;
    let mut mass = Vec::with_capacity(times.len());
    let mut volume = Vec::with_capacity(times.len());
    for &t in times {
        let mut mrow = Vec::with_capacity(xs.len());
        let mut vrow = Vec::with_capacity(xs.len());
        for &x in &xs {
            let p = model.point(t, x)?;
            let u = if conformal { p.u.v } else { 0.0 };
            mrow.push((-u).exp() * p.m.v);
            vrow.push((model.n as f64 * u).exp() * p.h.v.sqrt());
        }
        mass.push(mrow);
        volume.push(vrow);
    }
    Ok(SpacetimeDirac { times: times.to_vec(), xs, rep: rep.clone(), conformal, frames, sigmas, mass, volume })
}

/// Spectral `∂x` of each spinor component along x, slice by slice.
pub fn spectral_dx(psi: &SpinorField) -> SpinorField {
    let (nt, nx, n) = (psi.nt, psi.nx, psi.rank);
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(nx);
    let inv = planner.plan_fft_inverse(nx);
    let mut out = SpinorField::zeros(nt, nx, n);
    let mut buf = vec![C64::new(0.0, 0.0); nx];
    for i in 0..nt {
        for a in 0..n {
            for j in 0..nx {
                buf[j] = psi.at(i, j)[a];
            }
            fwd.process(&mut buf);
            for (q, b) in buf.iter_mut().enumerate() {
                let k = if q < nx / 2 {
                    q as f64
                } else if q == nx / 2 {
                    0.0
                } else {
                    q as f64 - nx as f64
                };
                *b *= C64::new(0.0, k / nx as f64);
            }
            inv.process(&mut buf);
            for j in 0..nx {
                out.at_mut(i, j)[a] = buf[j];
            }
        }
    }
    out
}

/// Fourth-order `∂t` of each component.
pub fn fd_dt(psi: &SpinorField, dt: f64) -> SpinorField {
    let (nt, nx, n) = (psi.nt, psi.nx, psi.rank);
    let mut out = SpinorField::zeros(nt, nx, n);
    for j in 0..nx {
        for a in 0..n {
            let line: Vec<C64> = (0..nt).map(|i| psi.at(i, j)[a]).collect();
            for (i, v) in fd4_derivative(&line, dt).into_iter().enumerate() {
                out.at_mut(i, j)[a] = v;
            }
        }
    }
    out
}

impl SpacetimeDirac {
    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    pub fn apply(&self, psi: &SpinorField) -> Result<SpinorField> {
        if psi.nt != self.times.len() || psi.nx != self.xs.len() || psi.rank != self.rep.rank {
            return Err(Error::Dimension("field does not match the space-time grid".into()));
        }
        let d_t = fd_dt(psi, self.dt());
        let d_x = spectral_dx(psi);
        let n = self.rep.n;
        let mut out = SpinorField::zeros(psi.nt, psi.nx, psi.rank);
        let mut tmp = vec![C64::new(0.0, 0.0); psi.rank];
        for i in 0..psi.nt {
            for j in 0..psi.nx {
                let fp = &self.frames.points[i][j];
                let value = psi.at(i, j);
                let acc = out.at_mut(i, j);
                for a in 0..n {
                    let (ft, fx) = (fp.frame[a][0], fp.frame[a][1]);
                    // e_a ψ + σ_a ψ
                    for (al, t) in tmp.iter_mut().enumerate() {
                        *t = d_t.at(i, j)[al] * ft + d_x.at(i, j)[al] * fx;
                    }
                    let sig = &self.sigmas[i][j][a];
                    for al in 0..psi.rank {
                        for be in 0..psi.rank {
                            tmp[al] += sig[(al, be)] * value[be];
                        }
                    }
                    let g = &self.rep.gammas[a];
                    let eta = self.rep.eta[a];
                    for al in 0..psi.rank {
                        let mut s = C64::new(0.0, 0.0);
                        for be in 0..psi.rank {
                            s += g[(al, be)] * tmp[be];
                        }
                        acc[al] += s * eta;
                    }
                }
                let m = self.mass[i][j];
                for al in 0..psi.rank {
                    acc[al] += value[al] * m;
                }
            }
        }
        Ok(out)
    }

    /// `(ψ₁|ψ₂)_M = ∫ ψ̄₁·βψ₂ dVol` with trapezoid weights in t.
    pub fn pairing(&self, a: &SpinorField, b: &SpinorField) -> C64 {
        let dx = 2.0 * PI / self.xs.len() as f64;
        let dt = self.dt();
        let nt = self.times.len();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..nt {
            let wt = if i == 0 || i + 1 == nt { 0.5 } else { 1.0 };
            for j in 0..self.xs.len() {
                let (u, v) = (a.at(i, j), b.at(i, j));
                let mut s = C64::new(0.0, 0.0);
                for al in 0..a.rank {
                    for be in 0..a.rank {
                        s += u[al].conj() * self.rep.beta[(al, be)] * v[be];
                    }
                }
                acc += s * (wt * self.volume[i][j]);
            }
        }
        acc * (dt * dx)
    }

    /// `|(ψ₁|Dψ₂) − (Dψ₁|ψ₂)|`.
    pub fn symmetry_defect(&self, a: &SpinorField, b: &SpinorField) -> Result<f64> {
        let db = self.apply(b)?;
        let da = self.apply(a)?;
        Ok((self.pairing(a, &db) - self.pairing(&da, b)).norm())
    }
}

/// Conformal data for `g_phys = e^{2u}(−dt² + h dx²)`.
///
/// The model's `m` is the mass of the reduced operator; the physical operator carries `e^{−u}m`
/// and `W*D_red W = D_phys` with `W = e^{(n−1)u/2}`, `W* = e^{−(n+1)u/2}`.
#[derive(Debug, Clone)]
pub struct ConformalPair {
    pub physical: MetricModel,
    pub reduced: MetricModel,
    /// `e^{−u}m` as an expression.
    pub physical_mass: ExprAst,
    pub n: usize,
}

pub fn conformal_pair(model: &MetricModel) -> ConformalPair {
    let reduced = MetricModel { u: ExprAst::Const(0.0), ..model.clone() };
    let physical_mass = ExprAst::binary(
        BinaryOp::Mul,
        ExprAst::unary(UnaryOp::Exp, ExprAst::unary(UnaryOp::Neg, model.u.clone())),
        model.m.clone(),
    );
    ConformalPair { physical: model.clone(), reduced, physical_mass, n: model.n }
}

impl ConformalPair {
    fn u_samples(&self, t: f64, m_pts: usize) -> Result<Vec<f64>> {
        x_points(m_pts).iter().map(|&x| Ok(self.physical.point(t, x)?.u.v)).collect()
    }

    /// Pointwise samples of `W = e^{(n−1)u/2}`.
    pub fn w_samples(&self, t: f64, m_pts: usize) -> Result<Vec<f64>> {
        let c = (self.n as f64 - 1.0) / 2.0;
        Ok(self.u_samples(t, m_pts)?.into_iter().map(|u| (c * u).exp()).collect())
    }

    /// Pointwise samples of `U = e^{(1−n)u/2}`.
    pub fn u_map_samples(&self, t: f64, m_pts: usize) -> Result<Vec<f64>> {
        let c = (1.0 - self.n as f64) / 2.0;
        Ok(self.u_samples(t, m_pts)?.into_iter().map(|u| (c * u).exp()).collect())
    }

    /// `U` on the truncated basis, tensored with `1_N`.
    pub fn u_matrix(&self, t: f64, k_cut: usize, m_pts: usize, rank: usize) -> Result<CMat> {
        Ok(dense::kron(&real_multiplication(k_cut, &self.u_map_samples(t, m_pts)?), &dense::identity(rank)))
    }

    /// `max ‖(W*D_red W − D_phys)ψ‖` relative to `‖D_phys ψ‖`, over the given fields.
    pub fn identity_residual(&self, rep: &GammaRep, times: &[f64], m_pts: usize, fields: &[SpinorField]) -> Result<f64> {
        let red = assemble_dirac(&self.reduced, rep, times, m_pts, false)?;
        let phys = assemble_dirac(&self.physical, rep, times, m_pts, true)?;
        let xs = x_points(m_pts);
        let mut w = Vec::with_capacity(times.len());
        let mut w_star = Vec::with_capacity(times.len());
        for &t in times {
            let mut a = Vec::with_capacity(xs.len());
            let mut b = Vec::with_capacity(xs.len());
            for &x in &xs {
                let u = self.physical.point(t, x)?.u.v;
                a.push(((self.n as f64 - 1.0) / 2.0 * u).exp());
                b.push((-(self.n as f64 + 1.0) / 2.0 * u).exp());
            }
            w.push(a);
            w_star.push(b);
        }
        let dt = red.dt();
        let mut worst: f64 = 0.0;
        for psi in fields {
            let lhs = red.apply(&psi.scaled(&w))?.scaled(&w_star);
            let rhs = phys.apply(psi)?;
            worst = worst.max(lhs.sub(&rhs).norm(dt) / rhs.norm(dt).max(f64::MIN_POSITIVE));
        }
        Ok(worst)
    }
}

/// Smooth random spinor field: a few low Fourier modes in x with smooth time profiles, times a
/// bump `exp(−1/(1−s²))` in t when `compact` is set.
pub fn smooth_random_field(times: &[f64], m_pts: usize, rank: usize, seed: u64, compact: bool) -> SpinorField {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let xs = x_points(m_pts);
    let (t0, t1) = (times[0], times[times.len() - 1]);
    let modes: Vec<(i64, f64, C64, usize)> = (0..6 * rank)
        .map(|q| {
            let k = rng.random_range(-3..=3);
            let w = rng.random_range(0.5..2.0);
            let c = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            (k, w, c, q % rank)
        })
        .collect();
    SpinorField::from_fn(times.len(), m_pts, rank, |i, j, a| {
        let t = times[i];
        let s = (2.0 * (t - t0) / (t1 - t0)) - 1.0;
        let env = if compact {
            if s.abs() < 1.0 {
                (1.0 - 1.0 / (1.0 - s * s)).exp()
            } else {
                0.0
            }
        } else {
            1.0
        };
        let mut v = C64::new(0.0, 0.0);
        for &(k, w, c, al) in &modes {
            if al == a {
                v += c * C64::from_polar(1.0, k as f64 * xs[j] + w * t);
            }
        }
        v * env
    })
}

/// Spin coefficients `σ_b` of one frame point, exposed for diagnostics.
pub fn sigma_at(model: &MetricModel, rep: &GammaRep, t: f64, x: f64, conformal: bool) -> Result<Vec<CMat>> {
    let p = frames::frame_point(&frames::model_metric(model, t, x, conformal)?)?;
    frames::spin_coefficients_at(&p, rep)
}
