//! Cauchy-surface covariances `c±`, `λ±` and the state constructions: adiabatic, vacuum, deformed.
//!
//! `λ±` are stored as sesquilinear-form matrices on the truncated basis. With `iβγ₀ = 1` the form
//! of `iγ(n)` is the slice gram itself, so `λ± = W c±` and positivity is a Hermitian eigenvalue test.

use crate::clifford::GammaRep;
use crate::error::{Error, Result};
use crate::evolution::{Evolution, EvolutionKernels, HamiltonianSource};
use crate::modelspec::{parse_expr, ExprAst, MetricModel};
use crate::projections::{positive_projection, ProjectorFamily};
use crate::psdo::dense::{self, CMat};
use crate::psdo::funcs::{eigh, EigenBackend};
use crate::psdo::{x_points, Gram, GramFactor, SpatialOperator};
use crate::reduction::{assemble_dirac, conformal_pair, fd_dt, HamiltonianAssembler, SpinorField};
use crate::timegrid::TimeGrid;
use crate::C64;

/// Tolerance for the state conditions checked at construction.
pub const STATE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum StateTag {
    Adiabatic { order: usize },
    Vacuum,
    /// Spectral projections of a time-dependent `H` frozen at one time; not Hadamard in general.
    InstantaneousVacuum,
    Deformed,
}

impl StateTag {
    pub fn name(&self) -> &'static str {
        match self {
            StateTag::Adiabatic { .. } => "adiabatic",
            StateTag::Vacuum => "vacuum",
            StateTag::InstantaneousVacuum => "instantaneous vacuum",
            StateTag::Deformed => "deformed",
        }
    }
}

/// Residuals of the four state conditions plus purity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateResiduals {
    /// `‖c⁺ + c⁻ − 1‖`
    pub completeness: f64,
    /// `‖λ⁺ + λ⁻ − iγ(n)‖ / ‖iγ(n)‖`
    pub lambda_sum: f64,
    /// `min(λ_min(λ⁺), λ_min(λ⁻))`, relative to `‖iγ(n)‖`
    pub min_eigenvalue: f64,
    /// `max ‖c±² − c±‖`
    pub purity: f64,
    /// Hermiticity of the `λ±` forms.
    pub hermiticity: f64,
}

impl StateResiduals {
    pub fn worst(&self) -> f64 {
        self.completeness.max(self.lambda_sum).max(self.purity).max(self.hermiticity).max(-self.min_eigenvalue.min(0.0))
    }
}

#[derive(Debug, Clone)]
pub struct StateBundle {
    pub tag: StateTag,
    pub t0: f64,
    /// Physical `c±` (conformal weights applied) on the truncated slice basis.
    pub c_plus: SpatialOperator,
    pub c_minus: SpatialOperator,
    /// `λ± = W̃c±` as form matrices, `W̃` the physical slice gram.
    pub lambda_plus: CMat,
    pub lambda_minus: CMat,
    /// Form of `iγ(n)`, i.e. `W̃`.
    pub gamma_n_form: CMat,
    /// Reduced (unweighted) `P̃⁺(t0)` in the hat picture.
    pub reduced_plus_hat: CMat,
    /// Reduced `c⁺` in the `ν̃` picture.
    pub reduced_plus: CMat,
    /// `u(t0, x)` samples when conformal weights were applied.
    pub conformal_u: Option<Vec<f64>>,
    pub residuals: StateResiduals,
}

impl StateBundle {
    pub fn dim(&self) -> usize {
        self.c_plus.dim()
    }

    pub fn k_cut(&self) -> usize {
        self.c_plus.k_cut
    }

    pub fn reduced_minus(&self) -> CMat {
        &dense::identity(self.dim()) - &self.reduced_plus
    }

    /// Conjugation by the conformal map: `c ↦ U⁻¹cU` (to reduced) or `UcU⁻¹` (to physical).
    pub fn gauge_round_trip_residual(&self, assembler: &HamiltonianAssembler) -> Result<f64> {
        let (u, u_inv) = conformal_maps(assembler, self.t0)?;
        let there = dense::matmul3(&u_inv, &self.c_plus.mat, &u);
        let back = dense::matmul3(&u, &there, &u_inv);
        Ok(dense::max_abs(&(&back - &self.c_plus.mat)))
    }
}

/// `(U, U⁻¹)` with `U = e^{(1−n)u/2}` at `t`, identities when `u ≡ 0`.
fn conformal_maps(assembler: &HamiltonianAssembler, t: f64) -> Result<(CMat, CMat)> {
    let dim = assembler.dim();
    if !assembler.model.has_conformal_factor() {
        return Ok((dense::identity(dim), dense::identity(dim)));
    }
    let u = conformal_pair(&assembler.model).u_matrix(t, assembler.k_cut, assembler.m_pts, assembler.rep.rank)?;
    let u_inv = dense::inverse(&u)?;
    Ok((u, u_inv))
}

/// Checks the state conditions on physical `c⁺` with slice gram `w`.
pub fn state_residuals(c_plus: &CMat, c_minus: &CMat, w: &CMat) -> Result<StateResiduals> {
    let n = c_plus.nrows();
    let id = dense::identity(n);
    let lp = dense::matmul(w, c_plus);
    let lm = dense::matmul(w, c_minus);
    let w_scale = dense::max_abs(w).max(f64::MIN_POSITIVE);
    let completeness = dense::max_abs(&(&(c_plus + c_minus) - &id));
    let lambda_sum = dense::max_abs(&(&(&lp + &lm) - w)) / w_scale;
    let hermiticity = dense::max_abs(&(&lp - &dense::adjoint(&lp))).max(dense::max_abs(&(&lm - &dense::adjoint(&lm)))) / w_scale;
    let min_p = eigh(&dense::hermitian_part(&lp), EigenBackend::Auto)?.0[0];
    let min_m = eigh(&dense::hermitian_part(&lm), EigenBackend::Auto)?.0[0];
    let w_norm = eigh(w, EigenBackend::Auto)?.0.last().copied().unwrap_or(1.0);
    let purity = dense::max_abs(&(&dense::matmul(c_plus, c_plus) - c_plus))
        .max(dense::max_abs(&(&dense::matmul(c_minus, c_minus) - c_minus)));
    Ok(StateResiduals { completeness, lambda_sum, min_eigenvalue: min_p.min(min_m) / w_norm, purity, hermiticity })
}

/// Assembles a bundle from a reduced hat-picture projection at `t0`.
pub fn bundle_from_hat(p_hat: &CMat, assembler: &HamiltonianAssembler, t0: f64, tag: StateTag) -> Result<StateBundle> {
    let (k_cut, rank) = (assembler.k_cut, assembler.rep.rank);
    let gram = assembler.gram();
    let reduced = gram.from_hat(p_hat);
    let (u, u_inv) = conformal_maps(assembler, t0)?;
    let (c_plus, phys_gram, conformal_u) = if assembler.model.has_conformal_factor() {
        let c = dense::matmul3(&u, &reduced, &u_inv);
        // W̃ = U^{-*} W U^{-1} = (U^{-*}V*)(U^{-*}V*)*.
        let l = dense::matmul(&dense::adjoint(&u_inv), &dense::adjoint(assembler.v()));
        let g = Gram::factored(GramFactor::from_factor(l)?);
        let us = x_points(assembler.m_pts)
            .iter()
            .map(|&x| Ok(assembler.model.point(t0, x)?.u.v))
            .collect::<Result<Vec<f64>>>()?;
        (c, g, Some(us))
    } else {
        (reduced.clone(), gram, None)
    };
    let c_minus = &dense::identity(c_plus.nrows()) - &c_plus;
    let w = phys_gram.matrix(c_plus.nrows());
    let residuals = state_residuals(&c_plus, &c_minus, &w)?;
    let lambda_plus = dense::matmul(&w, &c_plus);
    let lambda_minus = dense::matmul(&w, &c_minus);
    let bundle = StateBundle {
        tag,
        t0,
        c_plus: SpatialOperator::new(k_cut, rank, c_plus, phys_gram.clone(), 0.0)?,
        c_minus: SpatialOperator::new(k_cut, rank, c_minus, phys_gram, 0.0)?,
        lambda_plus,
        lambda_minus,
        gamma_n_form: w,
        reduced_plus_hat: p_hat.clone(),
        reduced_plus: reduced,
        conformal_u,
        residuals,
    };
    let r = &bundle.residuals;
    for (name, value) in [
        ("c+ + c- = 1", r.completeness),
        ("lambda+ + lambda- = i gamma(n)", r.lambda_sum),
        ("lambda+- >= 0", -r.min_eigenvalue.min(0.0)),
        ("purity", r.purity),
        ("lambda hermiticity", r.hermiticity),
    ] {
        if !(value <= STATE_TOL) {
            return Err(Error::Construction { invariant: name.into(), residual: value });
        }
    }
    Ok(bundle)
}

/// State from the corrected projections at the reference node, with conformal weights from the
/// assembler's model.
pub fn build_adiabatic_state(proj: &ProjectorFamily, assembler: &HamiltonianAssembler) -> Result<StateBundle> {
    let r = proj.grid.reference_index();
    bundle_from_hat(&proj.p_plus[r], assembler, proj.grid.nodes[r], StateTag::Adiabatic { order: proj.order })
}

/// `max |Ĥ² − Ĥ₀² − m²|` relative to `max |Ĥ²|` at time `t`.
pub fn vacuum_identity_residual(assembler: &HamiltonianAssembler, t: f64, m: f64) -> Result<f64> {
    let h = assembler.h_hat(t)?;
    let h0 = assembler.h0_hat(t)?;
    let h2 = dense::matmul(&h, &h);
    let rhs = &dense::matmul(&h0, &h0) + &dense::scale_real(&dense::identity(h.nrows()), m * m);
    Ok(dense::max_abs(&(&h2 - &rhs)) / dense::max_abs(&h2).max(f64::MIN_POSITIVE))
}

/// Constant mass of the model at time `t`, or a gap error.
fn constant_mass(model: &MetricModel, t: f64, m_pts: usize) -> Result<f64> {
    let ms: Vec<f64> = x_points(m_pts).iter().map(|&x| Ok(model.point(t, x)?.m.v)).collect::<Result<_>>()?;
    let m = ms[0];
    if ms.iter().any(|v| (v - m).abs() > 1e-14 * m.abs().max(1.0)) {
        return Err(Error::Gap("vacuum needs a mass constant in x".into()));
    }
    if !(m > 0.0) {
        return Err(Error::Gap(format!("mass {m} is not positive; Ker H may be nontrivial")));
    }
    Ok(m)
}

/// `c^{±vac} = 1_{R±}(H_Σ)` at `t`. Static models give [`StateTag::Vacuum`]; otherwise the
/// result is tagged as an instantaneous vacuum.
pub fn vacuum_state(assembler: &HamiltonianAssembler, t: f64) -> Result<(StateBundle, f64)> {
    let m = constant_mass(&assembler.model, t, assembler.m_pts)?;
    let residual = vacuum_identity_residual(assembler, t, m)?;
    if !(residual <= 1e-12) {
        return Err(Error::Construction { invariant: "H^2 = H0^2 + m^2".into(), residual });
    }
    let (vals, vecs) = eigh(&assembler.h_hat(t)?, EigenBackend::Auto)?;
    let gap = vals.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    if gap < 0.5 * m {
        return Err(Error::Gap(format!("min |spec H| = {gap} below mass {m}")));
    }
    let tag = if assembler.model.is_static() { StateTag::Vacuum } else { StateTag::InstantaneousVacuum };
    Ok((bundle_from_hat(&positive_projection(&vals, &vecs), assembler, t, tag)?, residual))
}

/// `L_{∂t}ψ` for a static model: the spin connection along `∂t` vanishes, so this is `∂tψ`
/// (fourth-order stencil on the uniform times of the field).
pub fn lie_derivative_killing(model: &MetricModel, times: &[f64], psi: &SpinorField) -> Result<SpinorField> {
    if !model.is_static() {
        return Err(Error::UnsupportedKilling("∂t is not Killing for a time-dependent model".into()));
    }
    if model.has_conformal_factor() && model.u.depends_on_t() {
        return Err(Error::UnsupportedKilling("time-dependent conformal factor".into()));
    }
    if psi.nt != times.len() || times.len() < 5 {
        return Err(Error::Dimension("field does not match the time list".into()));
    }
    Ok(fd_dt(psi, times[1] - times[0]))
}

/// `‖(D L_X − L_X D)ψ‖ / ‖Dψ‖` on the uniform space-time grid.
pub fn killing_commutator_residual(model: &MetricModel, rep: &GammaRep, times: &[f64], m_pts: usize, psi: &SpinorField) -> Result<f64> {
    let d = assemble_dirac(model, rep, times, m_pts, model.has_conformal_factor())?;
    let dl = d.apply(&lie_derivative_killing(model, times, psi)?)?;
    let ld = lie_derivative_killing(model, times, &d.apply(psi)?)?;
    let dt = times[1] - times[0];
    Ok(dl.sub(&ld).norm(dt) / d.apply(psi)?.norm(dt).max(f64::MIN_POSITIVE))
}

/// Smooth step `½(1 + tanh(3t))` used for the deformation.
pub fn deformation_step(t: f64) -> f64 {
    0.5 * (1.0 + (3.0 * t).tanh())
}

/// `f_us + s(t)(f_phys − f_us)` for `h` and `m`; `u` is taken from the physical model.
pub fn interpolate_models(phys: &MetricModel, us: &MetricModel) -> Result<MetricModel> {
    let s = "(0.5*(1+tanh(3*t)))";
    let blend = |a: &ExprAst, b: &ExprAst| parse_expr(&format!("({b}) + {s}*(({a}) - ({b}))"));
    let model = MetricModel::new(blend(&phys.h, &us.h)?, blend(&phys.m, &us.m)?, phys.u.clone(), phys.t_min, phys.t_max, phys.n)?;
    Ok(MetricModel { h_floor: phys.h_floor.min(us.h_floor), ..model })
}

/// Verifies that `interp` matches `us` for `t ≤ −1` and `phys` for `t ≥ 1` on `[a, b]`, up to
/// the tail of the smooth step.
pub fn check_interpolation_ends(interp: &MetricModel, phys: &MetricModel, us: &MetricModel, a: f64, b: f64, m_pts: usize) -> Result<f64> {
    let tail = deformation_step(-1.0);
    let xs = x_points(m_pts.min(32));
    let mut worst: f64 = 0.0;
    for q in 0..=8 {
        let t_lo = a + (-1.0 - a) * q as f64 / 8.0;
        let t_hi = 1.0 + (b - 1.0) * q as f64 / 8.0;
        for &x in &xs {
            for (t, target) in [(t_lo, us), (t_hi, phys)] {
                let p = interp.point(t, x)?;
                let (ph, pu) = (phys.point(t, x)?, us.point(t, x)?);
                let tol_h = tail * (ph.h.v - pu.h.v).abs() + 1e-12;
                let tol_m = tail * (ph.m.v - pu.m.v).abs() + 1e-12;
                let q = target.point(t, x)?;
                let (dh, dm) = ((p.h.v - q.h.v).abs(), (p.m.v - q.m.v).abs());
                if dh > tol_h || dm > tol_m {
                    return Err(Error::Interpolation(format!("interpolation does not match the end model at t = {t}, x = {x}")));
                }
                worst = worst.max(dh).max(dm);
            }
        }
    }
    Ok(worst)
}

/// Settings of the deformation construction.
#[derive(Debug, Clone, Copy)]
pub struct DeformationWindow {
    pub t_start: f64,
    pub t_end: f64,
    pub max_step: f64,
}

impl Default for DeformationWindow {
    fn default() -> Self {
        Self { t_start: -2.0, t_end: 2.0, max_step: 0.02 }
    }
}

/// Ultrastatic vacuum at `t_start`, carried through the interpolating spacetime to `t_end`, then
/// back to the physical slice `t0` with the physical evolution `phys`.
pub fn deformed_state(
    phys: &HamiltonianSource,
    us: &MetricModel,
    interpolation: &MetricModel,
    window: DeformationWindow,
    t0: f64,
) -> Result<StateBundle> {
    let pa = &phys.assembler;
    let DeformationWindow { t_start, t_end, max_step } = window;
    if !(interpolation.t_min <= t_start && interpolation.t_max >= t_end) {
        return Err(Error::Interpolation(format!(
            "interpolation interval [{}, {}] does not cover [{t_start}, {t_end}]",
            interpolation.t_min, interpolation.t_max
        )));
    }
    check_interpolation_ends(interpolation, &pa.model, us, t_start, t_end, pa.m_pts)?;
    if !us.is_static() {
        return Err(Error::Interpolation("ultrastatic end must be time-independent".into()));
    }
    let us_asm = HamiltonianAssembler::new(&us.with_interval(interpolation.t_min, interpolation.t_max)?, &pa.rep, pa.k_cut, pa.m_pts, t_start)?;
    let (vac, _) = vacuum_state(&us_asm, t_start)?;
    let int_asm = HamiltonianAssembler::new(interpolation, &pa.rep, pa.k_cut, pa.m_pts, t_start)?;
    let grid = TimeGrid::chebyshev(t_start, t_end, 2)?;
    let evo = Evolution::new(HamiltonianSource::new(int_asm, 0.0), &grid, max_step)?;
    // Reference node is t_start (0 is not a node of a 2-point grid on an asymmetric window).
    let u_int = evo.between_nodes(1, 0);
    let c_end = dense::matmul3(&u_int, &vac.reduced_plus_hat, &dense::adjoint(&u_int));
    let back_grid = if t0 < t_end { TimeGrid::chebyshev(t0, t_end, 2)? } else { TimeGrid::chebyshev(t0 - 1.0, t0, 2)? };
    let p_hat = if (t0 - t_end).abs() < 1e-14 {
        c_end
    } else {
        let back = Evolution::new(phys.clone(), &back_grid, max_step)?;
        let u_back = back.between_nodes(0, 1);
        dense::matmul3(&u_back, &c_end, &dense::adjoint(&u_back))
    };
    bundle_from_hat(&dense::hermitian_part(&p_hat), pa, t0, StateTag::Deformed)
}

/// Outcome of the spacetime covariance checks.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceReport {
    pub pairs: Vec<(usize, usize)>,
    /// `max ‖Λ⁺ + Λ⁻ − iG‖ / ‖G‖` with `G` stepped directly.
    pub sum_residual: f64,
    /// `‖iWΛ⁺(0,0)γ₀ − Wc⁺‖ / ‖W‖`: the form of `Λ⁺(0,0)` against `λ⁺`.
    pub form_residual: f64,
    /// `‖Λ⁺(0,0) − ic⁺γ₀‖`.
    pub coincidence_residual: f64,
}

/// `Λ±(t,s) = iU(t,0)c±U(0,s)γ₀` on the reduced system, checked against `iG` on `pairs`.
pub fn spacetime_covariances(state: &StateBundle, kernels: &EvolutionKernels, pairs: &[(usize, usize)]) -> Result<CovarianceReport> {
    let c_plus = &state.reduced_plus;
    let c_minus = state.reduced_minus();
    let mut sum_residual: f64 = 0.0;
    for &(i, j) in pairs {
        let lp = kernels.lambda(c_plus, i, j);
        let lm = kernels.lambda(&c_minus, i, j);
        let g = dense::matmul(&kernels.cauchy_direct(i, j)?, &kernels.gamma0);
        let ig = dense::scale(&g, C64::new(0.0, 1.0));
        sum_residual = sum_residual.max(dense::max_abs(&(&(&lp + &lm) - &ig)) / dense::max_abs(&g).max(f64::MIN_POSITIVE));
    }
    let r = kernels.ref_index();
    let l00 = kernels.lambda(c_plus, r, r);
    let direct = dense::scale(&dense::matmul(c_plus, &kernels.gamma0), C64::new(0.0, 1.0));
    let coincidence_residual = dense::max_abs(&(&l00 - &direct));
    let w = kernels.evolution.source.assembler.gram().matrix(c_plus.nrows());
    let via_kernel = dense::scale(&dense::matmul3(&w, &l00, &kernels.gamma0), C64::new(0.0, 1.0));
    let form = dense::matmul(&w, c_plus);
    let form_residual = dense::max_abs(&(&via_kernel - &form)) / dense::max_abs(&w);
    Ok(CovarianceReport { pairs: pairs.to_vec(), sum_residual, form_residual, coincidence_residual })
}

/// Seeded list of distinct node pairs.
pub fn random_pairs(n: usize, count: usize, seed: u64) -> Vec<(usize, usize)> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (rng.random_range(0..n), rng.random_range(0..n))).collect()
}
