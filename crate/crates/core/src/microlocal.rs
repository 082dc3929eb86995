//! Frequency-domain diagnostics: wrong-frequency leakage of evolved `c±` data and the
//! high-frequency intertwining defect `𝒰(t,0)P̃⁺(0) − P̃⁺(t)𝒰(t,0)`.
//!
//! Sign convention: `∂tφ = iĤφ`, so an eigenmode with `Ĥv = ωv` evolves as `e^{iωt}v`, and the
//! time transform uses the kernel `e^{−iτt}`; positive-energy data sit at `τ > 0`.

use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::evolution::{step_between, Evolution, HamiltonianSource, Integrator};
use crate::projections::ProjectorFamily;
use crate::psdo::decay::{decay_profile_mat, DecayProfile};
use crate::psdo::dense::{self, CMat};
use crate::psdo::x_points;
use crate::C64;

/// Modes `|k| ≤ ZERO_COLLAR` are excluded from leakage fractions.
pub const ZERO_COLLAR: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Wavepacket {
    pub x0: f64,
    pub k0: i64,
    pub width: f64,
    /// Unit spinor polarization.
    pub polarization: Vec<C64>,
}

impl Wavepacket {
    /// Gaussian packet `exp(−(x−x₀)²/2w²)e^{ik₀x} v`, normalized, validated on cutoff `k_cut`.
    pub fn new(x0: f64, k0: i64, width: f64, polarization: Vec<C64>, k_cut: usize) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::Resolution(format!("packet width {width} must be positive")));
        }
        let n = dense::vec_norm(&polarization);
        if !(n > 0.0) {
            return Err(Error::Resolution("zero polarization".into()));
        }
        let p = Self { x0, k0, width, polarization: polarization.iter().map(|v| v / n).collect() };
        let frac = p.band_fraction(k_cut);
        if frac < 0.99 {
            return Err(Error::Resolution(format!("only {:.4} of the packet energy lies in its band on the grid", frac)));
        }
        Ok(p)
    }

    /// Seeded packet placement: random centre and polarization.
    pub fn seeded(k0: i64, width: f64, rank: usize, k_cut: usize, seed: u64) -> Result<Self> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x0 = rng.random_range(0.0..std::f64::consts::TAU);
        let pol: Vec<C64> = (0..rank).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        Self::new(x0, k0, width, pol, k_cut)
    }

    fn coefficient(&self, k: i64) -> C64 {
        let q = (k - self.k0) as f64;
        C64::from_polar((-0.5 * self.width * self.width * q * q).exp(), -(k as f64) * self.x0)
    }

    pub fn band(&self) -> f64 {
        4.0 / self.width
    }

    /// Energy within `|k − k₀| ≤ 4/w` and `|k| ≤ K`, relative to the untruncated packet.
    pub fn band_fraction(&self, k_cut: usize) -> f64 {
        let reach = (12.0 / self.width).ceil() as i64 + 1;
        let total: f64 = (self.k0 - reach..=self.k0 + reach).map(|k| self.coefficient(k).norm_sqr()).sum();
        let inside: f64 = (self.k0 - reach..=self.k0 + reach)
            .filter(|&k| k.unsigned_abs() as usize <= k_cut && ((k - self.k0) as f64).abs() <= self.band())
            .map(|k| self.coefficient(k).norm_sqr())
            .sum();
        inside / total
    }

    /// Coefficient vector on the truncated basis (hat picture), unit norm.
    pub fn vector(&self, k_cut: usize) -> Vec<C64> {
        let n = self.polarization.len();
        let kc = k_cut as i64;
        let mut v = vec![C64::new(0.0, 0.0); (2 * k_cut + 1) * n];
        for k in -kc..=kc {
            let c = self.coefficient(k);
            for (s, p) in self.polarization.iter().enumerate() {
                v[(k + kc) as usize * n + s] = c * p;
            }
        }
        let norm = dense::vec_norm(&v);
        v.iter().map(|x| x / norm).collect()
    }
}

/// Which energy sign the data are meant to carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Plus,
    Minus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeakageReport {
    pub polarity: Polarity,
    /// Energy fractions at `τ > 0` and `τ < 0` (outside the collar), of the energy outside the collar.
    pub positive_fraction: f64,
    pub negative_fraction: f64,
    /// Fraction of the total energy in modes `|k| ≤ collar`.
    pub zero_section_fraction: f64,
    /// Wrong-sign fraction: `negative_fraction` for `+`, `positive_fraction` for `−`.
    pub leakage: f64,
    /// `‖c±f‖²` at the initial slice (unit packet).
    pub slice_energy: f64,
    pub window: (f64, f64),
    pub samples: usize,
    pub taper: &'static str,
    pub collar: usize,
}

/// Uniform time window for the leakage transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeakageWindow {
    pub t_start: f64,
    pub t_end: f64,
    pub steps: usize,
    pub collar: usize,
}

impl LeakageWindow {
    pub fn new(t_start: f64, t_end: f64, steps: usize) -> Self {
        Self { t_start, t_end, steps, collar: ZERO_COLLAR }
    }

    fn dt(&self) -> f64 {
        (self.t_end - self.t_start) / self.steps as f64
    }

    fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|q| self.t_start + q as f64 * self.dt()).collect()
    }
}

/// Evolves `vectors` (hat picture, given at `t0`) over the window with midpoint steps and
/// returns the trajectories `[vector][time][component]`.
pub fn evolve_over_window(source: &HamiltonianSource, window: &LeakageWindow, t0: f64, vectors: &[Vec<C64>]) -> Result<Vec<Vec<Vec<C64>>>> {
    let times = window.times();
    let dt = window.dt();
    let q0 = ((t0 - window.t_start) / dt).round() as usize;
    if q0 > window.steps || (times[q0] - t0).abs() > 1e-10 * (1.0 + t0.abs()) {
        return Err(Error::Resolution(format!("initial time {t0} is not a sample of the window")));
    }
    let nt = times.len();
    let mut traj: Vec<Vec<Vec<C64>>> = vectors.iter().map(|_| vec![Vec::new(); nt]).collect();
    for (tr, v) in traj.iter_mut().zip(vectors) {
        tr[q0] = v.clone();
    }
    for q in q0..window.steps {
        let s = step_between(source, times[q], times[q + 1], Integrator::Midpoint)?;
        for tr in traj.iter_mut() {
            tr[q + 1] = dense::mat_vec(&s, &tr[q]);
        }
    }
    for q in (0..q0).rev() {
        let s = dense::adjoint(&step_between(source, times[q], times[q + 1], Integrator::Midpoint)?);
        for tr in traj.iter_mut() {
            tr[q] = dense::mat_vec(&s, &tr[q + 1]);
        }
    }
    Ok(traj)
}

/// Hann-tapered temporal spectrum of one trajectory, split by frequency sign.
fn split_energy(traj: &[Vec<C64>], k_cut: usize, rank: usize, collar: usize) -> (f64, f64, f64, f64) {
    let nt = traj.len();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(nt);
    let taper: Vec<f64> = (0..nt).map(|q| (std::f64::consts::PI * q as f64 / (nt - 1) as f64).sin().powi(2)).collect();
    let (mut pos, mut neg, mut zero_sec, mut total) = (0.0, 0.0, 0.0, 0.0);
    let mut buf = vec![C64::new(0.0, 0.0); nt];
    for comp in 0..traj[0].len() {
        let k = comp / rank;
        let kk = (k as i64 - k_cut as i64).unsigned_abs() as usize;
        for q in 0..nt {
            buf[q] = traj[q][comp] * taper[q];
        }
        fft.process(&mut buf);
        for (bin, v) in buf.iter().enumerate() {
            let e = v.norm_sqr();
            total += e;
            if kk <= collar {
                zero_sec += e;
                continue;
            }
            // Bin b < n/2 is τ > 0; the zero and Nyquist bins count for neither side.
            if bin == 0 || 2 * bin == nt {
                continue;
            }
            if 2 * bin < nt {
                pos += e;
            } else {
                neg += e;
            }
        }
    }
    (pos, neg, zero_sec, total)
}

fn resolution_check(source: &HamiltonianSource, window: &LeakageWindow, packet: &Wavepacket, t0: f64) -> Result<()> {
    let a = &source.assembler;
    let lo = (packet.k0.unsigned_abs() as f64 - packet.band()).max(0.0);
    let hi = packet.k0.unsigned_abs() as f64 + packet.band();
    if lo <= window.collar as f64 {
        return Err(Error::Resolution(format!("packet band reaches the zero-section collar |k| ≤ {}", window.collar)));
    }
    let xs = x_points(a.m_pts.min(64));
    let (mut h_min, mut h_max, mut m_max) = (f64::INFINITY, 0.0f64, 0.0f64);
    for &x in &xs {
        let p = a.model.point(t0, x)?;
        h_min = h_min.min(p.h.v);
        h_max = h_max.max(p.h.v);
        m_max = m_max.max(p.m.v.abs());
    }
    let omega_hi = (hi * hi / h_min + m_max * m_max).sqrt() + source.lambda;
    let omega_lo = lo / h_max.sqrt();
    let length = window.t_end - window.t_start;
    if std::f64::consts::PI / window.dt() < 2.0 * omega_hi {
        return Err(Error::Resolution(format!("window step {} cannot resolve frequency {omega_hi}", window.dt())));
    }
    if length * omega_lo < 4.0 * std::f64::consts::TAU {
        return Err(Error::Resolution("packet too wide for window: fewer than four periods of its lowest frequency".into()));
    }
    Ok(())
}

/// Leakage of `P̂±f` for each projection in `projections` (hat picture, at `t0`).
pub fn leakage(
    source: &HamiltonianSource,
    projections: &[(CMat, Polarity)],
    packet: &Wavepacket,
    window: &LeakageWindow,
    t0: f64,
) -> Result<Vec<LeakageReport>> {
    let a = &source.assembler;
    resolution_check(source, window, packet, t0)?;
    let f = packet.vector(a.k_cut);
    let data: Vec<Vec<C64>> = projections.iter().map(|(p, _)| dense::mat_vec(p, &f)).collect();
    let traj = evolve_over_window(source, window, t0, &data)?;
    Ok(projections
        .iter()
        .zip(&traj)
        .zip(&data)
        .map(|(((_, pol), tr), d)| {
            let (pos, neg, zero_sec, total) = split_energy(tr, a.k_cut, a.rep.rank, window.collar);
            let outside = (total - zero_sec).max(f64::MIN_POSITIVE);
            let (pf, nf) = (pos / outside, neg / outside);
            LeakageReport {
                polarity: *pol,
                positive_fraction: pf,
                negative_fraction: nf,
                zero_section_fraction: zero_sec / total.max(f64::MIN_POSITIVE),
                leakage: if *pol == Polarity::Plus { nf } else { pf },
                slice_energy: dense::vec_norm(d).powi(2),
                window: (window.t_start, window.t_end),
                samples: window.steps + 1,
                taper: "hann",
                collar: window.collar,
            }
        })
        .collect())
}

/// `Δ(t_i, 0) = 𝒰(t_i,0)P̃⁺(0) − P̃⁺(t_i)𝒰(t_i,0)` at every node; returns the worst profile and
/// the per-node profiles.
pub fn intertwining_defect(proj: &ProjectorFamily, evolution: &Evolution, thresholds: &[usize]) -> Result<(DecayProfile, Vec<DecayProfile>)> {
    if proj.grid.nodes != evolution.grid.nodes {
        return Err(Error::Dimension("projections and evolution use different time grids".into()));
    }
    intertwining_defect_family(&proj.p_plus, evolution, proj.k_cut, proj.rank, thresholds)
}

/// [`intertwining_defect`] for a bare hat-picture family sampled on the evolution's nodes.
pub fn intertwining_defect_family(
    p_plus: &[CMat],
    evolution: &Evolution,
    k_cut: usize,
    rank: usize,
    thresholds: &[usize],
) -> Result<(DecayProfile, Vec<DecayProfile>)> {
    if p_plus.len() != evolution.from_ref.len() {
        return Err(Error::Dimension("projection family and evolution differ in node count".into()));
    }
    let p0 = &p_plus[evolution.ref_index];
    let mut worst = DecayProfile::from_norms(thresholds.to_vec(), vec![0.0; thresholds.len()]);
    let mut per_node = Vec::with_capacity(p_plus.len());
    for (u, p) in evolution.from_ref.iter().zip(p_plus) {
        let d = &dense::matmul(u, p0) - &dense::matmul(p, u);
        let prof = decay_profile_mat(&d, k_cut, rank, thresholds);
        worst = worst.worst(&prof);
        per_node.push(prof);
    }
    Ok((worst, per_node))
}
