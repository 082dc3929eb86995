//! Orthonormal frames, frame Christoffel symbols and spin coefficients.
//!
//! Frames come from the Minkowski orthonormalization `F(g)`: the rows of `F` are the frame
//! vectors in coordinates, `e_a = Σ_μ F_{aμ} ∂_μ`. Because `F` is upper-triangular, `e_0` is the
//! unit normal of the constant-`t` slices and the remaining vectors are tangent to them.
//! Derivatives of the frame are obtained by running the same factorization on dual numbers.

use crate::clifford::GammaRep;
use crate::error::{Error, Result};
use crate::modelspec::{Dual, MetricModel, Scalar};
use crate::psdo::dense::{self, CMat};

/// Upper-triangular `F` with positive diagonal and `F g Fᵀ = η`.
///
/// Writes `g = U η Uᵀ` with `U` upper-triangular, eliminating from the last coordinate, and
/// returns `F = U⁻¹`. Every pivot must carry the sign of the matching entry of `η`.
pub fn minkowski_orthonormalize<S: Scalar>(g: &[Vec<S>]) -> Result<Vec<Vec<S>>> {
    let n = g.len();
    if n == 0 || g.iter().any(|r| r.len() != n) {
        return Err(Error::Dimension("metric must be a nonempty square matrix".into()));
    }
    for i in 0..n {
        for j in 0..i {
            let (a, b) = (g[i][j].value(), g[j][i].value());
            if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                return Err(Error::Structure(format!("metric is not symmetric at ({i},{j})")));
            }
        }
    }
    let eta = |k: usize| if k == 0 { -1.0 } else { 1.0 };
    let zero = S::cst(0.0);
    let mut u = vec![vec![zero; n]; n];
    for j in (0..n).rev() {
        let mut p = g[j][j];
        for k in (j + 1)..n {
            p = p - u[j][k] * u[j][k] * S::cst(eta(k));
        }
        if !(p.value() * eta(j) > 0.0) {
            return Err(Error::Signature { index: j, pivot: p.value(), expected: eta(j) });
        }
        let ujj = (p * S::cst(eta(j))).sqrt();
        u[j][j] = ujj;
        for i in 0..j {
            let mut s = g[i][j];
            for k in (j + 1)..n {
                s = s - u[i][k] * S::cst(eta(k)) * u[j][k];
            }
            u[i][j] = s / (S::cst(eta(j)) * ujj);
        }
    }
    // Back substitution for the upper-triangular inverse.
    let mut f = vec![vec![zero; n]; n];
    for i in (0..n).rev() {
        f[i][i] = S::cst(1.0) / u[i][i];
        for j in (i + 1)..n {
            let mut s = zero;
            for k in i..j {
                s = s + f[i][k] * u[k][j];
            }
            f[i][j] = -s / u[j][j];
        }
    }
    Ok(f)
}

/// Coordinate metric of the model: `e^{2u}·diag(−1, h, 1, …)` (or without the conformal factor).
pub fn model_metric(model: &MetricModel, t: f64, x: f64, conformal: bool) -> Result<Vec<Vec<Dual>>> {
    let p = model.point(t, x)?;
    let n = model.n;
    let w = if conformal { (p.u * Dual::cst(2.0)).exp() } else { Dual::cst(1.0) };
    let mut g = vec![vec![Dual::cst(0.0); n]; n];
    g[0][0] = -w;
    g[1][1] = w * p.h;
    for (k, row) in g.iter_mut().enumerate().skip(2) {
        row[k] = w;
    }
    Ok(g)
}

/// Frame and connection data at one spacetime point.
#[derive(Debug, Clone, PartialEq)]
pub struct FramePoint {
    pub n: usize,
    /// `F_{aμ}`: frame vectors as rows.
    pub frame: Vec<Vec<f64>>,
    /// `Γ^a_{bc}` flattened as `[(a·n + b)·n + c]`.
    pub gamma: Vec<f64>,
}

impl FramePoint {
    pub fn christoffel(&self, a: usize, b: usize, c: usize) -> f64 {
        self.gamma[(a * self.n + b) * self.n + c]
    }

    /// `Γ_{abc} = η_{aa} Γ^a_{bc}`.
    pub fn christoffel_lower(&self, a: usize, b: usize, c: usize) -> f64 {
        let eta = if a == 0 { -1.0 } else { 1.0 };
        eta * self.christoffel(a, b, c)
    }

    /// `max |Γ_{abc} + Γ_{cba}|`.
    pub fn antisymmetry_residual(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    worst = worst.max((self.christoffel_lower(a, b, c) + self.christoffel_lower(c, b, a)).abs());
                }
            }
        }
        worst
    }
}

/// Frame Christoffels via the Koszul formula for an orthonormal frame:
/// `Γ_{abc} = ½(c_{bca} − c_{cab} + c_{abc})` with `c_{bca} = g([e_b, e_c], e_a)`.
pub fn frame_point(g: &[Vec<Dual>]) -> Result<FramePoint> {
    let n = g.len();
    let f = minkowski_orthonormalize(g)?;
    let fv: Vec<Vec<f64>> = f.iter().map(|r| r.iter().map(|d| d.v).collect()).collect();
    // Directional derivative e_b(F_{cν}); only t and x derivatives are nonzero.
    let along = |b: usize, d: &Dual| fv[b][0] * d.dt + if n > 1 { fv[b][1] * d.dx } else { 0.0 };
    let f_inv = invert_upper(&fv);
    let eta = |k: usize| if k == 0 { -1.0 } else { 1.0 };
    // C^d_{bc}
    let mut cst = vec![0.0; n * n * n];
    for b in 0..n {
        for c in 0..n {
            for nu in 0..n {
                let comp = along(b, &f[c][nu]) - along(c, &f[b][nu]);
                if comp == 0.0 {
                    continue;
                }
                for d in 0..n {
                    cst[(d * n + b) * n + c] += comp * f_inv[nu][d];
                }
            }
        }
    }
    let lower_c = |b: usize, c: usize, a: usize| eta(a) * cst[(a * n + b) * n + c];
    let mut gamma = vec![0.0; n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let low = 0.5 * (lower_c(b, c, a) - lower_c(c, a, b) + lower_c(a, b, c));
                gamma[(a * n + b) * n + c] = eta(a) * low;
            }
        }
    }
    Ok(FramePoint { n, frame: fv, gamma })
}

fn invert_upper(f: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = f.len();
    let mut inv = vec![vec![0.0; n]; n];
    for i in (0..n).rev() {
        inv[i][i] = 1.0 / f[i][i];
        for j in (i + 1)..n {
            let s: f64 = (i..j).map(|k| inv[i][k] * f[k][j]).sum();
            inv[i][j] = -s / f[j][j];
        }
    }
    inv
}

#[derive(Debug, Clone)]
pub struct FrameData {
    pub times: Vec<f64>,
    pub xs: Vec<f64>,
    pub conformal: bool,
    /// Indexed `[time][x]`.
    pub points: Vec<Vec<FramePoint>>,
}

impl FrameData {
    pub fn max_antisymmetry_residual(&self) -> f64 {
        self.points.iter().flatten().map(FramePoint::antisymmetry_residual).fold(0.0, f64::max)
    }

    /// `max |Γ^a_{0b}|`: zero exactly when `e_0`-parallel transport is trivial in this frame.
    pub fn max_time_connection(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for p in self.points.iter().flatten() {
            for a in 0..p.n {
                for b in 0..p.n {
                    worst = worst.max(p.christoffel(a, 0, b).abs());
                }
            }
        }
        worst
    }
}

pub fn frame_christoffels(model: &MetricModel, times: &[f64], xs: &[f64], conformal: bool) -> Result<FrameData> {
    let mut points = Vec::with_capacity(times.len());
    for &t in times {
        let row = xs.iter().map(|&x| frame_point(&model_metric(model, t, x, conformal)?)).collect::<Result<Vec<_>>>()?;
        points.push(row);
    }
    Ok(FrameData { times: times.to_vec(), xs: xs.to_vec(), conformal, points })
}

/// `max |F g Fᵀ − η|` over the sample points.
pub fn orthonormality_residual(model: &MetricModel, times: &[f64], xs: &[f64], conformal: bool) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &t in times {
        for &x in xs {
            let g: Vec<Vec<f64>> = model_metric(model, t, x, conformal)?.iter().map(|r| r.iter().map(|d| d.v).collect()).collect();
            let f = minkowski_orthonormalize(&g)?;
            let n = g.len();
            for a in 0..n {
                for b in 0..n {
                    let mut s = 0.0;
                    for i in 0..n {
                        for j in 0..n {
                            s += f[a][i] * g[i][j] * f[b][j];
                        }
                    }
                    let eta = if a != b { 0.0 } else if a == 0 { -1.0 } else { 1.0 };
                    worst = worst.max((s - eta).abs());
                }
            }
        }
    }
    Ok(worst)
}

/// `σ_b = ¼ Γ^a_{bc} γ_a γ^c` for each `b`.
pub fn spin_coefficients_at(p: &FramePoint, rep: &GammaRep) -> Result<Vec<CMat>> {
    if p.n != rep.n {
        return Err(Error::Dimension(format!("frame dimension {} vs representation {}", p.n, rep.n)));
    }
    let n = p.n;
    let products: Vec<Vec<CMat>> =
        (0..n).map(|a| (0..n).map(|c| dense::matmul(&rep.gammas[a], &rep.gamma_upper(c))).collect()).collect();
    Ok((0..n)
        .map(|b| {
            let mut s = dense::zeros(rep.rank, rep.rank);
            for a in 0..n {
                for c in 0..n {
                    let g = p.christoffel(a, b, c);
                    if g != 0.0 {
                        s = &s + &dense::scale_real(&products[a][c], 0.25 * g);
                    }
                }
            }
            s
        })
        .collect())
}

/// Spin coefficients on the whole grid, indexed `[time][x][b]`.
pub fn spin_coefficients(frames: &FrameData, rep: &GammaRep) -> Result<Vec<Vec<Vec<CMat>>>> {
    frames
        .points
        .iter()
        .map(|row| row.iter().map(|p| spin_coefficients_at(p, rep)).collect())
        .collect()
}

/// `max ‖σ_b* β + β σ_b‖_F`.
pub fn beta_compatibility_residual(sigmas: &[CMat], rep: &GammaRep) -> f64 {
    sigmas
        .iter()
        .map(|s| dense::fro(&(&dense::matmul(&dense::adjoint(s), &rep.beta) + &dense::matmul(&rep.beta, s))))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::build_gamma_rep;

    fn diag(v: &[f64]) -> Vec<Vec<f64>> {
        (0..v.len()).map(|i| (0..v.len()).map(|j| if i == j { v[i] } else { 0.0 }).collect()).collect()
    }

    #[test]
    fn eta_maps_to_identity() {
        let f = minkowski_orthonormalize(&diag(&[-1.0, 1.0, 1.0, 1.0])).unwrap();
        assert_eq!(f, diag(&[1.0, 1.0, 1.0, 1.0]));
    }

    #[test]
    fn diagonal_example() {
        let f = minkowski_orthonormalize(&diag(&[-4.0, 9.0])).unwrap();
        assert_eq!(f, vec![vec![0.5, 0.0], vec![0.0, 1.0 / 3.0]]);
    }

    #[test]
    fn wrong_signature_rejected() {
        let err = minkowski_orthonormalize(&diag(&[1.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::Signature { index: 0, .. }));
        let err = minkowski_orthonormalize(&diag(&[-1.0, -1.0])).unwrap_err();
        assert!(matches!(err, Error::Signature { index: 1, .. }));
    }

    #[test]
    fn first_frame_vector_is_slice_normal() {
        // Metric with shift: the row e_0 must be g-orthogonal to ∂_x.
        let g = vec![vec![-1.0, 0.3], vec![0.3, 2.0]];
        let f = minkowski_orthonormalize(&g).unwrap();
        let e0 = &f[0];
        let dot = e0[0] * g[0][1] + e0[1] * g[1][1];
        assert!(dot.abs() < 1e-15);
        assert_eq!(f[1][0], 0.0);
    }

    #[test]
    fn exponential_metric_christoffel() {
        let m = MetricModel::parse("exp(2*t)", "1", "0", -1.0, 1.0, 2).unwrap();
        let fd = frame_christoffels(&m, &[0.3], &[1.0], false).unwrap();
        let p = &fd.points[0][0];
        assert!((p.christoffel(0, 1, 1) - 1.0).abs() < 1e-14);
        assert!((p.christoffel(1, 1, 0) - 1.0).abs() < 1e-14);
        assert!(p.christoffel(1, 0, 1).abs() < 1e-15);
    }

    #[test]
    fn flat_spin_coefficients_vanish() {
        let rep = build_gamma_rep(2).unwrap();
        let m = MetricModel::parse("1", "1", "0", -1.0, 1.0, 2).unwrap();
        let fd = frame_christoffels(&m, &[0.0], &[0.0, 1.0], false).unwrap();
        let s = spin_coefficients(&fd, &rep).unwrap();
        assert!(s.iter().flatten().flatten().all(|m| dense::fro(m) == 0.0));
    }
}
