//! Kohn–Nirenberg quantization on the truncated Fourier basis.
//!
//! For a symbol sampled at `x_j = 2πj/M`, the block between modes `k'` and `k` is
//! `â(k'−k, k) = M⁻¹ Σ_j a(x_j, k) e^{−i(k'−k)x_j}`. Coefficients beyond the Nyquist
//! index are taken as zero and the Nyquist coefficient is split evenly between `±M/2`.

use std::f64::consts::PI;

use rustfft::FftPlanner;

use super::dense::{self, CMat};
use super::{Gram, SpatialOperator};
use crate::error::{Error, Result};
use crate::C64;

pub fn x_points(m: usize) -> Vec<f64> {
    (0..m).map(|j| 2.0 * PI * j as f64 / m as f64).collect()
}

/// Fourier coefficients `c_d = M⁻¹ Σ_j f_j e^{−i d x_j}` for `d = −K2..=K2`, with the
/// conventions described at module level.
pub(crate) fn coefficients(samples: &[C64], k2: usize, planner: &mut FftPlanner<f64>) -> Vec<C64> {
    let m = samples.len();
    let fft = planner.plan_fft_forward(m);
    let mut buf = samples.to_vec();
    fft.process(&mut buf);
    let inv_m = 1.0 / m as f64;
    let half = m / 2;
    (-(k2 as i64)..=k2 as i64)
        .map(|d| {
            let a = d.unsigned_abs() as usize;
            if a > half {
                C64::new(0.0, 0.0)
            } else if m % 2 == 0 && a == half {
                buf[half] * (0.5 * inv_m)
            } else {
                buf[d.rem_euclid(m as i64) as usize] * inv_m
            }
        })
        .collect()
}

/// Fraction of spectral energy of `samples` in the top eighth of the resolvable band.
pub fn aliasing_fraction(samples: &[C64]) -> f64 {
    let m = samples.len();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    let mut buf = samples.to_vec();
    fft.process(&mut buf);
    let half = m / 2;
    let band = (m / 8).max(1);
    let mut top = 0.0;
    let mut total = 0.0;
    for (i, c) in buf.iter().enumerate() {
        let d = if i <= half { i } else { m - i };
        let e = c.norm_sqr();
        total += e;
        if d + band > half {
            top += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        top / total
    }
}

/// Scalar Kohn–Nirenberg quantization. `symbol(j, k)` is `a(x_j, k)`.
pub fn quantize_scalar(k_cut: usize, m: usize, symbol: impl Fn(usize, i64) -> C64) -> CMat {
    let dim = 2 * k_cut + 1;
    let mut planner = FftPlanner::new();
    let mut out = dense::zeros(dim, dim);
    let mut worst_alias: f64 = 0.0;
    for col in 0..dim {
        let k = col as i64 - k_cut as i64;
        let samples: Vec<C64> = (0..m).map(|j| symbol(j, k)).collect();
        if col == k_cut || col == 0 || col == dim - 1 {
            worst_alias = worst_alias.max(aliasing_fraction(&samples));
        }
        let c = coefficients(&samples, 2 * k_cut, &mut planner);
        for row in 0..dim {
            // d = k' − k ranges over −2K..=2K; offset by 2K.
            out[(row, col)] = c[row + 2 * k_cut - col];
        }
    }
    if worst_alias > 1e-20 {
        log::warn!("symbol has spectral energy fraction {worst_alias:e} near the x-Nyquist band (M = {m})");
    }
    out
}

/// Matrix of multiplication by `f` (real or complex samples on the x grid).
pub fn multiplication_matrix(k_cut: usize, samples: &[C64]) -> CMat {
    let dim = 2 * k_cut + 1;
    let mut planner = FftPlanner::new();
    let c = coefficients(samples, 2 * k_cut, &mut planner);
    CMat::from_fn(dim, dim, |row, col| c[row + 2 * k_cut - col])
}

/// Diagonal Fourier multiplier `g(D_x)`.
pub fn fourier_multiplier(k_cut: usize, g: impl Fn(i64) -> C64) -> CMat {
    let dim = 2 * k_cut + 1;
    CMat::from_fn(dim, dim, |row, col| if row == col { g(row as i64 - k_cut as i64) } else { C64::new(0.0, 0.0) })
}

/// Matrix-valued quantization: `symbol(j, k)` returns the `N×N` value of `a(x_j, k)`.
pub fn quantize(
    k_cut: usize,
    rank: usize,
    m: usize,
    order: f64,
    symbol: impl Fn(usize, i64) -> CMat,
) -> Result<SpatialOperator> {
    if m < 4 || m % 2 != 0 {
        return Err(Error::Dimension(format!("space grid must be even and at least 4, got {m}")));
    }
    let dim = 2 * k_cut + 1;
    let values: Vec<Vec<CMat>> = (0..dim).map(|c| (0..m).map(|j| symbol(j, c as i64 - k_cut as i64)).collect()).collect();
    for v in values.iter().flatten() {
        if v.nrows() != rank || v.ncols() != rank {
            return Err(Error::Dimension(format!("symbol value is {}x{}, rank is {rank}", v.nrows(), v.ncols())));
        }
    }
    let mut mat = dense::zeros(dim * rank, dim * rank);
    for a in 0..rank {
        for b in 0..rank {
            let s = quantize_scalar(k_cut, m, |j, k| values[(k + k_cut as i64) as usize][j][(a, b)]);
            for r in 0..dim {
                for c in 0..dim {
                    mat[(r * rank + a, c * rank + b)] = s[(r, c)];
                }
            }
        }
    }
    SpatialOperator::new(k_cut, rank, mat, Gram::Identity, order)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real(v: f64) -> C64 {
        C64::new(v, 0.0)
    }

    #[test]
    fn multiplication_by_cos_shifts_modes() {
        let m = 32;
        let xs = x_points(m);
        let samples: Vec<C64> = xs.iter().map(|x| real(x.cos())).collect();
        let t = multiplication_matrix(4, &samples);
        // cos x e^{ikx} = ½ e^{i(k+1)x} + ½ e^{i(k−1)x}
        let k = 4;
        assert!((t[(k + 1, k)] - real(0.5)).norm() < 1e-15);
        assert!((t[(k - 1, k)] - real(0.5)).norm() < 1e-15);
        assert!(t[(k, k)].norm() < 1e-15);
    }

    #[test]
    fn multiplier_is_diagonal() {
        let d = fourier_multiplier(3, |k| real(k as f64));
        assert_eq!(d[(0, 0)], real(-3.0));
        assert_eq!(d[(6, 6)], real(3.0));
        assert_eq!(d[(1, 0)], real(0.0));
    }

    #[test]
    fn constant_section_times_function() {
        // Applying Op(f) to the constant mode reproduces the Fourier coefficients of f.
        let m = 16;
        let xs = x_points(m);
        let f: Vec<C64> = xs.iter().map(|x| real(1.0 + 0.3 * (2.0 * x).sin())).collect();
        let op = quantize_scalar(3, m, |j, _| f[j]);
        // sin 2x = (e^{2ix} − e^{−2ix}) / 2i
        assert!((op[(3, 3)] - real(1.0)).norm() < 1e-15);
        assert!((op[(5, 3)] - C64::new(0.0, -0.15)).norm() < 1e-15);
        assert!((op[(1, 3)] - C64::new(0.0, 0.15)).norm() < 1e-15);
    }

    #[test]
    fn aliasing_fraction_flags_high_modes() {
        let m = 16;
        let xs = x_points(m);
        let smooth: Vec<C64> = xs.iter().map(|x| real(x.cos())).collect();
        let rough: Vec<C64> = xs.iter().map(|x| real((7.0 * x).cos())).collect();
        assert!(aliasing_fraction(&smooth) < 1e-25);
        assert!(aliasing_fraction(&rough) > 0.5);
    }
}
