//! Hermitian functional calculus for gram-self-adjoint operators.

use std::f64::consts::FRAC_PI_2;

use super::dense::{self, CMat};
use super::{jacobi, SpatialOperator};
use crate::error::{Error, Result};
use crate::C64;

/// Symmetry tolerance accepted by [`hermitize_and_eig`].
pub const SELF_ADJOINT_TOL: f64 = 1e-8;

/// Matrices at or below this dimension use the Jacobi route under [`EigenBackend::Auto`].
pub const JACOBI_MAX_DIM: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EigenBackend {
    #[default]
    Auto,
    Jacobi,
    Faer,
}

/// Hermitian eigendecomposition of a raw matrix with the chosen backend.
pub fn eigh(a: &CMat, backend: EigenBackend) -> Result<(Vec<f64>, CMat)> {
    match backend {
        EigenBackend::Jacobi => jacobi::jacobi_eigh(a),
        EigenBackend::Faer => dense::eigh_faer(&dense::hermitian_part(a)),
        EigenBackend::Auto if a.nrows() <= JACOBI_MAX_DIM => jacobi::jacobi_eigh(a),
        EigenBackend::Auto => dense::eigh_faer(&dense::hermitian_part(a)),
    }
}

#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// Gram-orthonormal eigenvectors `V = L^{-*} Û`.
    pub vectors: CMat,
    /// Orthonormal eigenvectors `Û` of the Hermitian representative.
    pub hat_vectors: CMat,
    /// The factor `L` with `W = L L*` (identity for the Euclidean gram).
    pub transform: CMat,
}

pub fn hermitize_and_eig(a: &SpatialOperator) -> Result<Eigen> {
    hermitize_and_eig_with(a, EigenBackend::Auto)
}

pub fn hermitize_and_eig_with(a: &SpatialOperator, backend: EigenBackend) -> Result<Eigen> {
    a.gram.min_eigenvalue().and_then(|min| {
        if min > 0.0 {
            Ok(())
        } else {
            Err(Error::InnerProduct(format!("gram has non-positive eigenvalue {min:e}")))
        }
    })?;
    let residual = a.self_adjoint_residual();
    if !(residual <= SELF_ADJOINT_TOL) {
        return Err(Error::SelfAdjointness { residual, tolerance: SELF_ADJOINT_TOL });
    }
    let hat = dense::hermitian_part(&a.hat());
    let (values, hat_vectors) = eigh(&hat, backend)?;
    let vectors = match &a.gram {
        super::Gram::Identity => hat_vectors.clone(),
        super::Gram::Factored(f) => dense::matmul(&dense::adjoint(&f.l_inv), &hat_vectors),
    };
    let transform = match &a.gram {
        super::Gram::Identity => dense::identity(a.dim()),
        super::Gram::Factored(f) => f.l.clone(),
    };
    Ok(Eigen { values, vectors, hat_vectors, transform })
}

fn spectral_hat(eig: &Eigen, f: &dyn Fn(f64) -> C64) -> Result<CMat> {
    let mut d = Vec::with_capacity(eig.values.len());
    for &lambda in &eig.values {
        let v = f(lambda);
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(Error::Domain { eigenvalue: lambda });
        }
        d.push(v);
    }
    Ok(dense::reconstruct(&eig.hat_vectors, &d))
}

/// `f(A)` for a Hermitian matrix (no gram bookkeeping); eigenvalues passed to `f` ascending.
pub fn hermitian_function(a: &CMat, f: impl Fn(f64) -> C64) -> Result<CMat> {
    let (values, vectors) = eigh(&dense::hermitian_part(a), EigenBackend::Auto)?;
    let mut d = Vec::with_capacity(values.len());
    for &lambda in &values {
        let v = f(lambda);
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(Error::Domain { eigenvalue: lambda });
        }
        d.push(v);
    }
    Ok(dense::reconstruct(&vectors, &d))
}

/// `f(A)` for real-valued `f`; the result is gram-self-adjoint.
pub fn operator_function(a: &SpatialOperator, f: impl Fn(f64) -> f64) -> Result<SpatialOperator> {
    let eig = hermitize_and_eig(a)?;
    let hat = spectral_hat(&eig, &|x| C64::new(f(x), 0.0))?;
    SpatialOperator::from_hat(a.k_cut, a.rank, &hat, a.gram.clone(), 0.0)
}

/// `f(A)` for complex-valued `f` (e.g. `e^{isx}`).
pub fn operator_function_complex(a: &SpatialOperator, f: impl Fn(f64) -> C64) -> Result<SpatialOperator> {
    let eig = hermitize_and_eig(a)?;
    let hat = spectral_hat(&eig, &f)?;
    SpatialOperator::from_hat(a.k_cut, a.rank, &hat, a.gram.clone(), 0.0)
}

/// `sign(A)`; fails with a domain error if an eigenvalue is closer than `1e-6` to zero.
pub fn sign(a: &SpatialOperator) -> Result<SpatialOperator> {
    operator_function(a, |x| if x.abs() < 1e-6 { f64::NAN } else { x.signum() })
}

/// `e^{isA}`.
pub fn exp_i(a: &SpatialOperator, s: f64) -> Result<SpatialOperator> {
    operator_function_complex(a, |x| C64::from_polar(1.0, s * x))
}

/// `A^{-1/2}` by eigendecomposition, cross-validated against the integral representation
/// `A^{-1/2} = (2/π) ∫₀^∞ (A + s²)^{-1} ds`.
pub fn inverse_sqrt(a: &SpatialOperator) -> Result<SpatialOperator> {
    let eig = hermitize_and_eig(a)?;
    let hat = spectral_hat(&eig, &|x| if x > 0.0 { C64::new(x.powf(-0.5), 0.0) } else { C64::new(f64::NAN, 0.0) })?;
    let quad = inverse_sqrt_hat_quadrature(&dense::hermitian_part(&a.hat()), 1e-10)?;
    let relative = dense::fro(&(&hat - &quad)) / dense::fro(&hat);
    if !(relative <= 1e-6) {
        return Err(Error::CrossValidation { what: "inverse square root (eigen vs integral)".into(), relative });
    }
    SpatialOperator::from_hat(a.k_cut, a.rank, &hat, a.gram.clone(), -0.5 * a.order)
}

/// The integral formula alone, evaluated by adaptive Gauss–Kronrod quadrature.
pub fn inverse_sqrt_quadrature(a: &SpatialOperator, tol: f64) -> Result<SpatialOperator> {
    let hat = inverse_sqrt_hat_quadrature(&dense::hermitian_part(&a.hat()), tol)?;
    SpatialOperator::from_hat(a.k_cut, a.rank, &hat, a.gram.clone(), -0.5 * a.order)
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const K15_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const G7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// With `s = tan θ` the integrand becomes `(cos²θ A + sin²θ)^{-1}` on `[0, π/2]`.
fn integrand(a: &CMat, theta: f64) -> Result<CMat> {
    let (s, c) = theta.sin_cos();
    let n = a.nrows();
    let m = CMat::from_fn(n, n, |i, j| a[(i, j)] * (c * c) + if i == j { C64::new(s * s, 0.0) } else { C64::new(0.0, 0.0) });
    dense::inverse(&m).map_err(|_| Error::Domain { eigenvalue: 0.0 })
}

fn gauss_kronrod(a: &CMat, lo: f64, hi: f64) -> Result<(CMat, f64)> {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let n = a.nrows();
    let mut k15 = dense::zeros(n, n);
    let mut g7 = dense::zeros(n, n);
    for i in 0..8 {
        let x = GK_NODES[i];
        let pts: Vec<f64> = if x == 0.0 { vec![mid] } else { vec![mid - half * x, mid + half * x] };
        for p in pts {
            let f = integrand(a, p)?;
            k15 = &k15 + &dense::scale_real(&f, K15_WEIGHTS[i] * half);
            if i % 2 == 1 {
                g7 = &g7 + &dense::scale_real(&f, G7_WEIGHTS[i / 2] * half);
            }
        }
    }
    let err = dense::fro(&(&k15 - &g7));
    Ok((k15, err))
}

fn inverse_sqrt_hat_quadrature(a: &CMat, tol: f64) -> Result<CMat> {
    let mut pending = vec![(0.0, FRAC_PI_2)];
    let mut total = dense::zeros(a.nrows(), a.nrows());
    let mut pieces = 0usize;
    let (first, _) = gauss_kronrod(a, 0.0, FRAC_PI_2)?;
    let scale = dense::fro(&first).max(f64::MIN_POSITIVE);
    while let Some((lo, hi)) = pending.pop() {
        let (val, err) = gauss_kronrod(a, lo, hi)?;
        pieces += 1;
        if err <= tol * scale * (hi - lo) / FRAC_PI_2 || hi - lo < 1e-9 || pieces > 4000 {
            total = &total + &val;
        } else {
            let mid = 0.5 * (lo + hi);
            pending.push((lo, mid));
            pending.push((mid, hi));
        }
    }
    Ok(dense::scale_real(&total, 2.0 / std::f64::consts::PI))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psdo::{Gram, GramFactor};

    fn op_from(mat: CMat, gram: Gram) -> SpatialOperator {
        let k = (mat.nrows() - 1) / 2;
        SpatialOperator::new(k, 1, mat, gram, 0.0).unwrap()
    }

    #[test]
    fn diagonal_eigenvalues_as_given() {
        let a = CMat::from_fn(5, 5, |i, j| if i == j { C64::new(i as f64 + 1.0, 0.0) } else { C64::new(0.0, 0.0) });
        let e = hermitize_and_eig(&op_from(a, Gram::Identity)).unwrap();
        assert_eq!(e.values, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn inverse_sqrt_of_four_is_half() {
        let a = CMat::from_fn(1, 1, |_, _| C64::new(4.0, 0.0));
        let r = inverse_sqrt(&op_from(a.clone(), Gram::Identity)).unwrap();
        assert!((r.mat[(0, 0)].re - 0.5).abs() < 1e-15);
        let q = inverse_sqrt_quadrature(&op_from(a, Gram::Identity), 1e-12).unwrap();
        assert!((q.mat[(0, 0)].re - 0.5).abs() < 1e-10);
    }

    #[test]
    fn domain_error_names_eigenvalue() {
        let a = CMat::from_fn(3, 3, |i, j| if i == j { C64::new(i as f64 - 1.0, 0.0) } else { C64::new(0.0, 0.0) });
        let err = operator_function(&op_from(a, Gram::Identity), |x| 1.0 / x).unwrap_err();
        assert_eq!(err, Error::Domain { eigenvalue: 0.0 });
    }

    #[test]
    fn non_self_adjoint_rejected() {
        let a = CMat::from_fn(3, 3, |i, j| C64::new((i + 2 * j) as f64, 0.0));
        let err = hermitize_and_eig(&op_from(a, Gram::Identity)).unwrap_err();
        assert!(matches!(err, Error::SelfAdjointness { .. }));
    }

    #[test]
    fn weighted_gram_eigenvectors_are_gram_orthonormal() {
        let l = CMat::from_fn(3, 3, |i, j| if i == j { C64::new(1.0 + i as f64, 0.0) } else if i > j { C64::new(0.2, 0.1) } else { C64::new(0.0, 0.0) });
        let gf = GramFactor::from_factor(l).unwrap();
        let gram = Gram::factored(gf);
        let hat = CMat::from_fn(3, 3, |i, j| if i == j { C64::new(i as f64, 0.0) } else { C64::new(0.3, if i < j { 0.1 } else { -0.1 }) });
        let a = SpatialOperator::from_hat(1, 1, &hat, gram.clone(), 0.0).unwrap();
        assert!(a.self_adjoint_residual() < 1e-14);
        let e = hermitize_and_eig(&a).unwrap();
        let w = gram.matrix(3);
        let g = dense::matmul3(&dense::adjoint(&e.vectors), &w, &e.vectors);
        assert!(dense::fro(&(&g - dense::identity(3))) < 1e-13);
        let d: Vec<C64> = e.values.iter().map(|&x| C64::new(x, 0.0)).collect();
        let inv = dense::inverse(&e.vectors).unwrap();
        let rec = dense::matmul3(&e.vectors, &CMat::from_fn(3, 3, |i, j| if i == j { d[i] } else { C64::new(0.0, 0.0) }), &inv);
        assert!(dense::fro(&(&rec - &a.mat)) / dense::fro(&a.mat) < 1e-11);
    }
}
