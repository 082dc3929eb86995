//! Invariants as property tests: small sizes, many random inputs.

use hadamard::clifford::{beta_residual, build_gamma_rep, clifford_residual, kappa_residual};
use hadamard::frames::minkowski_orthonormalize;
use hadamard::modelspec::expr::{parse_expr, BinaryOp, UnaryOp};
use hadamard::modelspec::{Dual, ExprAst};
use hadamard::psdo::dense;
use hadamard::psdo::funcs::{hermitian_function, operator_function, sign};
use hadamard::psdo::quantize::quantize_scalar;
use hadamard::{CMat, Gram, SpatialOperator, C64};
use proptest::prelude::*;

/// Trees the parser can produce: constants are non-negative, signs are `Neg` nodes.
fn arb_expr() -> impl Strategy<Value = ExprAst> {
    let leaf = prop_oneof![
        (0.0..5.0f64).prop_map(ExprAst::Const),
        Just(ExprAst::T),
        Just(ExprAst::X),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (prop_oneof![Just(UnaryOp::Neg), Just(UnaryOp::Sin), Just(UnaryOp::Cos), Just(UnaryOp::Tanh)], inner.clone())
                .prop_map(|(op, a)| ExprAst::unary(op, a)),
            (prop_oneof![Just(BinaryOp::Add), Just(BinaryOp::Sub), Just(BinaryOp::Mul)], inner.clone(), inner)
                .prop_map(|(op, a, b)| ExprAst::binary(op, a, b)),
        ]
    })
}

fn arb_hermitian(n: usize) -> impl Strategy<Value = CMat> {
    proptest::collection::vec(-1.0..1.0f64, 2 * n * n).prop_map(move |v| {
        let a = CMat::from_fn(n, n, |i, j| C64::new(v[2 * (i * n + j)], v[2 * (i * n + j) + 1]));
        dense::hermitian_part(&a)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn print_then_parse_is_identity(e in arb_expr()) {
        let back = parse_expr(&e.to_string()).unwrap();
        prop_assert_eq!(back, e);
    }

    #[test]
    fn negative_constants_reparse_to_the_same_value(e in arb_expr(), c in -5.0..0.0f64, t in -1.0..1.0f64, x in 0.0..6.28f64) {
        // Substitution can plant a negative constant; the printed form reads back as a negation.
        let e = e.substitute_t(&ExprAst::Const(c));
        let back = parse_expr(&e.to_string()).unwrap();
        prop_assert_eq!(back.eval(t, x).unwrap(), e.eval(t, x).unwrap());
        prop_assert_eq!(back.to_string(), parse_expr(&back.to_string()).unwrap().to_string());
    }

    #[test]
    fn dual_derivatives_match_differences(e in arb_expr(), t in -1.0..1.0f64, x in 0.0..6.28f64) {
        let d = e.eval(Dual::var_t(t), Dual::var_x(x)).unwrap();
        let f = |t: f64, x: f64| e.eval(t, x).unwrap();
        let s = 1e-4;
        let fd_t = (-f(t + 2.0 * s, x) + 8.0 * f(t + s, x) - 8.0 * f(t - s, x) + f(t - 2.0 * s, x)) / (12.0 * s);
        let fd_x = (-f(t, x + 2.0 * s) + 8.0 * f(t, x + s) - 8.0 * f(t, x - s) + f(t, x - 2.0 * s)) / (12.0 * s);
        let scale = 1.0 + d.v.abs() + d.dt.abs() + d.dx.abs();
        prop_assert!((d.dt - fd_t).abs() <= 1e-6 * scale, "dt {} vs {}", d.dt, fd_t);
        prop_assert!((d.dx - fd_x).abs() <= 1e-6 * scale, "dx {} vs {}", d.dx, fd_x);
    }

    #[test]
    fn orthonormal_frame_reproduces_eta(
        n in prop_oneof![Just(2usize), Just(4usize)],
        raw in proptest::collection::vec(-0.3..0.3f64, 16),
        scales in proptest::collection::vec(0.5..2.0f64, 4),
    ) {
        // Lorentzian by construction: −s₀² on the time diagonal, a small symmetric perturbation.
        let g: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| {
            let p = 0.5 * (raw[i * 4 + j] + raw[j * 4 + i]);
            if i == j { if i == 0 { -scales[0] * scales[0] } else { scales[i] * scales[i] + p } } else { 0.3 * p }
        }).collect()).collect();
        let f = minkowski_orthonormalize(&g).unwrap();
        for a in 0..n {
            prop_assert!(f[a][a] > 0.0);
            for b in 0..a {
                prop_assert_eq!(f[a][b], 0.0);
            }
            for b in 0..n {
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += f[a][i] * g[i][j] * f[b][j];
                    }
                }
                let eta = if a != b { 0.0 } else if a == 0 { -1.0 } else { 1.0 };
                prop_assert!((s - eta).abs() < 1e-10, "({a},{b}) = {s}");
            }
        }
    }

    #[test]
    fn quantization_is_linear(
        ca in proptest::collection::vec(-1.0..1.0f64, 3),
        cb in proptest::collection::vec(-1.0..1.0f64, 3),
        alpha in -2.0..2.0f64,
    ) {
        let (k_cut, m) = (6, 32);
        let xs = hadamard::psdo::quantize::x_points(m);
        let sym = |c: &[f64]| {
            let c = c.to_vec();
            let xs = xs.clone();
            move |j: usize, k: i64| C64::new(c[0] + c[1] * xs[j].cos() * k as f64, c[2] * (2.0 * xs[j]).sin())
        };
        let a = quantize_scalar(k_cut, m, sym(&ca));
        let b = quantize_scalar(k_cut, m, sym(&cb));
        let mix: Vec<f64> = ca.iter().zip(&cb).map(|(p, q)| p + alpha * q).collect();
        let ab = quantize_scalar(k_cut, m, sym(&mix));
        let lin = &a + &dense::scale_real(&b, alpha);
        prop_assert!(dense::max_abs(&(&ab - &lin)) < 1e-12);
    }

    #[test]
    fn functional_calculus_is_multiplicative(a in arb_hermitian(6)) {
        let f = hermitian_function(&a, |x| C64::new(x.sin(), 0.0)).unwrap();
        let g = hermitian_function(&a, |x| C64::new(1.0 + x * x, 0.0)).unwrap();
        let fg = hermitian_function(&a, |x| C64::new(x.sin() * (1.0 + x * x), 0.0)).unwrap();
        prop_assert!(dense::max_abs(&(&dense::matmul(&f, &g) - &fg)) < 1e-11);
        prop_assert!(dense::max_abs(&(&dense::matmul(&f, &g) - &dense::matmul(&g, &f))) < 1e-11);
    }

    #[test]
    fn sign_is_an_involution(a in arb_hermitian(5), shift in 0.05..0.5f64) {
        // Push eigenvalues away from zero so the sign is well defined.
        let e = hermitian_function(&a, |x| C64::new(if x >= 0.0 { x + shift } else { x - shift }, 0.0)).unwrap();
        let op = SpatialOperator::new(2, 1, e, Gram::Identity, 1.0).unwrap();
        let s = sign(&op).unwrap();
        let sq = dense::matmul(&s.mat, &s.mat);
        prop_assert!(dense::max_abs(&(&sq - &dense::identity(5))) < 1e-11);
        let abs = operator_function(&op, f64::abs).unwrap();
        prop_assert!(dense::max_abs(&(&dense::matmul(&s.mat, &abs.mat) - &op.mat)) < 1e-11);
    }
}

#[test]
fn clifford_relations_in_each_dimension() {
    for n in [2, 4, 6, 8] {
        let rep = build_gamma_rep(n).unwrap();
        assert_eq!(rep.rank, 1 << (n / 2));
        assert!(clifford_residual(&rep) < 1e-14, "n = {n}");
        assert!(beta_residual(&rep) < 1e-14, "n = {n}");
        if let Some(k) = kappa_residual(&rep) {
            assert!(k < 1e-14, "n = {n}");
        }
    }
    assert!(build_gamma_rep(3).is_err());
}
