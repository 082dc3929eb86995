use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hadamard::evolution::{step_between, Integrator};
use hadamard::modelspec::parse_expr;
use hadamard::psdo::dense;
use hadamard::psdo::funcs::{eigh, EigenBackend};
use hadamard::psdo::jacobi::jacobi_eigh;
use hadamard_bench::{breathing, source, BREATHING};

fn expressions(c: &mut Criterion) {
    c.bench_function("parse_breathing", |b| b.iter(|| parse_expr(black_box(BREATHING)).unwrap()));
    let e = parse_expr(BREATHING).unwrap();
    c.bench_function("eval_breathing", |b| b.iter(|| e.eval(black_box(0.3), black_box(1.1)).unwrap()));
}

fn eigensolvers(c: &mut Criterion) {
    let mut g = c.benchmark_group("eigh");
    for k in [8, 16] {
        let h = breathing(k).h_hat(0.5).unwrap();
        g.bench_with_input(BenchmarkId::new("jacobi", h.nrows()), &h, |b, h| b.iter(|| jacobi_eigh(h).unwrap()));
        g.bench_with_input(BenchmarkId::new("auto", h.nrows()), &h, |b, h| b.iter(|| eigh(h, EigenBackend::Auto).unwrap()));
    }
    g.finish();
}

fn assembly(c: &mut Criterion) {
    let a = breathing(32);
    c.bench_function("h_hat_k32", |b| b.iter(|| a.h_hat(black_box(0.5)).unwrap()));
    let h = a.h_hat(0.5).unwrap();
    c.bench_function("matmul_k32", |b| b.iter(|| dense::matmul(&h, &h)));
}

fn steps(c: &mut Criterion) {
    let src = source(16);
    let mut g = c.benchmark_group("step_k16");
    g.sample_size(20);
    for (name, i) in [("midpoint", Integrator::Midpoint), ("magnus4", Integrator::Magnus4), ("magnus6", Integrator::Magnus6)] {
        g.bench_function(name, |b| b.iter(|| step_between(&src, 0.0, 0.01, i).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, expressions, eigensolvers, assembly, steps);
criterion_main!(benches);
