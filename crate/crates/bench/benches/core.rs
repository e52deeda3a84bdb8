use std::hint::black_box;

use balkwise_bench::{family, model, path};
use balkwise_core::stationary::DEFAULT_EPS;
use balkwise_core::{
    expected_revenue, fit_mle, optimal_price, simulate_path, SimOptions, TransitionCounts,
};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn simulate(c: &mut Criterion) {
    let fam = family();
    let m = model(&fam, 15.0);
    let mut g = c.benchmark_group("simulate");
    for k in [1_000usize, 100_000] {
        g.bench_with_input(BenchmarkId::from_parameter(k), &k, |b, &k| {
            b.iter(|| simulate_path(&m, &[0.02], &SimOptions::new(k, 1)).unwrap())
        });
    }
    g.finish();
}

fn fit(c: &mut Criterion) {
    let fam = family();
    let m = model(&fam, 15.0);
    let mut g = c.benchmark_group("fit");
    for k in [1_000usize, 100_000] {
        let p = path(&fam, k, 2);
        g.bench_with_input(BenchmarkId::new("path", k), &p, |b, p| {
            b.iter(|| fit_mle(black_box(p), &m, None).unwrap())
        });
        let counts = TransitionCounts::from_path(&p);
        g.bench_with_input(BenchmarkId::new("loglik", k), &counts, |b, counts| {
            b.iter(|| counts.log_likelihood(&m, black_box(&[0.021])))
        });
    }
    g.finish();
}

fn revenue(c: &mut Criterion) {
    let fam = family();
    let m = model(&fam, 0.0);
    c.bench_function("revenue", |b| {
        b.iter(|| expected_revenue(black_box(50.0), &[0.02], &m, DEFAULT_EPS).unwrap())
    });
    c.bench_function("optimal_price", |b| {
        b.iter(|| optimal_price(&m, black_box(&[0.02]), DEFAULT_EPS, None).unwrap())
    });
}

criterion_group!(benches, simulate, fit, revenue);
criterion_main!(benches);
