use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use vlstein_core::exponent::blahut_arimoto;
use vlstein_core::{solve_vl_exponent, Dmc, ExponentQuery, JointSource};

fn capacity(c: &mut Criterion) {
    let mut group = c.benchmark_group("blahut_arimoto");
    for k in [2usize, 4, 8] {
        // Symmetric noisy typewriter on k letters.
        let rows = (0..k)
            .map(|i| (0..k).map(|j| if j == i || j == (i + 1) % k { 0.5 } else { 0.0 }).collect())
            .collect();
        let dmc = Dmc::new(rows).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(k), &dmc, |b, dmc| {
            b.iter(|| blahut_arimoto(black_box(dmc), 1e-12, 100_000).unwrap())
        });
    }
    group.finish();
}

fn solver(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_vl_exponent");
    group.sample_size(10);
    let dsbs = ExponentQuery::new(JointSource::dsbs(0.1).unwrap(), 0.8, 0.1).unwrap();
    group.bench_function("dsbs", |b| b.iter(|| solve_vl_exponent(black_box(&dsbs)).unwrap()));
    let ternary = JointSource::new(vec![
        vec![0.20, 0.05, 0.05],
        vec![0.05, 0.20, 0.05],
        vec![0.05, 0.05, 0.30],
    ])
    .unwrap();
    let q = ExponentQuery::new(ternary, 0.5, 0.2).unwrap();
    group.bench_function("ternary", |b| b.iter(|| solve_vl_exponent(black_box(&q)).unwrap()));
    group.finish();
}

criterion_group!(benches, capacity, solver);
criterion_main!(benches);
