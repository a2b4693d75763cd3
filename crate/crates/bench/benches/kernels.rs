use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use subspace_bench::{random_hermitian, random_matrix, rng};
use subspace_core::estimation::{rank_deficient_oas, SampleSet};
use subspace_core::linalg::{complex_gaussian, psd_sqrt, random_covariance, HermitianEigen};
use subspace_core::optimizer::inner_maximizer;
use subspace_core::precoding::zf_inner;

fn eigen(c: &mut Criterion) {
    let mut g = c.benchmark_group("hermitian_eigen");
    for m in [16, 40, 64] {
        let a = random_hermitian(&mut rng(1), m);
        g.bench_with_input(BenchmarkId::from_parameter(m), &a, |b, a| b.iter(|| HermitianEigen::new(black_box(a))));
    }
    g.finish();
}

fn inner_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("inner_maximizer");
    for m in [16, 40] {
        let a = random_hermitian(&mut rng(2), m);
        g.bench_with_input(BenchmarkId::from_parameter(m), &a, |b, a| b.iter(|| inner_maximizer(black_box(a))));
    }
    g.finish();
}

fn zf(c: &mut Criterion) {
    let h = random_matrix(&mut rng(3), 4, 8);
    c.bench_function("zf_inner 4x8", |b| b.iter(|| zf_inner(black_box(&h), 0).unwrap()));
}

fn oas(c: &mut Criterion) {
    let mut r = rng(4);
    let theta = random_covariance(&mut r, 40, 12, 40.0);
    let root = psd_sqrt(&theta, 1e-9).unwrap();
    let samples: Vec<_> = (0..20).map(|_| &root * complex_gaussian(&mut r, 40)).collect();
    let set = SampleSet::new(samples).unwrap();
    c.bench_function("rank_deficient_oas M=40 Tp=20", |b| b.iter(|| rank_deficient_oas(black_box(&set)).unwrap()));
}

criterion_group!(benches, eigen, inner_step, zf, oas);
criterion_main!(benches);
