use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use miattack_bench::{concentrated_joint, gaussian_matrix, spectrum};
use miattack_core::bsc::{bsc_grid_oracle, solve_bsc, BscSolverConfig};
use miattack_core::projection::{falling_bar, min_mi, waterfill_bisect_oracle, ProjectionProblem};
use miattack_core::scalar::{solve, ScalarProblem, ScalarSolverConfig};
use miattack_core::subset::{brute_force_subset_oracle, choose_subset, SubsetProblem};

fn waterfill(c: &mut Criterion) {
    let s = spectrum(50, 7);
    let d = 0.3 * s.iter().sum::<f64>();
    c.bench_function("falling_bar k=50", |b| b.iter(|| falling_bar(black_box(&s), d).unwrap()));
    c.bench_function("bisect_oracle k=50", |b| b.iter(|| waterfill_bisect_oracle(black_box(&s), d, 1e-12).unwrap()));
}

fn projection(c: &mut Criterion) {
    let p = ProjectionProblem::new(gaussian_matrix(45, 50, 3), 2.5).unwrap();
    c.bench_function("min_mi 45x50", |b| b.iter(|| min_mi(black_box(&p)).unwrap()));
}

fn scalar(c: &mut Criterion) {
    let p = ScalarProblem::new(0.75, 0.1, 0.3).unwrap();
    let cfg = ScalarSolverConfig::default();
    c.bench_function("scalar solve grid=200", |b| b.iter(|| solve(black_box(&p), &cfg).unwrap()));
}

fn bsc(c: &mut Criterion) {
    let j = concentrated_joint();
    let cfg = BscSolverConfig::default();
    c.bench_function("solve_bsc eps=0.1", |b| b.iter(|| solve_bsc(black_box(&j), 0.1, &cfg).unwrap()));
    let mut group = c.benchmark_group("bsc_grid");
    group.sample_size(10);
    group.bench_function("resolution 30", |b| b.iter(|| bsc_grid_oracle(black_box(&j), 0.1, 30).unwrap()));
    group.finish();
}

fn subset(c: &mut Criterion) {
    let p = SubsetProblem::new(spectrum(16, 9), 6).unwrap();
    c.bench_function("choose_subset m=16", |b| b.iter(|| choose_subset(black_box(&p))));
    c.bench_function("subset oracle m=16", |b| b.iter(|| brute_force_subset_oracle(black_box(&p)).unwrap()));
}

criterion_group!(benches, waterfill, projection, scalar, bsc, subset);
criterion_main!(benches);
