use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::{DMatrix, DVector};

use silt::learn::{fit_matrix, learn_matrix, relative_error, LearnOptions};
use silt::solvers::{solve_block_l1, solve_constrained_l1_lp, BlockProblem, DEFAULT_MAX_ITER, DEFAULT_TOL};

/// Deterministic, well-spread filler values.
fn filler(r: usize, c: usize, salt: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |i, j| ((i * 31 + j * 17) as f64 * 0.61 + salt).sin())
}

fn block_l1(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_block_l1");
    for d in [100, 400, 1600] {
        let target = DVector::from_fn(d, |i, _| (i as f64 * 0.37).cos());
        let problem = BlockProblem::new(target)
            .block(filler(d, 1, 0.1), 0.0)
            .block(filler(d, 5, 0.2), 1.0)
            .block(filler(d, 4, 0.3), 0.0)
            .with_error(1.0);
        group.bench_with_input(BenchmarkId::from_parameter(d), &problem, |b, p| {
            b.iter(|| solve_block_l1(black_box(p), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap())
        });
    }
    group.finish();
}

fn filter_lp(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_constrained_l1_lp");
    for (k, n, p) in [(10, 23, 5), (20, 60, 5)] {
        let h = filler(k, n * p, 0.4);
        let dir = DVector::from_fn(k, |i, _| 1.0 + i as f64 * 0.1);
        group.bench_function(format!("k{k}_n{n}_p{p}"), |b| {
            b.iter(|| solve_constrained_l1_lp(black_box(&h), n, p, &dir, DEFAULT_TOL).unwrap())
        });
    }
    group.finish();
}

fn learning(c: &mut Criterion) {
    let (d, n, p, k) = (100, 23, 5, 10);
    let basis = filler(d, k, 0.5);
    // each column uses two atoms on top of a per-subject mean
    let data = DMatrix::from_fn(d, n * p, |i, j| {
        let a = j % k;
        let b = (j * 7 + 3) % k;
        (j / n) as f64 * 0.3 + basis[(i, a)] + 0.5 * basis[(i, b)]
    });
    c.bench_function("fit_matrix_d100_k10", |b| b.iter(|| fit_matrix(black_box(&data), n, k).unwrap()));
    let mut group = c.benchmark_group("learn_matrix");
    group.sample_size(10);
    group.bench_function("d100_k10", |b| {
        b.iter(|| learn_matrix(black_box(&data), n, k, 10, 10, &LearnOptions::default()).unwrap())
    });
    group.finish();
    let est = filler(d, 8, 0.6);
    let truth = filler(d, 8, 0.7);
    c.bench_function("relative_error_k8", |b| b.iter(|| relative_error(black_box(&est), &truth).unwrap()));
}

criterion_group!(benches, block_l1, filter_lp, learning);
criterion_main!(benches);
