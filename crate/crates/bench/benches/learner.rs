use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use ogd_poison::learner::{ogd_final, ogd_run, ogd_step_sparse};
use ogd_poison::{Label, LearnerConfig};
use ogd_poison_bench::{gaussian_bundle, sparse_basis};

fn dense_runs(c: &mut Criterion) {
    let mut group = c.benchmark_group("ogd");
    for d in [2usize, 20, 200] {
        let bundle = gaussian_bundle(d, 2000);
        let config = LearnerConfig::from_zero(0.01, d).unwrap();
        group.bench_with_input(BenchmarkId::new("final", d), &d, |b, _| {
            b.iter(|| ogd_final(&config, black_box(&bundle.train), None).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("full_trajectory", d), &d, |b, _| {
            b.iter(|| ogd_run(&config, black_box(&bundle.train), None).unwrap())
        });
    }
    group.finish();
}

fn sparse_steps(c: &mut Criterion) {
    let d = 100_000;
    let xs = sparse_basis(d, 10_000);
    c.bench_function("ogd/sparse_10k_steps_d100k", |b| {
        b.iter(|| {
            let mut theta = vec![0.0; d];
            for x in &xs {
                ogd_step_sparse(&mut theta, x, Label::Pos, 0.1, |_, _, _| {});
            }
            black_box(theta)
        })
    });
}

criterion_group!(benches, dense_runs, sparse_steps);
criterion_main!(benches);
