use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use epig_bench::random_tensors;
use epig_core::acquisition::{bald_categorical, epig_categorical, epig_categorical_batch, epig_nested_mc_tensor};
use epig_core::{TargetBatch, TargetMode};

const K: usize = 64;
const M: usize = 32;

fn bald(c: &mut Criterion) {
    let mut group = c.benchmark_group("bald");
    for classes in [2, 10] {
        let pool = random_tensors(256, K, classes, 1);
        group.bench_with_input(BenchmarkId::from_parameter(classes), &pool, |b, pool| {
            b.iter(|| pool.iter().map(|t| bald_categorical(black_box(t))).sum::<f64>())
        });
    }
    group.finish();
}

fn epig(c: &mut Criterion) {
    let mut group = c.benchmark_group("epig");
    for classes in [2, 10] {
        let pool = random_tensors(256, K, classes, 2);
        let targets = TargetBatch::new(random_tensors(M, K, classes, 3), TargetMode::PoolProxy).unwrap();
        group.bench_with_input(BenchmarkId::new("batch", classes), &pool, |b, pool| {
            b.iter(|| epig_categorical_batch(black_box(pool), &targets).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("per_candidate", classes), &pool, |b, pool| {
            b.iter(|| pool.iter().map(|t| epig_categorical(black_box(t), &targets).unwrap()).sum::<f64>())
        });
        group.bench_with_input(BenchmarkId::new("nested_mc", classes), &pool, |b, pool| {
            b.iter(|| {
                pool.iter()
                    .enumerate()
                    .map(|(i, t)| epig_nested_mc_tensor(black_box(t), &targets, i as u64).unwrap().mean)
                    .sum::<f64>()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bald, epig);
criterion_main!(benches);
