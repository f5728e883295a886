use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sptree::distribution::random_uniform_tree;
use sptree::experiments::sample_tree_data;
use sptree::mode::estimate_mode;
use sptree::weights::{assemble_log_weights, DataMatrix, LogWeightMatrix, ShrinkageParams, TreePrior};
use sptree::{log_partition, marginal_connecting_probabilities};

fn weights(p: usize) -> LogWeightMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(p as u64);
    let tree = random_uniform_tree(p, &mut rng);
    let data = DataMatrix::standardize(sample_tree_data(&tree, 100, 1.0, 1.0, &mut rng)).unwrap();
    let m = estimate_mode(&data, &TreePrior::Uniform, 5.0, None).unwrap();
    let params = ShrinkageParams::new(5.0, m.tau_hat, m.mu_tau).unwrap();
    assemble_log_weights(&data, &params, &TreePrior::Uniform).unwrap()
}

fn matrix_tree(c: &mut Criterion) {
    let mut group = c.benchmark_group("matrix_tree");
    group.sample_size(10);
    for p in [50usize, 200, 500] {
        let q = weights(p);
        group.bench_with_input(BenchmarkId::new("log_partition", p), &q, |b, q| {
            b.iter(|| log_partition(black_box(q)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("mcp", p), &q, |b, q| {
            b.iter(|| marginal_connecting_probabilities(black_box(q)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, matrix_tree);
criterion_main!(benches);
