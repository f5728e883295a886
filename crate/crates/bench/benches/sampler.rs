use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sptree::distribution::random_uniform_tree;
use sptree::experiments::sample_tree_data;
use sptree::mode::estimate_mode;
use sptree::sampler::{Scan, TreeChain};
use sptree::weights::{DataMatrix, TreePrior};

fn tree_data(p: usize, n: usize) -> DataMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(p as u64);
    let tree = random_uniform_tree(p, &mut rng);
    DataMatrix::standardize(sample_tree_data(&tree, n, 1.0, 1.0, &mut rng)).unwrap()
}

fn sweeps(c: &mut Criterion) {
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    for p in [50usize, 200] {
        let data = tree_data(p, 100);
        let tau = estimate_mode(&data, &TreePrior::Uniform, 5.0, None).unwrap().tau_hat;
        let mut chain = TreeChain::new(&data, TreePrior::Uniform, 5.0, tau).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        group.bench_with_input(BenchmarkId::new("full", p), &p, |b, _| {
            b.iter(|| chain.sweep(Scan::Full, &mut rng).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("tau_step", p), &p, |b, _| {
            b.iter(|| chain.step_tau(0.1 * tau, &mut rng).unwrap())
        });
    }
    group.finish();
}

fn mode(c: &mut Criterion) {
    let mut group = c.benchmark_group("mode");
    for p in [50usize, 200] {
        let data = tree_data(p, 100);
        group.bench_with_input(BenchmarkId::from_parameter(p), &data, |b, d| {
            b.iter(|| estimate_mode(d, &TreePrior::Uniform, 5.0, None).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, sweeps, mode);
criterion_main!(benches);
