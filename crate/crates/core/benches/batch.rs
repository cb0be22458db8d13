//! Sequential versus rayon execution of the two hot loops: path simulation
//! and per-path Malliavin weights. Build with `--no-default-features` to
//! compile the rayon path out entirely.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use hawkes_malliavin::malliavin::{divergence_m, CameronMartin};
use hawkes_malliavin::numeric::pairwise_sum;
use hawkes_malliavin::parallel::map_indexed;
use hawkes_malliavin::{simulate_batch, HawkesModel, Parallelism};

const HORIZON: f64 = 5.0;
const PATHS: usize = 20_000;

fn modes() -> [(&'static str, Parallelism); 2] {
    [
        ("sequential", Parallelism::SEQUENTIAL),
        ("rayon", Parallelism(0)),
    ]
}

fn bench_simulation(c: &mut Criterion) {
    let model = HawkesModel::linear_exponential(1.0, 0.5, 1.0).unwrap();
    let mut group = c.benchmark_group("simulate_batch");
    group.throughput(Throughput::Elements(PATHS as u64));
    group.sample_size(20);
    for (name, mode) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| simulate_batch(&model, HORIZON, black_box(7), PATHS, mode).unwrap())
        });
    }
    group.finish();
}

fn bench_weights(c: &mut Criterion) {
    let model = HawkesModel::linear_exponential(1.0, 0.5, 1.0).unwrap();
    let m = CameronMartin::linear(HORIZON).unwrap();
    let batch = simulate_batch(&model, HORIZON, 7, PATHS, Parallelism(0)).unwrap();
    let mut group = c.benchmark_group("divergence");
    group.throughput(Throughput::Elements(PATHS as u64));
    for (name, mode) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| {
                let w = map_indexed(0..PATHS as u64, mode, |i| {
                    divergence_m(&model, &batch.paths[i as usize], &m)
                });
                pairwise_sum(black_box(&w))
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_simulation, bench_weights);
criterion_main!(benches);
