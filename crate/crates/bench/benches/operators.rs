use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use padicnet::operator::{build_full_level, matrix_exp};
use padicnet::simulate::{simulate, Integrator, Perturbation, SimConfig};
use padicnet::spectral::spectrum_level_computed;
use padicnet_bench::{complete_grid, unstable_brusselator};

fn eigensolve(c: &mut Criterion) {
    let mut group = c.benchmark_group("eigensolve_level");
    for m in [3, 5, 7] {
        let grid = complete_grid(4, m);
        group.bench_with_input(BenchmarkId::from_parameter(grid.len()), &grid, |b, g| {
            b.iter(|| spectrum_level_computed(black_box(g)).unwrap())
        });
    }
    group.finish();
}

fn exponential(c: &mut Criterion) {
    let mut group = c.benchmark_group("matrix_exp");
    for m in [3, 5, 7] {
        let grid = complete_grid(4, m);
        let l = build_full_level(&grid).entries;
        group.bench_with_input(BenchmarkId::from_parameter(grid.len()), &l, |b, l| {
            b.iter(|| matrix_exp(black_box(l), 0.3).unwrap())
        });
    }
    group.finish();
}

fn integrate(c: &mut Criterion) {
    let (model, steady) = unstable_brusselator();
    let mut group = c.benchmark_group("simulate_t1");
    group.sample_size(20);
    for integrator in [Integrator::Rk4, Integrator::ExponentialEuler] {
        let grid = complete_grid(4, 4);
        let config = SimConfig {
            level: 4,
            epsilon: 0.3,
            d: 9.0,
            integrator,
            dt: Some(1e-3),
            t_end: 1.0,
            seed: 1,
            perturbation: Perturbation::Uniform { delta: 1e-4 },
            stride: 100,
        };
        group.bench_function(format!("{integrator:?}"), |b| {
            b.iter(|| simulate(&model, steady, &grid, black_box(&config)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, eigensolve, exponential, integrate);
criterion_main!(benches);
