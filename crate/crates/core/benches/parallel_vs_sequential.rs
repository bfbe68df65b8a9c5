use std::sync::Arc;

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use ruinfree::dual::{solve_sweep, uniform_a_nodes, RuinSurface};
use ruinfree::fbp::{solve_obstacle, DualGrid, GridSpec, PsorSettings};
use ruinfree::model::{AnnuityState, ModelParams};
use ruinfree::par::Execution;
use ruinfree::simulate::{simulate_ruin, SimConfig};

const MODES: [(&str, Execution); 2] = [
    ("parallel", Execution::Parallel),
    ("sequential", Execution::Sequential),
];

fn monte_carlo(c: &mut Criterion) {
    let p = ModelParams::example();
    let a = AnnuityState::new(1.0, &p).unwrap();
    let spec = GridSpec {
        n_y: 1000,
        n_t: 200,
        ..GridSpec::default()
    };
    let grid = DualGrid::for_annuity(a, &p, &spec).unwrap();
    let sol = solve_obstacle(a, &grid, &p, &PsorSettings::default()).unwrap();
    let surface = RuinSurface::build(Arc::new(sol), 201).unwrap();

    let mut group = c.benchmark_group("simulate_ruin_16k_paths");
    group.sample_size(10);
    for (name, exec) in MODES {
        let mut cfg = SimConfig::new(16_384, 0.01, 1, 10.0, a);
        cfg.exec = exec;
        group.bench_with_input(BenchmarkId::from_parameter(name), &cfg, |b, cfg| {
            b.iter(|| simulate_ruin(black_box(cfg), &surface, &p).unwrap())
        });
    }
    group.finish();
}

fn sweep(c: &mut Criterion) {
    let p = ModelParams::example();
    let levels = uniform_a_nodes(6, &p);
    let spec = GridSpec {
        n_y: 500,
        n_t: 100,
        ..GridSpec::default()
    };
    let psor = PsorSettings::default();
    let mut group = c.benchmark_group("solve_sweep_6_levels");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| solve_sweep(black_box(&levels), &p, &spec, &psor, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, monte_carlo, sweep);
criterion_main!(benches);
