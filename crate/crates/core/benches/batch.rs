//! Benchmarks of the batch runner (sequential vs rayon execution) and the
//! per-component DC solve that dominates each simulation round.
//!
//! With `--no-default-features` the parallel arm falls back to the
//! sequential path, so the comparison is only meaningful under the default
//! `parallel` feature.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use gridfall::dcflow::{initial_flows, solve_flows};
use gridfall::experiments::{run_batch, Execution};
use gridfall::grid::synth::{synth_grid, LimitPlanting, SynthSpec};
use gridfall::limits::{proportional_limits, real_limits, LimitSet};
use gridfall::strategies::{AttackPlan, Strategy};

fn fixture(nodes: usize) -> gridfall::grid::PowerGrid {
    synth_grid(&SynthSpec::new(nodes, 7).with_planting(LimitPlanting::Alpha(5.0))).unwrap()
}

fn bench_batch(c: &mut Criterion) {
    let grid = fixture(128);
    let flows = initial_flows(&grid).unwrap();
    let methods: Vec<LimitSet> = vec![
        real_limits(&grid).unwrap(),
        proportional_limits(&grid, &flows, 2.0).unwrap(),
        proportional_limits(&grid, &flows, 50.0).unwrap(),
    ];
    let plan = AttackPlan::new(Strategy::Random);

    let mut group = c.benchmark_group("attack_batch_128n_3methods_8sims");
    group.sample_size(10);
    for (label, exec) in [
        ("sequential", Execution::Sequential),
        ("parallel", Execution::Parallel),
    ] {
        group.bench_function(BenchmarkId::from_parameter(label), |b| {
            b.iter(|| run_batch(&grid, methods.clone(), vec![plan], 8, 5, exec).unwrap())
        });
    }
    group.finish();
}

fn bench_dc_solve(c: &mut Criterion) {
    let grid = fixture(512);
    let injections = grid.initial_injections();
    c.bench_function("dc_solve_512_buses", |b| {
        b.iter(|| solve_flows(&grid, &injections).unwrap())
    });
}

criterion_group!(benches, bench_batch, bench_dc_solve);
criterion_main!(benches);
