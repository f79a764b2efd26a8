//! Sweep harness: runs the true-alpha estimation and damage-curve
//! comparisons on a planted fixture and prints the diagnostics. Useful for
//! eyeballing how strongly the loading-drop minimum identifies the planted
//! tolerance on a given topology.
//!
//!     cargo run --release --example sweep -- [nodes] [edges] [seed] [sims]

use std::time::Instant;

use gridfall::experiments::{self, Execution};
use gridfall::grid::synth::{synth_grid, LimitPlanting, SynthSpec};
use gridfall::limits;
use gridfall::strategies::{AttackPlan, Strategy};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let nodes: usize = args.first().and_then(|a| a.parse().ok()).unwrap_or(512);
    let edges: usize = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(698);
    let seed: u64 = args.get(2).and_then(|a| a.parse().ok()).unwrap_or(7);
    let sims: u64 = args.get(3).and_then(|a| a.parse().ok()).unwrap_or(8);

    let spec = SynthSpec::new(nodes, seed)
        .with_edges(edges)
        .with_planting(LimitPlanting::Alpha(5.0));
    let grid = synth_grid(&spec).expect("synth");
    let stats = grid.topology_stats();
    println!(
        "grid seed {seed}: n={} m={} mean_degree={:.3} distance={:.2} clustering={:.3} assort={:.3} betw={:.4}",
        stats.node_count,
        stats.edge_count,
        stats.mean_degree,
        stats.mean_unweighted_distance,
        stats.mean_clustering,
        stats.assortativity,
        stats.mean_normalized_betweenness
    );

    let flows = gridfall::dcflow::initial_flows(&grid).expect("flows");
    let plan = AttackPlan::new(Strategy::Random);

    // timing: one full batch at the planted tolerance
    let t0 = Instant::now();
    let real = limits::real_limits(&grid).unwrap();
    let batch = experiments::run_batch(
        &grid,
        vec![real.clone()],
        vec![plan],
        sims,
        seed,
        Execution::Parallel,
    )
    .unwrap();
    let mean_rounds: f64 = batch
        .cells
        .iter()
        .map(|c| c.trace.rounds.len() as f64)
        .sum::<f64>()
        / batch.cells.len() as f64;
    println!(
        "real-limit batch: {} sims in {:.2}s ({:.0} rounds/sim avg)",
        sims,
        t0.elapsed().as_secs_f64(),
        mean_rounds
    );

    // trip activity at the planted tolerance
    let trips: usize = batch
        .cells
        .iter()
        .flat_map(|c| c.trace.rounds.iter())
        .map(|r| r.tripped.len())
        .sum();
    println!("overload trips across real-limit sims: {trips}");

    // true-alpha sweep
    let candidates = [1.05, 1.1, 1.5, 2.0, 5.0, 10.0, 20.0, 50.0];
    let t0 = Instant::now();
    let est = experiments::estimate_true_alpha(
        &grid,
        &candidates,
        &plan,
        sims,
        seed,
        Execution::Parallel,
    )
    .unwrap();
    println!("alpha sweep in {:.2}s", t0.elapsed().as_secs_f64());
    for tr in &est.traces {
        println!(
            "  {:<8} init_a={:>7.3} d_alpha={:>8.4} d_load={:>8.5} total={:>8.4}",
            tr.method.label(),
            tr.initial_alpha,
            tr.delta_alpha,
            tr.delta_load,
            tr.delta_total
        );
    }
    println!("  -> best {}", est.best_alpha);

    // damage-curve dominance: PL(5) (== real) vs the extremes
    let t0 = Instant::now();
    let methods = vec![
        real,
        limits::proportional_limits(&grid, &flows, 1.05).unwrap(),
        limits::proportional_limits(&grid, &flows, 2.0).unwrap(),
        limits::proportional_limits(&grid, &flows, 5.0).unwrap(),
        limits::proportional_limits(&grid, &flows, 50.0).unwrap(),
    ];
    let batch = experiments::run_batch(
        &grid,
        methods,
        vec![plan],
        sims,
        seed,
        Execution::Parallel,
    )
    .unwrap();
    let curves = experiments::damage_curves(&batch, 0).unwrap();
    println!("damage batch in {:.2}s", t0.elapsed().as_secs_f64());
    for (m, method) in curves.methods.iter().enumerate() {
        println!(
            "  {:<8} blackout_rmse={:>9.6} giant_rmse={:>9.6}",
            method.label(),
            curves.rmse_vs_real[m].blackout,
            curves.rmse_vs_real[m].giant
        );
    }

    // monotonicity check: damage weakly decreasing in alpha, elementwise
    let order = [1usize, 2, 3, 4]; // 1.05, 2, 5, 50
    let mut crossings = 0;
    for w in order.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        for r in 0..curves.rounds {
            if curves.blackout_mean[hi][r] > curves.blackout_mean[lo][r] + 1e-12 {
                crossings += 1;
            }
            if curves.giant_mean[hi][r] > curves.giant_mean[lo][r] + 1e-12 {
                crossings += 1;
            }
        }
    }
    println!("monotonicity crossings: {crossings}");
}
