//! DC-flow solver properties checked against an independent dense oracle.
//!
//! The oracle solves the bus-angle formulation with plain Gaussian
//! elimination on a dense matrix and never touches the sparse solve path.

use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};

mod common;
use common::{oracle_flows, random_grid};

use gridfall::dcflow::{initial_flows, solve_flows};
use gridfall::grid::{BusSpec, LineSpec, PowerGrid};


#[test]
fn solver_matches_dense_oracle_on_1000_random_grids() {
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    for case in 0..1000 {
        let grid = random_grid(&mut rng, 5);
        let injections = grid.initial_injections();
        let state = solve_flows(&grid, &injections).unwrap();
        let slack = (0..grid.bus_count())
            .max_by(|&a, &b| {
                grid.bus(a)
                    .generation_capacity
                    .total_cmp(&grid.bus(b).generation_capacity)
            })
            .unwrap();
        let expected = oracle_flows(&grid, &injections, slack);
        let scale = expected.iter().fold(1.0f64, |m, f| m.max(f.abs()));
        for (li, (got, want)) in state.flows.iter().zip(&expected).enumerate() {
            assert!(
                (got - want).abs() <= 1e-9 * scale,
                "case {case} line {li}: {got} vs {want}"
            );
        }
    }
}

#[test]
fn kcl_holds_on_1000_random_grids() {
    let mut rng = ChaCha8Rng::seed_from_u64(2002);
    for _ in 0..1000 {
        let grid = random_grid(&mut rng, 30);
        let injections = grid.initial_injections();
        let state = solve_flows(&grid, &injections).unwrap();
        // solver-enforced, but assert the recorded residual independently
        let p_inf = injections.iter().fold(0.0f64, |m, p| m.max(p.abs()));
        assert!(state.residual <= 1e-8 * p_inf.max(1.0));
    }
}

#[test]
fn reversing_a_line_negates_its_flow_only() {
    let mut rng = ChaCha8Rng::seed_from_u64(3003);
    for _ in 0..50 {
        let grid = random_grid(&mut rng, 8);
        let flipped_idx = rng.random_range(0..grid.line_count());
        let buses: Vec<BusSpec> = grid
            .buses()
            .iter()
            .map(|b| BusSpec {
                id: b.id.clone(),
                demand: b.demand,
                generation_capacity: b.generation_capacity,
            })
            .collect();
        let lines: Vec<LineSpec> = grid
            .lines()
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let (from, to) = if i == flipped_idx {
                    (l.to, l.from)
                } else {
                    (l.from, l.to)
                };
                LineSpec {
                    id: l.id.clone(),
                    from: grid.bus(from).id.clone(),
                    to: grid.bus(to).id.clone(),
                    susceptance: l.susceptance,
                    voltage_class: l.voltage_class,
                    real_limit: l.real_limit,
                }
            })
            .collect();
        let flipped = PowerGrid::from_parts(buses, lines).unwrap();

        let a = initial_flows(&grid).unwrap();
        let b = initial_flows(&flipped).unwrap();
        for i in 0..grid.line_count() {
            let want = if i == flipped_idx { -a.flows[i] } else { a.flows[i] };
            assert!((b.flows[i] - want).abs() < 1e-9);
        }
    }
}

#[test]
fn flows_are_linear_in_injections() {
    let mut rng = ChaCha8Rng::seed_from_u64(4004);
    for _ in 0..100 {
        let grid = random_grid(&mut rng, 10);
        let n = grid.bus_count();
        // two random balanced injection vectors on the same grid
        let mut p1 = vec![0.0; n];
        let mut p2 = vec![0.0; n];
        for p in [&mut p1, &mut p2] {
            for x in p.iter_mut() {
                *x = rng.random_range(-50.0..50.0);
            }
            let shift = p.iter().sum::<f64>() / n as f64;
            for x in p.iter_mut() {
                *x -= shift;
            }
        }
        let sum: Vec<f64> = p1.iter().zip(&p2).map(|(a, b)| a + b).collect();
        let f1 = solve_flows(&grid, &p1).unwrap().flows;
        let f2 = solve_flows(&grid, &p2).unwrap().flows;
        let fs = solve_flows(&grid, &sum).unwrap().flows;
        let scale = fs.iter().fold(1.0f64, |m, f| m.max(f.abs()));
        for i in 0..grid.line_count() {
            assert!((fs[i] - (f1[i] + f2[i])).abs() <= 1e-9 * scale);
        }
    }
}

#[test]
fn doubling_susceptance_leaves_flows_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(5005);
    for _ in 0..100 {
        let grid = random_grid(&mut rng, 5);
        let buses: Vec<BusSpec> = grid
            .buses()
            .iter()
            .map(|b| BusSpec {
                id: b.id.clone(),
                demand: b.demand,
                generation_capacity: b.generation_capacity,
            })
            .collect();
        let lines: Vec<LineSpec> = grid
            .lines()
            .iter()
            .map(|l| LineSpec {
                id: l.id.clone(),
                from: grid.bus(l.from).id.clone(),
                to: grid.bus(l.to).id.clone(),
                susceptance: 2.0 * l.susceptance,
                voltage_class: l.voltage_class,
                real_limit: l.real_limit,
            })
            .collect();
        let doubled = PowerGrid::from_parts(buses, lines).unwrap();
        let a = initial_flows(&grid).unwrap();
        let b = initial_flows(&doubled).unwrap();
        let scale = a.flows.iter().fold(1.0f64, |m, f| m.max(f.abs()));
        for i in 0..grid.line_count() {
            assert!((a.flows[i] - b.flows[i]).abs() <= 1e-9 * scale);
        }
    }
}
