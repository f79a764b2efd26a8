#![allow(dead_code)] // not every suite uses every helper

//! Helpers shared by the integration suites: an independent dense DC-flow
//! oracle, random-grid construction, and the bundled 512/698 fixture.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use gridfall::grid::{load_grid, BusSpec, LineSpec, PowerGrid, VoltageClass};

/// Dense solve of the bus-angle equations `A^T C A theta = p` (slack angle
/// pinned to zero) by partial-pivot Gaussian elimination, then
/// `f = C A theta`. Shares nothing with the sparse production solver.
#[allow(clippy::needless_range_loop)] // two rows of one matrix share the column index
pub fn oracle_flows(grid: &PowerGrid, injections: &[f64], slack: usize) -> Vec<f64> {
    let n = grid.bus_count();
    let reduced: Vec<usize> = (0..n).filter(|&b| b != slack).collect();
    let col_of = |b: usize| reduced.iter().position(|&x| x == b);
    let k = reduced.len();
    let mut matrix = vec![vec![0.0f64; k + 1]; k];
    for line in grid.lines() {
        let b = line.susceptance;
        let (fu, fv) = (col_of(line.from), col_of(line.to));
        if let Some(u) = fu {
            matrix[u][u] += b;
        }
        if let Some(v) = fv {
            matrix[v][v] += b;
        }
        if let (Some(u), Some(v)) = (fu, fv) {
            matrix[u][v] -= b;
            matrix[v][u] -= b;
        }
    }
    for (row, &bus) in reduced.iter().enumerate() {
        matrix[row][k] = injections[bus];
    }
    for col in 0..k {
        let pivot = (col..k)
            .max_by(|&a, &b| matrix[a][col].abs().total_cmp(&matrix[b][col].abs()))
            .unwrap();
        matrix.swap(col, pivot);
        let diag = matrix[col][col];
        assert!(diag.abs() > 1e-12, "oracle hit a singular system");
        for row in (col + 1)..k {
            let factor = matrix[row][col] / diag;
            for c in col..=k {
                matrix[row][c] -= factor * matrix[col][c];
            }
        }
    }
    let mut theta_red = vec![0.0f64; k];
    for row in (0..k).rev() {
        let mut acc = matrix[row][k];
        for c in (row + 1)..k {
            acc -= matrix[row][c] * theta_red[c];
        }
        theta_red[row] = acc / matrix[row][row];
    }
    let theta = |b: usize| {
        if b == slack {
            0.0
        } else {
            theta_red[col_of(b).unwrap()]
        }
    };
    grid.lines()
        .iter()
        .map(|line| line.susceptance * (theta(line.from) - theta(line.to)))
        .collect()
}

/// Random connected grid: spanning tree plus extra edges, random positive
/// susceptances, one or two generators.
pub fn random_grid(rng: &mut ChaCha8Rng, max_buses: usize) -> PowerGrid {
    let n = rng.random_range(2..=max_buses);
    let gens = rng.random_range(1..=2.min(n));
    let buses: Vec<BusSpec> = (0..n)
        .map(|i| BusSpec {
            id: format!("b{i}"),
            demand: if i >= gens {
                rng.random_range(1.0..80.0)
            } else {
                0.0
            },
            generation_capacity: if i < gens {
                rng.random_range(100.0..500.0)
            } else {
                0.0
            },
        })
        .collect();
    let mut lines = Vec::new();
    for i in 1..n {
        let j = rng.random_range(0..i);
        lines.push((i, j));
    }
    let extra = rng.random_range(0..=n);
    for _ in 0..extra {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b && !lines.contains(&(a, b)) && !lines.contains(&(b, a)) {
            lines.push((a, b));
        }
    }
    let line_specs = lines
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| LineSpec {
            id: format!("l{i}"),
            from: format!("b{a}"),
            to: format!("b{b}"),
            susceptance: rng.random_range(0.5..10.0),
            voltage_class: VoltageClass::V132,
            real_limit: None,
        })
        .collect();
    PowerGrid::from_parts(buses, line_specs).unwrap()
}

pub fn fixture_paths() -> (std::path::PathBuf, std::path::PathBuf) {
    let base = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    (
        base.join("grid512_nodes.csv"),
        base.join("grid512_edges.csv"),
    )
}

/// The bundled 512-node / 698-line fixture with limits planted at five
/// times the initial flows.
pub fn bundled_fixture() -> PowerGrid {
    let (nodes, edges) = fixture_paths();
    load_grid(nodes, edges).expect("bundled fixture loads")
}
