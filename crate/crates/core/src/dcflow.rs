//! Linearized DC load flow, solved independently per energized connected
//! component.
//!
//! For a component with oriented line-bus incidence `A` (slack column
//! removed), diagonal susceptance matrix `C` and net injections `p`, line
//! flows are `f = C A (A^T C A)^{-1} p`. The reduced weighted Laplacian
//! `A^T C A` is symmetric positive definite on a connected component, and is
//! factorized sparsely (LDL^T with reverse Cuthill-McKee ordering); grid
//! graphs are near-trees, so the factor stays close to the original pattern.
//!
//! The slack bus of a component is the bus with the largest generation
//! capacity, ties broken by lexicographically smallest id. DC flows are
//! slack-invariant; the choice only fixes which Laplacian column is dropped.

use sprs::{CsMat, TriMat};
use sprs_ldl::Ldl;
use thiserror::Error;


use crate::grid::PowerGrid;

/// KCL residual tolerance factor: `‖A^T f − p‖∞ ≤ 1e-8 · max(1, ‖p‖∞)`.
pub const KCL_TOL_FACTOR: f64 = 1e-8;
/// Per-component injection balance tolerance in MW.
pub const BALANCE_TOL_MW: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum DcFlowError {
    #[error("component of bus {bus}: no slack candidate (no generation capacity)")]
    NoSlackCandidate { bus: String },
    #[error("component of bus {bus}: injections sum to {sum:e} MW, exceeding the balance tolerance")]
    Unbalanced { bus: String, sum: f64 },
    #[error("component of bus {bus}: singular reduced Laplacian")]
    Singular { bus: String },
    #[error(
        "component of bus {bus}: KCL residual {residual:e} MW exceeds tolerance {tolerance:e}"
    )]
    Residual {
        bus: String,
        residual: f64,
        tolerance: f64,
    },
    #[error("injection vector length {got} does not match bus count {expected}")]
    BadLength { got: usize, expected: usize },
}

/// One solved snapshot: per-line signed MW flow (positive = from -> to),
/// the injections it was solved for, and the worst KCL residual.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub flows: Vec<f64>,
    pub injections: Vec<f64>,
    pub residual: f64,
}

/// Reduced system for one component, as built by [`build_system`]: oriented
/// incidence with the slack column removed, plus the susceptance diagonal.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    /// Line indices forming the rows of `incidence`.
    pub lines: Vec<usize>,
    /// Non-slack bus indices forming the columns of `incidence`.
    pub buses: Vec<usize>,
    /// Slack bus index (column removed).
    pub slack: usize,
    /// Rows: lines, columns: non-slack buses, entries +1 at `from`, -1 at `to`.
    pub incidence: CsMat<f64>,
    /// Per-row line susceptance (the diagonal of C).
    pub susceptance: Vec<f64>,
}

/// Picks the slack bus of a component: largest generation capacity, ties by
/// smallest id. Errors when the component has no generation capacity at all.
pub fn slack_bus(grid: &PowerGrid, component: &[usize]) -> Result<usize, DcFlowError> {
    let mut best: Option<usize> = None;
    for &b in component {
        let cap = grid.bus(b).generation_capacity;
        if cap <= 0.0 {
            continue;
        }
        best = match best {
            None => Some(b),
            Some(cur) => {
                let (cc, cb) = (grid.bus(cur).generation_capacity, cap);
                if cb > cc || (cb == cc && grid.bus(b).id < grid.bus(cur).id) {
                    Some(b)
                } else {
                    Some(cur)
                }
            }
        };
    }
    best.ok_or_else(|| DcFlowError::NoSlackCandidate {
        bus: grid.bus(component[0]).id.clone(),
    })
}

/// Builds the reduced incidence system for one connected component.
pub fn build_system(grid: &PowerGrid, component: &[usize]) -> Result<ReducedSystem, DcFlowError> {
    let slack = slack_bus(grid, component)?;
    let mut in_comp = vec![false; grid.bus_count()];
    for &b in component {
        in_comp[b] = true;
    }
    let buses: Vec<usize> = component.iter().copied().filter(|&b| b != slack).collect();
    let mut col_of = vec![usize::MAX; grid.bus_count()];
    for (c, &b) in buses.iter().enumerate() {
        col_of[b] = c;
    }
    let mut lines = Vec::new();
    for (li, line) in grid.lines().iter().enumerate() {
        if in_comp[line.from] && in_comp[line.to] {
            lines.push(li);
        }
    }
    let mut tri = TriMat::new((lines.len(), buses.len()));
    let mut susceptance = Vec::with_capacity(lines.len());
    for (row, &li) in lines.iter().enumerate() {
        let line = grid.line(li);
        if col_of[line.from] != usize::MAX {
            tri.add_triplet(row, col_of[line.from], 1.0);
        }
        if col_of[line.to] != usize::MAX {
            tri.add_triplet(row, col_of[line.to], -1.0);
        }
        susceptance.push(line.susceptance);
    }
    Ok(ReducedSystem {
        lines,
        buses,
        slack,
        incidence: tri.to_csr(),
        susceptance,
    })
}

/// Solves flows for the whole grid, component by component. Components whose
/// injections are all zero (de-energized islands) get exactly zero flows.
///
/// Preconditions: `injections[b]` is the net MW injection of bus `b` and sums
/// to ~0 within [`BALANCE_TOL_MW`] on every component that carries power.
pub fn solve_flows(grid: &PowerGrid, injections: &[f64]) -> Result<FlowState, DcFlowError> {
    if injections.len() != grid.bus_count() {
        return Err(DcFlowError::BadLength {
            got: injections.len(),
            expected: grid.bus_count(),
        });
    }
    let mut flows = vec![0.0; grid.line_count()];
    let mut residual = 0.0f64;
    let alive_buses = vec![true; grid.bus_count()];
    let alive_lines = vec![true; grid.line_count()];
    for component in grid.components() {
        let energized = component.iter().any(|&b| injections[b] != 0.0);
        if !energized {
            continue;
        }
        let slack = slack_bus(grid, &component)?;
        let r = solve_component(
            grid,
            &component,
            slack,
            injections,
            &alive_buses,
            &alive_lines,
            &mut flows,
        )?;
        residual = residual.max(r);
    }
    Ok(FlowState {
        flows,
        injections: injections.to_vec(),
        residual,
    })
}

/// Initial flows of the intact grid under its construction-time balance.
pub fn initial_flows(grid: &PowerGrid) -> Result<FlowState, DcFlowError> {
    solve_flows(grid, &grid.initial_injections())
}

/// Solves one component in place, writing into `flows` (global line indexing)
/// and returning the component's worst KCL residual. `alive_*` masks let the
/// cascade engine reuse this on partially destroyed grids; `component` must
/// be connected over the alive lines.
pub(crate) fn solve_component(
    grid: &PowerGrid,
    component: &[usize],
    slack: usize,
    injections: &[f64],
    alive_buses: &[bool],
    alive_lines: &[bool],
    flows: &mut [f64],
) -> Result<f64, DcFlowError> {
    let comp_label = || grid.bus(component[0]).id.clone();

    let sum: f64 = component.iter().map(|&b| injections[b]).sum();
    let p_inf = component
        .iter()
        .map(|&b| injections[b].abs())
        .fold(0.0f64, f64::max);
    if sum.abs() > BALANCE_TOL_MW {
        return Err(DcFlowError::Unbalanced {
            bus: comp_label(),
            sum,
        });
    }

    // local reduced indexing: component buses except the slack
    let mut red_of = vec![usize::MAX; grid.bus_count()];
    let mut reduced = Vec::with_capacity(component.len().saturating_sub(1));
    for &b in component {
        if b != slack {
            red_of[b] = reduced.len();
            reduced.push(b);
        }
    }
    let mut in_comp = vec![false; grid.bus_count()];
    for &b in component {
        in_comp[b] = true;
    }

    // collect alive lines inside the component
    let mut comp_lines = Vec::new();
    for &b in component {
        for &(li, peer) in &grid.adjacency()[b] {
            if alive_lines[li] && alive_buses[peer] && in_comp[peer] && grid.line(li).from == b {
                comp_lines.push(li);
            }
        }
    }

    let n_red = reduced.len();
    if n_red == 0 {
        // single-bus component: no lines, nothing to solve
        return Ok(0.0);
    }

    // reduced weighted Laplacian A^T C A
    let mut tri = TriMat::new((n_red, n_red));
    let mut diag = vec![0.0f64; n_red];
    for &li in &comp_lines {
        let line = grid.line(li);
        let b = line.susceptance;
        let (u, v) = (red_of[line.from], red_of[line.to]);
        if u != usize::MAX {
            diag[u] += b;
        }
        if v != usize::MAX {
            diag[v] += b;
        }
        if u != usize::MAX && v != usize::MAX {
            tri.add_triplet(u, v, -b);
            tri.add_triplet(v, u, -b);
        }
    }
    for (i, &d) in diag.iter().enumerate() {
        tri.add_triplet(i, i, d);
    }
    let laplacian: CsMat<f64> = tri.to_csc();

    let rhs: Vec<f64> = reduced.iter().map(|&b| injections[b]).collect();
    let theta_red = if n_red == 1 {
        // two-bus component: the fill-reduction path needs n > 1 unknowns
        if diag[0] <= 0.0 {
            return Err(DcFlowError::Singular { bus: comp_label() });
        }
        vec![rhs[0] / diag[0]]
    } else {
        let ldl = Ldl::new()
            .check_symmetry(sprs::SymmetryCheck::DontCheckSymmetry)
            .fill_in_reduction(sprs::FillInReduction::ReverseCuthillMcKee)
            .numeric(laplacian.view())
            .map_err(|_| DcFlowError::Singular { bus: comp_label() })?;
        ldl.solve(&rhs)
    };

    // angles with slack pinned to zero, then f = C A theta
    let theta = |bus: usize| -> f64 {
        if bus == slack {
            0.0
        } else {
            theta_red[red_of[bus]]
        }
    };
    for &li in &comp_lines {
        let line = grid.line(li);
        flows[li] = line.susceptance * (theta(line.from) - theta(line.to));
    }

    // KCL residual at every component bus, slack included
    let mut residual = 0.0f64;
    for &b in component {
        let mut net = -injections[b];
        for &(li, peer) in &grid.adjacency()[b] {
            if !alive_lines[li] || !alive_buses[peer] || !in_comp[peer] {
                continue;
            }
            let line = grid.line(li);
            if line.from == b {
                net += flows[li];
            } else {
                net -= flows[li];
            }
        }
        residual = residual.max(net.abs());
    }
    let tolerance = KCL_TOL_FACTOR * p_inf.max(1.0);
    if residual > tolerance {
        return Err(DcFlowError::Residual {
            bus: comp_label(),
            residual,
            tolerance,
        });
    }
    if !theta_red.iter().all(|t| t.is_finite()) {
        return Err(DcFlowError::Singular { bus: comp_label() });
    }
    Ok(residual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{BusSpec, LineSpec, VoltageClass};

    fn bus(id: &str, demand: f64, cap: f64) -> BusSpec {
        BusSpec {
            id: id.into(),
            demand,
            generation_capacity: cap,
        }
    }

    fn line(id: &str, from: &str, to: &str, b: f64) -> LineSpec {
        LineSpec {
            id: id.into(),
            from: from.into(),
            to: to.into(),
            susceptance: b,
            voltage_class: VoltageClass::V132,
            real_limit: None,
        }
    }

    fn triangle(b: f64) -> PowerGrid {
        PowerGrid::from_parts(
            vec![bus("1", 0.0, 1.0), bus("2", 1.0, 0.0), bus("3", 0.0, 0.0)],
            vec![
                line("12", "1", "2", b),
                line("13", "1", "3", b),
                line("32", "3", "2", b),
            ],
        )
        .unwrap()
    }

    #[test]
    fn triangle_flow_divider() {
        let grid = triangle(1.0);
        let state = initial_flows(&grid).unwrap();
        // injections (+1, -1, 0): one-hop path carries 2/3, two-hop 1/3
        assert!((state.flows[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((state.flows[1] - 1.0 / 3.0).abs() < 1e-12);
        assert!((state.flows[2] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_injections_zero_flows() {
        let grid = triangle(2.5);
        let state = solve_flows(&grid, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(state.flows, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn susceptance_scale_invariance() {
        let a = initial_flows(&triangle(1.0)).unwrap();
        let b = initial_flows(&triangle(2.0)).unwrap();
        for (x, y) in a.flows.iter().zip(&b.flows) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn build_system_shapes() {
        // 2-bus, 1-line: A is 1x1 with a single ±1
        let g2 = PowerGrid::from_parts(
            vec![bus("G", 0.0, 10.0), bus("L", 10.0, 0.0)],
            vec![line("e", "G", "L", 1.0)],
        )
        .unwrap();
        let sys = build_system(&g2, &[0, 1]).unwrap();
        assert_eq!(sys.incidence.shape(), (1, 1));
        assert_eq!(sys.slack, 0);
        let entry = *sys.incidence.get(0, 0).unwrap();
        assert!(entry == 1.0 || entry == -1.0);

        // triangle with slack a distinct bus: A is 3x2
        let g3 = triangle(1.0);
        let sys = build_system(&g3, &[0, 1, 2]).unwrap();
        assert_eq!(sys.incidence.shape(), (3, 2));
        assert_eq!(sys.slack, 0); // only bus "1" has capacity
        assert_eq!(sys.susceptance, vec![1.0, 1.0, 1.0]);

        // single-bus component: empty but valid
        let g1 = PowerGrid::from_parts(vec![bus("G", 1.0, 2.0)], vec![]).unwrap();
        let sys = build_system(&g1, &[0]).unwrap();
        assert_eq!(sys.incidence.shape(), (0, 0));
        assert!(sys.lines.is_empty());
    }

    #[test]
    fn no_slack_candidate_error() {
        let g = PowerGrid::from_parts(
            vec![bus("A", 1.0, 0.0), bus("B", 1.0, 0.0)],
            vec![line("e", "A", "B", 1.0)],
        )
        .unwrap();
        let err = build_system(&g, &[0, 1]).unwrap_err();
        assert!(matches!(err, DcFlowError::NoSlackCandidate { .. }));
    }

    #[test]
    fn unbalanced_injections_rejected() {
        let g = triangle(1.0);
        let err = solve_flows(&g, &[5.0, -1.0, 0.0]).unwrap_err();
        assert!(matches!(err, DcFlowError::Unbalanced { .. }));
    }

    #[test]
    fn slack_choice_is_deterministic_and_flow_invariant() {
        // two equal-capacity generators: tie broken by smaller id
        let g = PowerGrid::from_parts(
            vec![bus("b", 0.0, 5.0), bus("a", 0.0, 5.0), bus("c", 4.0, 0.0)],
            vec![
                line("1", "b", "a", 1.0),
                line("2", "a", "c", 1.0),
                line("3", "b", "c", 1.0),
            ],
        )
        .unwrap();
        let comp: Vec<usize> = vec![0, 1, 2];
        assert_eq!(slack_bus(&g, &comp).unwrap(), 1); // bus "a"

        // flows must not depend on which slack is used
        let inj = g.initial_injections();
        let alive_b = vec![true; 3];
        let alive_l = vec![true; 3];
        let mut f1 = vec![0.0; 3];
        let mut f2 = vec![0.0; 3];
        solve_component(&g, &comp, 0, &inj, &alive_b, &alive_l, &mut f1).unwrap();
        solve_component(&g, &comp, 1, &inj, &alive_b, &alive_l, &mut f2).unwrap();
        for (a, b) in f1.iter().zip(&f2) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }
}
