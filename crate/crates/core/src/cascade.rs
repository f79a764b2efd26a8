//! The attack engine: sequential (or grouped) node removal with overload
//! tripping, generation/demand rebalancing, and de-energization of islands
//! that lose either all load or all generation.
//!
//! Each targeted removal is followed by an inner cascade loop that repeats
//! until quiescence: recompute components, rebalance and shed dead islands,
//! re-solve DC flows, and trip every line whose |flow| strictly exceeds its
//! limit (all overloaded lines trip together, then power is redistributed).
//! Under [`Physics::Topological`] no flows are solved and no line ever
//! trips; islanding is the only loss mechanism.
//!
//! Only components affected by a removal are re-solved: an untouched island
//! keeps its previous (quiescent) flows, which the uniqueness of the DC
//! solution guarantees are still exact.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dcflow::{self, DcFlowError};
use crate::grid::PowerGrid;
use crate::limits::{LimitSet, ZERO_FLOW_MW};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Physics {
    CascadingDc,
    Topological,
}

#[derive(Debug, Error)]
pub enum CascadeError {
    #[error("attack order references unknown node {0}")]
    UnknownNode(String),
    #[error("limit set covers {got} lines, grid has {expected}")]
    LimitCount { got: usize, expected: usize },
    #[error("baseline has no {0}; damage is undefined")]
    EmptyBaseline(&'static str),
    #[error("round {round}: {source}")]
    Solver {
        round: usize,
        #[source]
        source: DcFlowError,
    },
}

/// What one targeted removal did to the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based targeted-removal index.
    pub round: usize,
    /// Node ids removed deliberately this round (one under the sequential
    /// regime, more under simultaneous/hybrid regimes).
    pub targets: Vec<String>,
    /// Node ids lost to islanding during this round's cascade.
    pub cascade_lost: Vec<String>,
    /// Line ids tripped by overload, with the inner iteration (1-based) in
    /// which each tripped.
    pub tripped: Vec<(String, usize)>,
    pub giant_damage: f64,
    pub blackout_damage: f64,
    /// Mean of limit/|flow| over surviving lines carrying measurable flow;
    /// `None` when limits are unbounded or no line qualifies.
    pub mean_alpha: Option<f64>,
    /// Mean of |flow|/limit over the same lines.
    pub mean_load_level: Option<f64>,
}

/// Full record of one attack run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub rounds: Vec<RoundRecord>,
    /// Node count of the largest connected component before the attack.
    pub baseline_giant: usize,
    /// Total demand served before the attack, MW.
    pub baseline_served_mw: f64,
    /// Worst KCL residual seen at any quiescent solve, MW.
    pub max_residual_mw: f64,
    /// Worst per-island |dispatched - served| seen at any rebalance, MW.
    pub max_balance_error_mw: f64,
}

/// How and when a node left the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeLoss {
    pub round: usize,
    pub targeted: bool,
}

impl SimulationTrace {
    /// Loss round and cause per node id.
    pub fn node_losses(&self) -> HashMap<&str, NodeLoss> {
        let mut out = HashMap::new();
        for rec in &self.rounds {
            for id in &rec.targets {
                out.insert(id.as_str(), NodeLoss {
                    round: rec.round,
                    targeted: true,
                });
            }
            for id in &rec.cascade_lost {
                out.insert(id.as_str(), NodeLoss {
                    round: rec.round,
                    targeted: false,
                });
            }
        }
        out
    }

    /// True when both traces removed the same nodes and lines in the same
    /// rounds with the same damage, ignoring the loading diagnostics.
    pub fn same_outcome(&self, other: &SimulationTrace) -> bool {
        self.rounds.len() == other.rounds.len()
            && self.rounds.iter().zip(&other.rounds).all(|(a, b)| {
                a.round == b.round
                    && a.targets == b.targets
                    && a.cascade_lost == b.cascade_lost
                    && a.tripped == b.tripped
                    && a.giant_damage == b.giant_damage
                    && a.blackout_damage == b.blackout_damage
            })
    }
}

/// Chooses which alive buses the next round removes. Implementations live in
/// [`crate::strategies`]; returning an empty vector ends the attack.
pub trait TargetSelector {
    fn next_targets(&mut self, state: &GridState) -> Vec<usize>;
}

/// Per-component balancing outcome over the full bus indexing.
#[derive(Debug, Clone, PartialEq)]
pub struct RebalanceOutcome {
    pub dispatched: Vec<f64>,
    pub served: Vec<f64>,
    pub energized: Vec<bool>,
}

/// The balancing rule applied island by island: with surplus capacity all
/// demand is served and generation is dispatched pro rata to capacity; in
/// deficit all capacity is dispatched and demand is shed pro rata; islands
/// lacking demand or capacity are de-energized entirely.
///
/// `comp_of` labels each bus with its component (`0..n_comps`); dead buses
/// (masked by `alive`) receive zero service.
pub fn rebalance_components(
    demand: &[f64],
    capacity: &[f64],
    comp_of: &[usize],
    n_comps: usize,
    alive: &[bool],
) -> RebalanceOutcome {
    let n = demand.len();
    let mut comp_demand = vec![0.0; n_comps];
    let mut comp_capacity = vec![0.0; n_comps];
    for i in 0..n {
        if alive[i] {
            comp_demand[comp_of[i]] += demand[i];
            comp_capacity[comp_of[i]] += capacity[i];
        }
    }
    let mut out = RebalanceOutcome {
        dispatched: vec![0.0; n],
        served: vec![0.0; n],
        energized: vec![false; n],
    };
    for i in 0..n {
        if !alive[i] {
            continue;
        }
        let c = comp_of[i];
        let (cap, dem) = (comp_capacity[c], comp_demand[c]);
        if cap <= 0.0 || dem <= 0.0 {
            continue; // island has no power or no load: de-energized
        }
        out.energized[i] = true;
        if cap >= dem {
            out.served[i] = demand[i];
            out.dispatched[i] = capacity[i] * (dem / cap);
        } else {
            out.dispatched[i] = capacity[i];
            out.served[i] = demand[i] * (cap / dem);
        }
    }
    out
}

/// Mutable working state of one attack run over a shared immutable grid.
pub struct GridState<'g> {
    grid: &'g PowerGrid,
    physics: Physics,
    limits: &'g [f64],
    bus_alive: Vec<bool>,
    line_alive: Vec<bool>,
    dispatched: Vec<f64>,
    served: Vec<f64>,
    flows: Vec<f64>,
    alive_buses: usize,
    round: usize,
    max_residual: f64,
    max_balance_error: f64,
}

impl<'g> GridState<'g> {
    pub fn new(
        grid: &'g PowerGrid,
        limits: &'g LimitSet,
        physics: Physics,
    ) -> Result<Self, CascadeError> {
        if limits.limits.len() != grid.line_count() {
            return Err(CascadeError::LimitCount {
                got: limits.limits.len(),
                expected: grid.line_count(),
            });
        }
        if grid.bus_count() == 0 {
            return Err(CascadeError::EmptyBaseline("nodes"));
        }
        if grid.initial_served_mw() <= 0.0 {
            return Err(CascadeError::EmptyBaseline("served demand"));
        }
        Ok(GridState {
            grid,
            physics,
            limits: &limits.limits,
            bus_alive: vec![true; grid.bus_count()],
            line_alive: vec![true; grid.line_count()],
            dispatched: grid.buses().iter().map(|b| b.dispatched_generation).collect(),
            served: grid.buses().iter().map(|b| b.served_demand).collect(),
            flows: vec![0.0; grid.line_count()],
            alive_buses: grid.bus_count(),
            round: 0,
            max_residual: 0.0,
            max_balance_error: 0.0,
        })
    }

    pub fn grid(&self) -> &PowerGrid {
        self.grid
    }

    pub fn physics(&self) -> Physics {
        self.physics
    }

    pub fn bus_alive(&self) -> &[bool] {
        &self.bus_alive
    }

    pub fn line_alive(&self) -> &[bool] {
        &self.line_alive
    }

    /// Current quiescent flows (MW, signed, zero on dead lines).
    pub fn flows(&self) -> &[f64] {
        &self.flows
    }

    pub fn limits(&self) -> &[f64] {
        self.limits
    }

    pub fn alive_bus_count(&self) -> usize {
        self.alive_buses
    }

    /// Component label per bus over the surviving graph (`usize::MAX` for
    /// removed buses) and the component count.
    pub fn components(&self) -> (Vec<usize>, usize) {
        let n = self.grid.bus_count();
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        let mut queue = std::collections::VecDeque::new();
        for start in 0..n {
            if !self.bus_alive[start] || label[start] != usize::MAX {
                continue;
            }
            label[start] = next;
            queue.push_back(start);
            while let Some(u) = queue.pop_front() {
                for &(li, peer) in &self.grid.adjacency()[u] {
                    if self.line_alive[li] && self.bus_alive[peer] && label[peer] == usize::MAX {
                        label[peer] = next;
                        queue.push_back(peer);
                    }
                }
            }
            next += 1;
        }
        (label, next)
    }

    /// Damage pair `(giant_component_damage, blackout_damage)` relative to
    /// the pre-attack baseline: `1 - P_x / P_1`.
    pub fn damage(&self, comp_of: &[usize], n_comps: usize) -> (f64, f64) {
        let mut sizes = vec![0usize; n_comps];
        for (b, &c) in comp_of.iter().enumerate() {
            if self.bus_alive[b] {
                sizes[c] += 1;
            }
        }
        let giant = sizes.iter().copied().max().unwrap_or(0);
        let served: f64 = self.served.iter().sum();
        let baseline_giant = self.baseline_giant() as f64;
        let baseline_served = self.grid.initial_served_mw();
        (
            1.0 - giant as f64 / baseline_giant,
            1.0 - served / baseline_served,
        )
    }

    fn baseline_giant(&self) -> usize {
        self.grid
            .components()
            .iter()
            .map(|c| c.len())
            .max()
            .unwrap_or(0)
    }

    fn remove_bus(&mut self, bus: usize) {
        if !self.bus_alive[bus] {
            return;
        }
        self.bus_alive[bus] = false;
        self.alive_buses -= 1;
        self.dispatched[bus] = 0.0;
        self.served[bus] = 0.0;
        for &(li, _) in &self.grid.adjacency()[bus] {
            if self.line_alive[li] {
                self.line_alive[li] = false;
                self.flows[li] = 0.0;
            }
        }
    }

    /// Removes the given targets and runs the cascade loop to quiescence.
    /// When `global` is set every component is treated as affected (used for
    /// the first round, which must also clear any pre-existing overloads).
    fn execute_round(
        &mut self,
        round: usize,
        targets: &[usize],
        global: bool,
    ) -> Result<RoundRecord, CascadeError> {
        self.round = round;
        let mut seeds: Vec<usize> = Vec::new();
        for &t in targets {
            debug_assert!(self.bus_alive[t], "selector returned a dead target");
            for &(_, peer) in &self.grid.adjacency()[t] {
                seeds.push(peer);
            }
            self.remove_bus(t);
        }
        seeds.retain(|&b| self.bus_alive[b]);

        let mut cascade_lost: Vec<String> = Vec::new();
        let mut tripped: Vec<(String, usize)> = Vec::new();
        let mut iteration = 0;
        let (comp_of, n_comps) = loop {
            iteration += 1;
            let (comp_of, n_comps) = self.components();

            let mut dirty = vec![global && iteration == 1; n_comps];
            for &s in &seeds {
                if self.bus_alive[s] {
                    dirty[comp_of[s]] = true;
                }
            }

            // rebalance dirty components; shed islands lacking load or power
            let mut comp_demand = vec![0.0; n_comps];
            let mut comp_capacity = vec![0.0; n_comps];
            let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_comps];
            for (b, &c) in comp_of.iter().enumerate() {
                if !self.bus_alive[b] {
                    continue;
                }
                if dirty[c] {
                    comp_demand[c] += self.grid.bus(b).demand;
                    comp_capacity[c] += self.grid.bus(b).generation_capacity;
                    members[c].push(b);
                }
            }
            for c in 0..n_comps {
                if !dirty[c] || members[c].is_empty() {
                    continue;
                }
                let (cap, dem) = (comp_capacity[c], comp_demand[c]);
                if cap <= 0.0 || dem <= 0.0 {
                    for &b in &members[c] {
                        cascade_lost.push(self.grid.bus(b).id.clone());
                        self.remove_bus(b);
                    }
                    members[c].clear();
                    continue;
                }
                let mut dispatched_sum = 0.0;
                let mut served_sum = 0.0;
                for &b in &members[c] {
                    let bus = self.grid.bus(b);
                    if cap >= dem {
                        self.served[b] = bus.demand;
                        self.dispatched[b] = bus.generation_capacity * (dem / cap);
                    } else {
                        self.dispatched[b] = bus.generation_capacity;
                        self.served[b] = bus.demand * (cap / dem);
                    }
                    dispatched_sum += self.dispatched[b];
                    served_sum += self.served[b];
                }
                self.max_balance_error = self.max_balance_error.max((dispatched_sum - served_sum).abs());
            }

            if self.physics == Physics::Topological {
                // no flows, no trips: islanding settles in one pass
                break (comp_of, n_comps);
            }

            // re-solve flows on surviving dirty components
            let injections: Vec<f64> = (0..self.grid.bus_count())
                .map(|b| self.dispatched[b] - self.served[b])
                .collect();
            for c in 0..n_comps {
                if !dirty[c] || members[c].is_empty() {
                    continue;
                }
                let slack = dcflow::slack_bus(self.grid, &members[c])
                    .map_err(|source| CascadeError::Solver { round, source })?;
                let residual = dcflow::solve_component(
                    self.grid,
                    &members[c],
                    slack,
                    &injections,
                    &self.bus_alive,
                    &self.line_alive,
                    &mut self.flows,
                )
                .map_err(|source| CascadeError::Solver { round, source })?;
                self.max_residual = self.max_residual.max(residual);
            }

            // trip every overloaded line, then loop to redistribute
            let mut trips: Vec<usize> = Vec::new();
            for li in 0..self.grid.line_count() {
                if !self.line_alive[li] {
                    continue;
                }
                let c = comp_of[self.grid.line(li).from];
                if c != usize::MAX && dirty[c] && self.flows[li].abs() > self.limits[li] {
                    trips.push(li);
                }
            }
            if trips.is_empty() {
                break (comp_of, n_comps);
            }
            seeds.clear();
            for &li in &trips {
                let line = self.grid.line(li);
                tripped.push((line.id.clone(), iteration));
                self.line_alive[li] = false;
                self.flows[li] = 0.0;
                seeds.push(line.from);
                seeds.push(line.to);
            }
            seeds.retain(|&b| self.bus_alive[b]);
        };

        // quiescence: no surviving line above its limit
        debug_assert!((0..self.grid.line_count())
            .all(|li| !self.line_alive[li] || self.flows[li].abs() <= self.limits[li]));

        let (giant_damage, blackout_damage) = self.damage(&comp_of, n_comps);
        let (mean_alpha, mean_load_level) = self.loading_stats();
        Ok(RoundRecord {
            round,
            targets: targets.iter().map(|&t| self.grid.bus(t).id.clone()).collect(),
            cascade_lost,
            tripped,
            giant_damage,
            blackout_damage,
            mean_alpha,
            mean_load_level,
        })
    }

    /// Mean limit/|flow| and |flow|/limit over surviving lines with finite
    /// limits and |flow| above the measurable-flow floor.
    fn loading_stats(&self) -> (Option<f64>, Option<f64>) {
        let mut alpha_sum = 0.0;
        let mut load_sum = 0.0;
        let mut count = 0usize;
        for li in 0..self.grid.line_count() {
            if !self.line_alive[li] || !self.limits[li].is_finite() {
                continue;
            }
            let f = self.flows[li].abs();
            if f < ZERO_FLOW_MW {
                continue;
            }
            alpha_sum += self.limits[li] / f;
            load_sum += f / self.limits[li];
            count += 1;
        }
        if count == 0 {
            (None, None)
        } else {
            (Some(alpha_sum / count as f64), Some(load_sum / count as f64))
        }
    }
}

/// Runs an attack driven by a [`TargetSelector`] until the grid is empty or
/// the selector stops yielding targets.
pub fn attack_with_selector(
    grid: &PowerGrid,
    limits: &LimitSet,
    selector: &mut dyn TargetSelector,
    physics: Physics,
) -> Result<SimulationTrace, CascadeError> {
    let mut state = GridState::new(grid, limits, physics)?;
    let baseline_giant = state.baseline_giant();
    let baseline_served_mw = grid.initial_served_mw();
    let mut rounds = Vec::new();
    let mut round = 0;
    let mut prev_damage = (0.0, 0.0);
    while state.alive_bus_count() > 0 {
        let targets = selector.next_targets(&state);
        if targets.is_empty() {
            break;
        }
        round += 1;
        let record = state.execute_round(round, &targets, round == 1)?;
        debug_assert!(
            record.giant_damage >= prev_damage.0 - 1e-12
                && record.blackout_damage >= prev_damage.1 - 1e-12,
            "damage must not decrease"
        );
        prev_damage = (record.giant_damage, record.blackout_damage);
        rounds.push(record);
    }
    Ok(SimulationTrace {
        rounds,
        baseline_giant,
        baseline_served_mw,
        max_residual_mw: state.max_residual,
        max_balance_error_mw: state.max_balance_error,
    })
}

struct FixedOrder {
    order: Vec<usize>,
    next: usize,
}

impl TargetSelector for FixedOrder {
    fn next_targets(&mut self, state: &GridState) -> Vec<usize> {
        while self.next < self.order.len() {
            let candidate = self.order[self.next];
            self.next += 1;
            if state.bus_alive()[candidate] {
                return vec![candidate];
            }
        }
        Vec::new()
    }
}

/// Attacks the grid with a fixed precomputed order, one node per round;
/// entries already lost to a cascade are skipped.
pub fn attack_the_grid(
    grid: &PowerGrid,
    limits: &LimitSet,
    order: &[String],
    physics: Physics,
) -> Result<SimulationTrace, CascadeError> {
    let mut indices = Vec::with_capacity(order.len());
    for id in order {
        indices.push(
            grid.bus_idx(id)
                .ok_or_else(|| CascadeError::UnknownNode(id.clone()))?,
        );
    }
    let mut selector = FixedOrder {
        order: indices,
        next: 0,
    };
    attack_with_selector(grid, limits, &mut selector, physics)
}

/// Writes one trace in the per-round CSV schema
/// `sim_id,round,target,nodes_lost,lines_tripped,giant_damage,blackout_damage`.
pub fn write_trace_csv<W: std::io::Write>(
    writer: &mut csv::Writer<W>,
    sim_id: u64,
    trace: &SimulationTrace,
) -> csv::Result<()> {
    for rec in &trace.rounds {
        writer.write_record([
            sim_id.to_string(),
            rec.round.to_string(),
            rec.targets.join(";"),
            rec.cascade_lost.len().to_string(),
            rec.tripped.len().to_string(),
            rec.giant_damage.to_string(),
            rec.blackout_damage.to_string(),
        ])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{BusSpec, LineSpec, PowerGrid, VoltageClass};
    use crate::limits;

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

    fn order(ids: &[&str]) -> Vec<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn islanding_on_a_path() {
        // gen A - B - load C; removing B strands both ends
        let g = PowerGrid::from_parts(
            vec![bus("A", 0.0, 10.0), bus("B", 0.0, 0.0), bus("C", 10.0, 0.0)],
            vec![line("ab", "A", "B", 1.0), line("bc", "B", "C", 1.0)],
        )
        .unwrap();
        let lims = limits::topological_limits(&g);
        let trace =
            attack_the_grid(&g, &lims, &order(&["B", "A", "C"]), Physics::Topological).unwrap();
        assert_eq!(trace.rounds.len(), 1);
        let r = &trace.rounds[0];
        assert_eq!(r.targets, vec!["B".to_string()]);
        let mut lost = r.cascade_lost.clone();
        lost.sort();
        assert_eq!(lost, vec!["A".to_string(), "C".to_string()]);
        assert_eq!(r.blackout_damage, 1.0);
        assert_eq!(r.giant_damage, 1.0);
    }

    #[test]
    fn generator_removal_blacks_out_two_bus_grid() {
        let g = PowerGrid::from_parts(
            vec![bus("G", 0.0, 100.0), bus("L", 100.0, 0.0)],
            vec![line("e", "G", "L", 1.0)],
        )
        .unwrap();
        let lims = limits::topological_limits(&g);
        let trace =
            attack_the_grid(&g, &lims, &order(&["G", "L"]), Physics::CascadingDc).unwrap();
        assert_eq!(trace.rounds[0].blackout_damage, 1.0);
        assert_eq!(trace.rounds[0].cascade_lost, vec!["L".to_string()]);
    }

    #[test]
    fn overload_trips_exactly_one_line() {
        // diamond: G feeds L over two parallel 2-hop paths of equal
        // susceptance, each carrying 50. A direct G-L line is added with
        // small susceptance; removing bus "X2" (one path) forces its share
        // through the other path and the weak line trips if its planted
        // limit sits between the old and new flow.
        let g = PowerGrid::from_parts(
            vec![
                bus("G", 0.0, 100.0),
                bus("X1", 0.0, 0.0),
                bus("X2", 0.0, 0.0),
                bus("L", 100.0, 0.0),
            ],
            vec![
                line("g1", "G", "X1", 2.0),
                line("1l", "X1", "L", 2.0),
                line("g2", "G", "X2", 2.0),
                line("2l", "X2", "L", 2.0),
            ],
        )
        .unwrap();
        let flows = crate::dcflow::initial_flows(&g).unwrap();
        // both paths carry 50 MW initially
        assert!((flows.flows[0].abs() - 50.0).abs() < 1e-9);

        // limits: path one gets barely above 50 so losing path two overloads it
        let lims = LimitSet {
            method: limits::LimitMethod::Real,
            limits: vec![60.0, 60.0, 60.0, 60.0],
        };
        let trace =
            attack_the_grid(&g, &lims, &order(&["X2", "G", "X1", "L"]), Physics::CascadingDc)
                .unwrap();
        let r = &trace.rounds[0];
        assert_eq!(r.targets, vec!["X2".to_string()]);
        // full 100 MW now rides G-X1-L: both segments exceed 60 and trip,
        // stranding everything
        assert_eq!(r.tripped.len(), 2);
        assert_eq!(r.blackout_damage, 1.0);

        // with one tight and one roomy segment exactly one line trips
        let lims = LimitSet {
            method: limits::LimitMethod::Real,
            limits: vec![60.0, 150.0, 60.0, 60.0],
        };
        let trace =
            attack_the_grid(&g, &lims, &order(&["X2", "G", "X1", "L"]), Physics::CascadingDc)
                .unwrap();
        assert_eq!(trace.rounds[0].tripped.len(), 1);
        assert_eq!(trace.rounds[0].tripped[0].0, "g1");

        // with generous limits nothing trips
        let lims = LimitSet {
            method: limits::LimitMethod::Pl(50.0),
            limits: vec![2500.0; 4],
        };
        let trace =
            attack_the_grid(&g, &lims, &order(&["X2", "G", "X1", "L"]), Physics::CascadingDc)
                .unwrap();
        assert!(trace.rounds[0].tripped.is_empty());
        assert!(trace.rounds[0].blackout_damage < 1e-12);
    }

    #[test]
    fn rebalance_surplus_and_deficit() {
        let demand = vec![60.0, 0.0];
        let capacity = vec![0.0, 100.0];
        let out = rebalance_components(&demand, &capacity, &[0, 0], 1, &[true, true]);
        assert_eq!(out.served, vec![60.0, 0.0]);
        assert_eq!(out.dispatched, vec![0.0, 60.0]);

        let demand = vec![100.0, 0.0, 0.0];
        let capacity = vec![0.0, 30.0, 10.0];
        let out = rebalance_components(&demand, &capacity, &[0, 0, 0], 1, &[true; 3]);
        assert_eq!(out.served, vec![40.0, 0.0, 0.0]);
        assert_eq!(out.dispatched, vec![0.0, 30.0, 10.0]);

        // no generation: island is dead
        let out = rebalance_components(&[5.0], &[0.0], &[0], 1, &[true]);
        assert!(!out.energized[0]);
        assert_eq!(out.served, vec![0.0]);
    }

    #[test]
    fn skipped_targets_do_not_consume_rounds() {
        // removing B strands A and C; the order then lists A and C, which
        // are already gone, so the attack ends after one round
        let g = PowerGrid::from_parts(
            vec![bus("A", 0.0, 10.0), bus("B", 0.0, 0.0), bus("C", 10.0, 0.0)],
            vec![line("ab", "A", "B", 1.0), line("bc", "B", "C", 1.0)],
        )
        .unwrap();
        let lims = limits::topological_limits(&g);
        let trace =
            attack_the_grid(&g, &lims, &order(&["B", "A", "C"]), Physics::Topological).unwrap();
        assert_eq!(trace.rounds.len(), 1);
    }

    #[test]
    fn unknown_node_rejected() {
        let g = PowerGrid::from_parts(
            vec![bus("G", 0.0, 10.0), bus("L", 10.0, 0.0)],
            vec![line("e", "G", "L", 1.0)],
        )
        .unwrap();
        let lims = limits::topological_limits(&g);
        let err = attack_the_grid(&g, &lims, &order(&["nope"]), Physics::Topological).unwrap_err();
        assert!(matches!(err, CascadeError::UnknownNode(_)));
    }

    #[test]
    fn baseline_without_demand_rejected() {
        let g = PowerGrid::from_parts(vec![bus("G", 0.0, 10.0)], vec![]).unwrap();
        let lims = limits::topological_limits(&g);
        let err = attack_the_grid(&g, &lims, &order(&["G"]), Physics::Topological).unwrap_err();
        assert!(matches!(err, CascadeError::EmptyBaseline(_)));
    }
}
