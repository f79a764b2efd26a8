//! Synthetic transmission grids with planted ground-truth line limits.
//!
//! The generator lays buses out in the unit square, connects them with a
//! Euclidean minimum spanning tree plus locally-biased extra edges (which
//! reproduces the sparse, long-diameter texture of national transmission
//! networks), assigns demand, generation and voltage classes from the spec's
//! ranges, and then plants real limits either as a uniform multiple of the
//! initial flows or from a linear flow/voltage model. Planted limits make
//! ground truth available to tests: the recovery target is known exactly.
//!
//! Everything is driven by the spec seed; the same spec always yields the
//! same grid.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{BusSpec, GridError, LineSpec, PowerGrid, VoltageClass};
use crate::dcflow;
use crate::limits::LinearLimitModel;
use crate::seeding::subrng;

/// How the generator plants `real_limit` on each line.
#[derive(Debug, Clone, PartialEq)]
pub enum LimitPlanting {
    /// No limits are planted.
    None,
    /// limit_i = alpha * |initial flow_i|, exactly.
    Alpha(f64),
    /// Limits from a noiseless linear model of flow and voltage class.
    Model(LinearLimitModel),
}

/// Parameters of a synthetic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub nodes: usize,
    /// Line count; defaults to `round(1.3633 * nodes)`, the sparse texture
    /// of a national transmission network (mean degree about 2.73).
    pub edges: Option<usize>,
    /// Uniform per-bus demand range in MW.
    pub demand_range: (f64, f64),
    /// Uniform per-generator capacity range in MW (before margin scaling).
    pub generation_range: (f64, f64),
    /// Fraction of buses hosting generation.
    pub generator_fraction: f64,
    /// Total capacity is rescaled to this multiple of total demand.
    pub capacity_margin: f64,
    /// Sampling weights for line voltage classes 132/275/400 kV.
    pub voltage_weights: [f64; 3],
    /// Per-unit susceptance range (arbitrary common base).
    pub susceptance_range: (f64, f64),
    pub seed: u64,
    pub planting: LimitPlanting,
}

impl SynthSpec {
    pub fn new(nodes: usize, seed: u64) -> Self {
        SynthSpec {
            nodes,
            edges: None,
            demand_range: (5.0, 60.0),
            generation_range: (50.0, 400.0),
            generator_fraction: 0.16,
            capacity_margin: 1.3,
            voltage_weights: [0.55, 0.25, 0.20],
            susceptance_range: (1.0, 10.0),
            seed,
            planting: LimitPlanting::None,
        }
    }

    pub fn with_edges(mut self, edges: usize) -> Self {
        self.edges = Some(edges);
        self
    }

    pub fn with_planting(mut self, planting: LimitPlanting) -> Self {
        self.planting = planting;
        self
    }

    fn edge_count(&self) -> usize {
        self.edges
            .unwrap_or_else(|| (1.3633 * self.nodes as f64).round() as usize)
    }

    fn validate(&self) -> Result<(), GridError> {
        let n = self.nodes;
        let m = self.edge_count();
        if n == 0 {
            return Err(GridError::Infeasible("node count must be positive".into()));
        }
        if n > 1 && m < n - 1 {
            return Err(GridError::Infeasible(format!(
                "{m} edges cannot connect {n} nodes"
            )));
        }
        if m > n * (n - 1) / 2 {
            return Err(GridError::Infeasible(format!(
                "{m} edges exceed the simple-graph capacity of {n} nodes"
            )));
        }
        for (label, (lo, hi)) in [
            ("demand", self.demand_range),
            ("generation", self.generation_range),
            ("susceptance", self.susceptance_range),
        ] {
            if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo <= hi) {
                return Err(GridError::Infeasible(format!(
                    "{label} range ({lo}, {hi}) must be positive and ordered"
                )));
            }
        }
        if !(self.generator_fraction > 0.0 && self.generator_fraction <= 1.0) {
            return Err(GridError::Infeasible(
                "generator fraction must be in (0, 1]".into(),
            ));
        }
        if self.capacity_margin < 1.0 {
            return Err(GridError::Infeasible(
                "capacity margin below 1 cannot serve all demand".into(),
            ));
        }
        if self.voltage_weights.iter().sum::<f64>() <= 0.0 {
            return Err(GridError::Infeasible("voltage weights sum to zero".into()));
        }
        if let LimitPlanting::Alpha(a) = self.planting {
            if a.is_nan() || a <= 0.0 {
                return Err(GridError::Infeasible(format!(
                    "planted alpha {a} must be positive"
                )));
            }
        }
        Ok(())
    }
}

/// Generates a connected grid matching the spec. With `Alpha` planting the
/// attempt is retried under a derived sub-seed if any line carries no
/// measurable initial flow, so every planted ratio is exact.
pub fn synth_grid(spec: &SynthSpec) -> Result<PowerGrid, GridError> {
    spec.validate()?;
    let mut last_err = None;
    for attempt in 0..16u64 {
        match generate_once(spec, attempt) {
            Ok(grid) => return Ok(grid),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| GridError::Infeasible("generator failed".into())))
}

fn generate_once(spec: &SynthSpec, attempt: u64) -> Result<PowerGrid, GridError> {
    let n = spec.nodes;
    let m = spec.edge_count();
    let mut rng = subrng(spec.seed, "synth", &[attempt]);

    let positions: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
        .collect();
    let id_width = (n.max(2) - 1).to_string().len();
    let bus_id = |i: usize| format!("n{:0width$}", i, width = id_width);

    // Euclidean MST (Prim) for the connected backbone
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(m);
    let mut in_tree = vec![false; n];
    let mut best_dist = vec![f64::INFINITY; n];
    let mut best_from = vec![0usize; n];
    in_tree[0] = true;
    for v in 1..n {
        best_dist[v] = dist2(positions[0], positions[v]);
    }
    for _ in 1..n {
        let mut pick = usize::MAX;
        let mut pick_d = f64::INFINITY;
        for v in 0..n {
            if !in_tree[v] && best_dist[v] < pick_d {
                pick = v;
                pick_d = best_dist[v];
            }
        }
        in_tree[pick] = true;
        edges.push((best_from[pick].min(pick), best_from[pick].max(pick)));
        for v in 0..n {
            if !in_tree[v] {
                let d = dist2(positions[pick], positions[v]);
                if d < best_dist[v] {
                    best_dist[v] = d;
                    best_from[v] = pick;
                }
            }
        }
    }

    // extra edges between near neighbours (meshing is local in real grids)
    let mut have: std::collections::HashSet<(usize, usize)> = edges.iter().copied().collect();
    let neighbourhood = 6usize.min(n.saturating_sub(1));
    let mut guard = 0usize;
    while edges.len() < m {
        guard += 1;
        if guard > 200 * m + 1000 {
            return Err(GridError::Infeasible(
                "could not place the requested edge count".into(),
            ));
        }
        let a = rng.random_range(0..n);
        let mut near: Vec<usize> = (0..n).filter(|&v| v != a).collect();
        near.sort_by(|&u, &v| {
            dist2(positions[a], positions[u]).total_cmp(&dist2(positions[a], positions[v]))
        });
        let b = near[rng.random_range(0..neighbourhood)];
        let key = (a.min(b), a.max(b));
        if have.insert(key) {
            edges.push(key);
        }
    }

    // demand everywhere, generation on a seeded subset
    let mut demand: Vec<f64> = (0..n)
        .map(|_| rng.random_range(spec.demand_range.0..=spec.demand_range.1))
        .collect();
    let gen_count = ((spec.generator_fraction * n as f64).ceil() as usize).clamp(1, n);
    let mut shuffled: Vec<usize> = (0..n).collect();
    shuffled.shuffle(&mut rng);
    let mut capacity = vec![0.0; n];
    for &b in shuffled.iter().take(gen_count) {
        capacity[b] = rng.random_range(spec.generation_range.0..=spec.generation_range.1);
        // generator buses carry little local demand
        demand[b] *= 0.25;
    }
    let total_demand: f64 = demand.iter().sum();
    let total_capacity: f64 = capacity.iter().sum();
    let scale = spec.capacity_margin * total_demand / total_capacity;
    for c in capacity.iter_mut() {
        *c *= scale;
    }

    let weight_total: f64 = spec.voltage_weights.iter().sum();
    let pick_class = |rng: &mut rand_chacha::ChaCha8Rng| {
        let roll = rng.random_range(0.0..weight_total);
        if roll < spec.voltage_weights[0] {
            VoltageClass::V132
        } else if roll < spec.voltage_weights[0] + spec.voltage_weights[1] {
            VoltageClass::V275
        } else {
            VoltageClass::V400
        }
    };

    let buses: Vec<BusSpec> = (0..n)
        .map(|i| BusSpec {
            id: bus_id(i),
            demand: demand[i],
            generation_capacity: capacity[i],
        })
        .collect();
    let mut line_specs: Vec<LineSpec> = edges
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| LineSpec {
            id: format!("e{:04}", i),
            from: bus_id(a),
            to: bus_id(b),
            susceptance: rng
                .random_range(spec.susceptance_range.0..=spec.susceptance_range.1),
            voltage_class: pick_class(&mut rng),
            real_limit: None,
        })
        .collect();

    let grid = PowerGrid::from_parts(buses.clone(), line_specs.clone())?;
    if matches!(spec.planting, LimitPlanting::None) {
        return Ok(grid);
    }

    let flows = dcflow::initial_flows(&grid)
        .map_err(|e| GridError::Infeasible(format!("initial flows failed: {e}")))?;
    match &spec.planting {
        LimitPlanting::None => unreachable!(),
        LimitPlanting::Alpha(alpha) => {
            if flows
                .flows
                .iter()
                .any(|f| f.abs() < crate::limits::ZERO_FLOW_MW)
            {
                return Err(GridError::Infeasible(
                    "a line carries no measurable initial flow".into(),
                ));
            }
            for (line, flow) in line_specs.iter_mut().zip(&flows.flows) {
                line.real_limit = Some(alpha * flow.abs());
            }
        }
        LimitPlanting::Model(model) => {
            for (i, line) in line_specs.iter_mut().enumerate() {
                line.real_limit = Some(model.predict_mw(flows.flows[i], line.voltage_class));
            }
        }
    }
    PowerGrid::from_parts(buses, line_specs)
}

fn dist2(a: (f64, f64), b: (f64, f64)) -> f64 {
    let dx = a.0 - b.0;
    let dy = a.1 - b.1;
    dx * dx + dy * dy
}
