//! Grid data model: buses, lines, validation, CSV ingestion/serialization,
//! topology statistics, and synthetic-grid generation (see [`synth`]).
//!
//! A [`PowerGrid`] is immutable once built and safe to share across
//! simulation workers. Construction validates ids, endpoints, susceptances
//! and limits, derives bus voltage classes from incident lines, and applies
//! the component balancing rule once so the grid carries a consistent
//! initial dispatch.

pub mod synth;

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graphops;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("{file} line {line}: {msg}")]
    Parse {
        file: String,
        line: u64,
        msg: String,
    },
    #[error("validation: {0}")]
    Validation(String),
    #[error("infeasible synthesis spec: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// kV rating bucket of a line or of a substation's highest-voltage connection.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
pub enum VoltageClass {
    #[default]
    V132,
    V275,
    V400,
}

impl VoltageClass {
    pub fn kv(self) -> u32 {
        match self {
            VoltageClass::V132 => 132,
            VoltageClass::V275 => 275,
            VoltageClass::V400 => 400,
        }
    }

    pub fn from_kv(kv: u32) -> Option<Self> {
        match kv {
            132 => Some(VoltageClass::V132),
            275 => Some(VoltageClass::V275),
            400 => Some(VoltageClass::V400),
            _ => None,
        }
    }
}

impl fmt::Display for VoltageClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kv())
    }
}

/// A substation. `dispatched_generation`, `served_demand` and `energized`
/// hold the grid-wide initial balance computed at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: String,
    pub demand: f64,
    pub generation_capacity: f64,
    pub dispatched_generation: f64,
    pub served_demand: f64,
    pub voltage_class: VoltageClass,
    pub energized: bool,
}

/// A transmission line between two buses, stored with resolved bus indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub id: String,
    pub from: usize,
    pub to: usize,
    pub susceptance: f64,
    pub voltage_class: VoltageClass,
    pub real_limit: Option<f64>,
}

/// Raw bus record before validation.
#[derive(Debug, Clone)]
pub struct BusSpec {
    pub id: String,
    pub demand: f64,
    pub generation_capacity: f64,
}

/// Raw line record before validation. Endpoints are bus ids.
#[derive(Debug, Clone)]
pub struct LineSpec {
    pub id: String,
    pub from: String,
    pub to: String,
    pub susceptance: f64,
    pub voltage_class: VoltageClass,
    pub real_limit: Option<f64>,
}

/// Immutable validated grid. Parallel lines are kept distinct; each carries
/// its own limit.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerGrid {
    buses: Vec<Bus>,
    lines: Vec<Line>,
    bus_index: HashMap<String, usize>,
    line_index: HashMap<String, usize>,
    /// per bus: (incident line index, peer bus index)
    adjacency: Vec<Vec<(usize, usize)>>,
}

/// Standard graph statistics of a grid (simple undirected projection for
/// distance/clustering/betweenness; parallel lines count toward degree).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopologyStats {
    pub node_count: usize,
    pub edge_count: usize,
    pub mean_degree: f64,
    pub mean_unweighted_distance: f64,
    pub assortativity: f64,
    pub mean_clustering: f64,
    pub mean_normalized_betweenness: f64,
}

impl PowerGrid {
    /// Validates the parts and assembles a grid. The initial dispatch is set
    /// by applying the component balancing rule grid-wide; components that
    /// lack demand or generation capacity are flagged de-energized.
    pub fn from_parts(bus_specs: Vec<BusSpec>, line_specs: Vec<LineSpec>) -> Result<Self, GridError> {
        let mut bus_index = HashMap::with_capacity(bus_specs.len());
        let mut buses = Vec::with_capacity(bus_specs.len());
        for spec in bus_specs {
            if !spec.demand.is_finite() || spec.demand < 0.0 {
                return Err(GridError::Validation(format!(
                    "bus {}: demand {} must be finite and non-negative",
                    spec.id, spec.demand
                )));
            }
            if !spec.generation_capacity.is_finite() || spec.generation_capacity < 0.0 {
                return Err(GridError::Validation(format!(
                    "bus {}: generation capacity {} must be finite and non-negative",
                    spec.id, spec.generation_capacity
                )));
            }
            if bus_index.insert(spec.id.clone(), buses.len()).is_some() {
                return Err(GridError::Validation(format!("duplicate bus id {}", spec.id)));
            }
            buses.push(Bus {
                id: spec.id,
                demand: spec.demand,
                generation_capacity: spec.generation_capacity,
                dispatched_generation: 0.0,
                served_demand: 0.0,
                voltage_class: VoltageClass::V132,
                energized: false,
            });
        }

        let mut line_index = HashMap::with_capacity(line_specs.len());
        let mut lines = Vec::with_capacity(line_specs.len());
        for spec in line_specs {
            let from = *bus_index
                .get(&spec.from)
                .ok_or_else(|| GridError::Validation(format!("line {}: unknown bus {}", spec.id, spec.from)))?;
            let to = *bus_index
                .get(&spec.to)
                .ok_or_else(|| GridError::Validation(format!("line {}: unknown bus {}", spec.id, spec.to)))?;
            if from == to {
                return Err(GridError::Validation(format!(
                    "line {}: self-loop at bus {}",
                    spec.id, spec.from
                )));
            }
            if !(spec.susceptance.is_finite() && spec.susceptance > 0.0) {
                return Err(GridError::Validation(format!(
                    "line {}: susceptance {} must be finite and positive",
                    spec.id, spec.susceptance
                )));
            }
            if let Some(limit) = spec.real_limit {
                if !(limit.is_finite() && limit > 0.0) {
                    return Err(GridError::Validation(format!(
                        "line {}: limit {} must be finite and positive",
                        spec.id, limit
                    )));
                }
            }
            if line_index.insert(spec.id.clone(), lines.len()).is_some() {
                return Err(GridError::Validation(format!("duplicate line id {}", spec.id)));
            }
            lines.push(Line {
                id: spec.id,
                from,
                to,
                susceptance: spec.susceptance,
                voltage_class: spec.voltage_class,
                real_limit: spec.real_limit,
            });
        }

        let mut adjacency = vec![Vec::new(); buses.len()];
        for (li, line) in lines.iter().enumerate() {
            adjacency[line.from].push((li, line.to));
            adjacency[line.to].push((li, line.from));
            // bus class = max voltage class of incident lines
            for b in [line.from, line.to] {
                buses[b].voltage_class = buses[b].voltage_class.max(line.voltage_class);
            }
        }

        let mut grid = PowerGrid {
            buses,
            lines,
            bus_index,
            line_index,
            adjacency,
        };
        grid.apply_initial_balance();
        Ok(grid)
    }

    fn apply_initial_balance(&mut self) {
        let alive = vec![true; self.buses.len()];
        let adj = self.simple_adjacency();
        let (comp_of, n_comps) = graphops::components(&adj, &alive);
        let demand: Vec<f64> = self.buses.iter().map(|b| b.demand).collect();
        let capacity: Vec<f64> = self.buses.iter().map(|b| b.generation_capacity).collect();
        let outcome =
            crate::cascade::rebalance_components(&demand, &capacity, &comp_of, n_comps, &alive);
        for (i, bus) in self.buses.iter_mut().enumerate() {
            bus.dispatched_generation = outcome.dispatched[i];
            bus.served_demand = outcome.served[i];
            bus.energized = outcome.energized[i];
        }
    }

    pub fn bus_count(&self) -> usize {
        self.buses.len()
    }

    pub fn line_count(&self) -> usize {
        self.lines.len()
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn bus(&self, idx: usize) -> &Bus {
        &self.buses[idx]
    }

    pub fn line(&self, idx: usize) -> &Line {
        &self.lines[idx]
    }

    pub fn bus_idx(&self, id: &str) -> Option<usize> {
        self.bus_index.get(id).copied()
    }

    pub fn line_idx(&self, id: &str) -> Option<usize> {
        self.line_index.get(id).copied()
    }

    /// Incident `(line, peer bus)` pairs per bus, parallel lines distinct.
    pub fn adjacency(&self) -> &[Vec<(usize, usize)>] {
        &self.adjacency
    }

    /// Neighbour lists with parallel lines collapsed.
    pub fn simple_adjacency(&self) -> graphops::SimpleAdj {
        let mut adj: graphops::SimpleAdj = vec![Vec::new(); self.buses.len()];
        for line in &self.lines {
            if !adj[line.from].contains(&line.to) {
                adj[line.from].push(line.to);
                adj[line.to].push(line.from);
            }
        }
        adj
    }

    /// Bus index sets of the connected components.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let alive = vec![true; self.buses.len()];
        let (comp_of, n_comps) = graphops::components(&self.simple_adjacency(), &alive);
        let mut comps = vec![Vec::new(); n_comps];
        for (bus, &c) in comp_of.iter().enumerate() {
            comps[c].push(bus);
        }
        comps
    }

    /// Net initial injection per bus: dispatched generation minus served demand.
    pub fn initial_injections(&self) -> Vec<f64> {
        self.buses
            .iter()
            .map(|b| b.dispatched_generation - b.served_demand)
            .collect()
    }

    /// Total demand served in the initial balanced state, in MW.
    pub fn initial_served_mw(&self) -> f64 {
        self.buses.iter().map(|b| b.served_demand).sum()
    }

    pub fn topology_stats(&self) -> TopologyStats {
        let n = self.buses.len();
        if n == 0 {
            return TopologyStats {
                node_count: 0,
                edge_count: 0,
                mean_degree: 0.0,
                mean_unweighted_distance: 0.0,
                assortativity: 0.0,
                mean_clustering: 0.0,
                mean_normalized_betweenness: 0.0,
            };
        }
        let adj = self.simple_adjacency();
        let (dist_total, dist_pairs) = graphops::distance_sums(&adj);
        let mean_unweighted_distance = if dist_pairs > 0 {
            dist_total as f64 / dist_pairs as f64
        } else {
            0.0
        };

        // multigraph degree (parallel lines counted individually)
        let degree: Vec<f64> = self.adjacency.iter().map(|a| a.len() as f64).collect();
        let mean_degree = 2.0 * self.lines.len() as f64 / n as f64;

        // degree assortativity over simple edges, both orientations
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (u, peers) in adj.iter().enumerate() {
            for &v in peers {
                xs.push(degree[u]);
                ys.push(degree[v]);
            }
        }
        let assortativity = crate::stats::pearson(&xs, &ys).unwrap_or(0.0);

        let mean_clustering = graphops::mean_clustering(&adj);

        let alive = vec![true; n];
        let betweenness = graphops::betweenness_unweighted(&adj, &alive);
        let mean_normalized_betweenness = if n >= 3 {
            let norm = (n - 1) as f64 * (n - 2) as f64 / 2.0;
            betweenness.iter().sum::<f64>() / n as f64 / norm
        } else {
            0.0
        };

        TopologyStats {
            node_count: n,
            edge_count: self.lines.len(),
            mean_degree,
            mean_unweighted_distance,
            assortativity,
            mean_clustering,
            mean_normalized_betweenness,
        }
    }
}

/// Loads a grid from the nodes/edges CSV pair.
///
/// Nodes: `id,demand_mw,generation_mw`. Edges: `id,from,to` plus either a
/// `susceptance` or a `reactance` column (converted as b = 1/x) and optional
/// `voltage_kv` (132/275/400) and `limit_mw` columns.
pub fn load_grid<P: AsRef<Path>, Q: AsRef<Path>>(
    nodes_path: P,
    edges_path: Q,
) -> Result<PowerGrid, GridError> {
    let buses = read_nodes(nodes_path.as_ref())?;
    let lines = read_edges(edges_path.as_ref())?;
    PowerGrid::from_parts(buses, lines)
}

fn parse_field(
    file: &str,
    line: u64,
    name: &str,
    raw: Option<&str>,
) -> Result<String, GridError> {
    raw.map(|s| s.trim().to_string()).ok_or_else(|| GridError::Parse {
        file: file.to_string(),
        line,
        msg: format!("missing column {name}"),
    })
}

fn parse_f64(file: &str, line: u64, name: &str, raw: &str) -> Result<f64, GridError> {
    raw.trim().parse::<f64>().map_err(|_| GridError::Parse {
        file: file.to_string(),
        line,
        msg: format!("column {name}: cannot parse number from {raw:?}"),
    })
}

fn read_nodes(path: &Path) -> Result<Vec<BusSpec>, GridError> {
    let file_label = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (id_c, demand_c, gen_c) = match (col("id"), col("demand_mw"), col("generation_mw")) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => {
            return Err(GridError::Parse {
                file: file_label,
                line: 1,
                msg: "expected header id,demand_mw,generation_mw".to_string(),
            })
        }
    };
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let id = parse_field(&file_label, line, "id", record.get(id_c))?;
        let demand = parse_f64(
            &file_label,
            line,
            "demand_mw",
            &parse_field(&file_label, line, "demand_mw", record.get(demand_c))?,
        )?;
        let generation = parse_f64(
            &file_label,
            line,
            "generation_mw",
            &parse_field(&file_label, line, "generation_mw", record.get(gen_c))?,
        )?;
        out.push(BusSpec {
            id,
            demand,
            generation_capacity: generation,
        });
    }
    Ok(out)
}

fn read_edges(path: &Path) -> Result<Vec<LineSpec>, GridError> {
    let file_label = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (id_c, from_c, to_c) = match (col("id"), col("from"), col("to")) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => {
            return Err(GridError::Parse {
                file: file_label,
                line: 1,
                msg: "expected header id,from,to plus susceptance or reactance".to_string(),
            })
        }
    };
    let susceptance_c = col("susceptance");
    let reactance_c = col("reactance");
    if susceptance_c.is_none() && reactance_c.is_none() {
        return Err(GridError::Parse {
            file: file_label,
            line: 1,
            msg: "expected a susceptance or reactance column".to_string(),
        });
    }
    let voltage_c = col("voltage_kv");
    let limit_c = col("limit_mw");

    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let id = parse_field(&file_label, line, "id", record.get(id_c))?;
        let from = parse_field(&file_label, line, "from", record.get(from_c))?;
        let to = parse_field(&file_label, line, "to", record.get(to_c))?;
        let susceptance = if let Some(c) = susceptance_c {
            let raw = parse_field(&file_label, line, "susceptance", record.get(c))?;
            parse_f64(&file_label, line, "susceptance", &raw)?
        } else {
            let c = reactance_c.expect("checked above");
            let raw = parse_field(&file_label, line, "reactance", record.get(c))?;
            let x = parse_f64(&file_label, line, "reactance", &raw)?;
            if !(x.is_finite() && x > 0.0) {
                return Err(GridError::Parse {
                    file: file_label.clone(),
                    line,
                    msg: format!("line {id}: reactance {x} must be positive"),
                });
            }
            1.0 / x
        };
        let voltage_class = match voltage_c {
            Some(c) => {
                let raw = parse_field(&file_label, line, "voltage_kv", record.get(c))?;
                if raw.is_empty() {
                    VoltageClass::V132
                } else {
                    let kv = raw.parse::<u32>().map_err(|_| GridError::Parse {
                        file: file_label.clone(),
                        line,
                        msg: format!("column voltage_kv: cannot parse {raw:?}"),
                    })?;
                    VoltageClass::from_kv(kv).ok_or_else(|| GridError::Parse {
                        file: file_label.clone(),
                        line,
                        msg: format!("voltage_kv {kv} is not one of 132,275,400"),
                    })?
                }
            }
            None => VoltageClass::V132,
        };
        let real_limit = match limit_c {
            Some(c) => {
                let raw = parse_field(&file_label, line, "limit_mw", record.get(c))?;
                if raw.is_empty() {
                    None
                } else {
                    Some(parse_f64(&file_label, line, "limit_mw", &raw)?)
                }
            }
            None => None,
        };
        out.push(LineSpec {
            id,
            from,
            to,
            susceptance,
            voltage_class,
            real_limit,
        });
    }
    Ok(out)
}

/// Writes the grid back to the CSV schemas accepted by [`load_grid`].
/// Susceptance is emitted canonically even when the grid was ingested from a
/// reactance column. `load_grid(save_grid(g)) == g` field-exactly.
pub fn save_grid<P: AsRef<Path>, Q: AsRef<Path>>(
    grid: &PowerGrid,
    nodes_path: P,
    edges_path: Q,
) -> Result<(), GridError> {
    let mut nodes = csv::Writer::from_path(nodes_path.as_ref())?;
    nodes.write_record(["id", "demand_mw", "generation_mw"])?;
    for bus in grid.buses() {
        nodes.write_record([
            bus.id.as_str(),
            &bus.demand.to_string(),
            &bus.generation_capacity.to_string(),
        ])?;
    }
    nodes.flush()?;

    let any_limit = grid.lines().iter().any(|l| l.real_limit.is_some());
    let mut edges = csv::Writer::from_path(edges_path.as_ref())?;
    if any_limit {
        edges.write_record(["id", "from", "to", "susceptance", "voltage_kv", "limit_mw"])?;
    } else {
        edges.write_record(["id", "from", "to", "susceptance", "voltage_kv"])?;
    }
    for line in grid.lines() {
        let mut record = vec![
            line.id.clone(),
            grid.bus(line.from).id.clone(),
            grid.bus(line.to).id.clone(),
            line.susceptance.to_string(),
            line.voltage_class.kv().to_string(),
        ];
        if any_limit {
            record.push(line.real_limit.map(|l| l.to_string()).unwrap_or_default());
        }
        edges.write_record(&record)?;
    }
    edges.flush()?;
    Ok(())
}
