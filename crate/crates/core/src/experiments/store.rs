//! On-disk result stores and run configuration.
//!
//! A batch directory holds `config.json` (the full run configuration plus
//! grid hashes, per-method initial loading, and checksums of the data
//! files), `traces.csv` (one row per simulation round), and
//! `loss_orders.json` (base removal orders and per-node loss records).
//! Aggregation adds `curves.csv`, `correlations.csv`, `ranks.csv`,
//! `alpha_traces.csv` and a plain-text `summary.txt`. Reports never
//! re-simulate: everything is derived from the stored files, and checksums
//! are verified first.
//!
//! No timestamps are written anywhere, so rerunning a batch from its
//! `config.json` reproduces every file byte for byte.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    alpha_trace, damage_curves, loss_order_correlation, strategy_rank_table, AlphaTrace,
    BatchResult, CellTrace, ExperimentError,
};
use crate::cascade::{Physics, RoundRecord, SimulationTrace};
use crate::dcflow::FlowState;
use crate::grid::PowerGrid;
use crate::limits::{self, LimitMethod, LimitSet};
use crate::strategies::{AttackPlan, AttackType, Element, RemovalRegime, Strategy};

pub const CONFIG_FILE: &str = "config.json";
pub const TRACES_FILE: &str = "traces.csv";
pub const ORDERS_FILE: &str = "loss_orders.json";

const TRACE_HEADER: [&str; 12] = [
    "method",
    "strategy",
    "plan",
    "sim_id",
    "round",
    "target",
    "nodes_lost",
    "lines_tripped",
    "giant_damage",
    "blackout_damage",
    "mean_alpha",
    "mean_load_level",
];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFiles {
    pub nodes: String,
    pub edges: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges_sha256: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LoadProfile {
    #[default]
    Single,
}

/// The five simulation parameters: physics, element, attack type, removal
/// regime, load profile.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PearlConfig {
    pub physics: Physics,
    #[serde(default)]
    pub element: Element,
    #[serde(default)]
    pub attack_type: AttackType,
    #[serde(default)]
    pub regime: RemovalRegime,
    #[serde(default)]
    pub load_profile: LoadProfile,
}

impl Default for PearlConfig {
    fn default() -> Self {
        PearlConfig {
            physics: Physics::CascadingDc,
            element: Element::Node,
            attack_type: AttackType::Fixed,
            regime: RemovalRegime::Sequential,
            load_profile: LoadProfile::Single,
        }
    }
}

/// Which limit sets the batch runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitMethodsConfig {
    #[serde(default)]
    pub real: bool,
    #[serde(default)]
    pub alphas: Vec<f64>,
    #[serde(default)]
    pub volt_pf: bool,
    #[serde(default)]
    pub pf: bool,
    #[serde(default)]
    pub topological: bool,
    #[serde(default = "default_folds")]
    pub model_folds: usize,
}

fn default_folds() -> usize {
    10
}

impl Default for LimitMethodsConfig {
    fn default() -> Self {
        LimitMethodsConfig {
            real: true,
            alphas: limits::DEFAULT_ALPHA_GRID.to_vec(),
            volt_pf: true,
            pf: true,
            topological: true,
            model_folds: 10,
        }
    }
}

/// Initial loading diagnostics per method, recorded so reports can rebuild
/// alpha traces without touching the grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodLoading {
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_load: Option<f64>,
}

/// Complete, replayable description of a batch. Unknown keys are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridFiles,
    #[serde(default)]
    pub pearl: PearlConfig,
    #[serde(default)]
    pub limit_methods: LimitMethodsConfig,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<Strategy>,
    pub sims: u64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub artifact_version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method_loading: Option<Vec<MethodLoading>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checksums: Option<BTreeMap<String, String>>,
}

fn default_strategies() -> Vec<Strategy> {
    vec![Strategy::Random]
}

impl RunConfig {
    pub fn new(nodes: impl Into<String>, edges: impl Into<String>) -> Self {
        RunConfig {
            grid: GridFiles {
                nodes: nodes.into(),
                edges: edges.into(),
                nodes_sha256: None,
                edges_sha256: None,
            },
            pearl: PearlConfig::default(),
            limit_methods: LimitMethodsConfig::default(),
            strategies: default_strategies(),
            sims: 100,
            seed: 0,
            artifact_version: None,
            method_loading: None,
            checksums: None,
        }
    }

    /// Consistency checks that do not need the grid.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.sims == 0 {
            return Err(ExperimentError::TooFew {
                what: "simulations",
                need: 1,
                got: 0,
            });
        }
        if let Some(alpha) = self.limit_methods.alphas.iter().find(|a| a.is_nan() || **a <= 0.0) {
            return Err(ExperimentError::Limit(limits::LimitError::BadAlpha(*alpha)));
        }
        if self.strategies.is_empty() {
            return Err(ExperimentError::TooFew {
                what: "strategies",
                need: 1,
                got: 0,
            });
        }
        if self.pearl.physics == Physics::Topological {
            let lm = &self.limit_methods;
            if lm.real || lm.volt_pf || lm.pf || !lm.alphas.is_empty() {
                return Err(ExperimentError::BadStore(
                    "topological physics cannot track loading: only the topological \
                     limit method is allowed (drop real/alphas/models)"
                        .into(),
                ));
            }
        }
        Ok(())
    }

    /// The limit sets this configuration asks for, in stable order:
    /// real, PL alphas, Volt PF, PF, topological.
    pub fn resolve_methods(
        &self,
        grid: &PowerGrid,
        flows: &FlowState,
    ) -> Result<Vec<LimitSet>, ExperimentError> {
        self.validate()?;
        if self.pearl.physics == Physics::Topological {
            return Ok(vec![limits::topological_limits(grid)]);
        }
        let lm = &self.limit_methods;
        let mut methods = Vec::new();
        if lm.real {
            methods.push(limits::real_limits(grid)?);
        }
        for &alpha in &lm.alphas {
            methods.push(limits::proportional_limits(grid, flows, alpha)?);
        }
        if lm.volt_pf || lm.pf {
            let real = limits::real_limits(grid)?;
            if lm.volt_pf {
                methods.push(
                    limits::fit_linear_model(grid, flows, &real, true, lm.model_folds, self.seed)?
                        .predicted,
                );
            }
            if lm.pf {
                methods.push(
                    limits::fit_linear_model(grid, flows, &real, false, lm.model_folds, self.seed)?
                        .predicted,
                );
            }
        }
        if lm.topological {
            methods.push(limits::topological_limits(grid));
        }
        Ok(methods)
    }

    /// One plan per strategy, under the configured attack type and regime.
    pub fn plans(&self) -> Vec<AttackPlan> {
        self.strategies
            .iter()
            .map(|&strategy| AttackPlan {
                strategy,
                attack_type: self.pearl.attack_type,
                regime: self.pearl.regime,
                element: self.pearl.element,
                seed: self.seed,
                budget: None,
            })
            .collect()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_sha256(path: &Path) -> Result<String, ExperimentError> {
    Ok(sha256_hex(&fs::read(path)?))
}

/// Runs the batch a configuration describes: loads the grid (verifying any
/// recorded file hashes, then pinning them), resolves the limit methods,
/// records their initial loading, and executes every cell. The returned
/// config is the replay-complete version that [`write_store`] persists.
pub fn execute_config(
    config: &RunConfig,
    exec: super::Execution,
    progress: impl Fn(&super::CellTrace) + Sync + Send,
) -> Result<(RunConfig, BatchResult), ExperimentError> {
    let mut config = config.clone();
    config.validate()?;

    let nodes_hash = file_sha256(Path::new(&config.grid.nodes))?;
    let edges_hash = file_sha256(Path::new(&config.grid.edges))?;
    if let Some(expected) = &config.grid.nodes_sha256 {
        if expected != &nodes_hash {
            return Err(ExperimentError::BadStore(format!(
                "{} changed since the config was written",
                config.grid.nodes
            )));
        }
    }
    if let Some(expected) = &config.grid.edges_sha256 {
        if expected != &edges_hash {
            return Err(ExperimentError::BadStore(format!(
                "{} changed since the config was written",
                config.grid.edges
            )));
        }
    }
    config.grid.nodes_sha256 = Some(nodes_hash);
    config.grid.edges_sha256 = Some(edges_hash);

    let grid = crate::grid::load_grid(&config.grid.nodes, &config.grid.edges)?;
    let flows = crate::dcflow::initial_flows(&grid)?;
    let methods = config.resolve_methods(&grid, &flows)?;
    config.method_loading = Some(
        methods
            .iter()
            .map(|set| {
                let loading = super::initial_loading(set, &flows).ok();
                MethodLoading {
                    method: set.method.label(),
                    initial_alpha: loading.map(|(a, _)| a),
                    initial_load: loading.map(|(_, l)| l),
                }
            })
            .collect(),
    );

    let plans = config.plans();
    let batch = super::run_batch_with_progress(
        &grid,
        methods,
        plans,
        config.sims,
        config.seed,
        exec,
        progress,
    )?;
    Ok((config, batch))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct OrderRecord {
    plan: usize,
    sim: u64,
    order: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LossRecord {
    node: String,
    round: usize,
    targeted: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CellRecord {
    method: String,
    plan: usize,
    sim: u64,
    losses: Vec<LossRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct OrdersFile {
    orders: Vec<OrderRecord>,
    cells: Vec<CellRecord>,
}

/// Writes `traces.csv`, `loss_orders.json` and finally `config.json`
/// (carrying the data-file checksums) into `dir`.
pub fn write_store(
    dir: &Path,
    config: &RunConfig,
    batch: &BatchResult,
) -> Result<(), ExperimentError> {
    // the config's method list is what read_store rebuilds cells from
    match &config.method_loading {
        Some(loadings)
            if loadings.len() == batch.methods.len()
                && loadings
                    .iter()
                    .zip(&batch.methods)
                    .all(|(l, m)| l.method == m.method.label()) => {}
        _ => {
            return Err(ExperimentError::BadStore(
                "config.method_loading must list the batch methods in order \
                 (execute_config fills it)"
                    .into(),
            ))
        }
    }
    fs::create_dir_all(dir)?;

    let traces_path = dir.join(TRACES_FILE);
    let mut writer = csv::Writer::from_path(&traces_path)?;
    writer.write_record(TRACE_HEADER)?;
    for cell in &batch.cells {
        let method = batch.methods[cell.method].method.label();
        let strategy = batch.plans[cell.plan].strategy.label();
        for rec in &cell.trace.rounds {
            writer.write_record([
                method.clone(),
                strategy.to_string(),
                cell.plan.to_string(),
                cell.sim.to_string(),
                rec.round.to_string(),
                rec.targets.join(";"),
                rec.cascade_lost.len().to_string(),
                rec.tripped.len().to_string(),
                rec.giant_damage.to_string(),
                rec.blackout_damage.to_string(),
                rec.mean_alpha.map(|a| a.to_string()).unwrap_or_default(),
                rec.mean_load_level.map(|l| l.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    writer.flush()?;

    let orders = OrdersFile {
        orders: batch
            .orders
            .iter()
            .enumerate()
            .flat_map(|(plan, per_sim)| {
                per_sim.iter().enumerate().map(move |(sim, order)| OrderRecord {
                    plan,
                    sim: sim as u64,
                    order: order.clone(),
                })
            })
            .collect(),
        cells: batch
            .cells
            .iter()
            .map(|cell| CellRecord {
                method: batch.methods[cell.method].method.label(),
                plan: cell.plan,
                sim: cell.sim,
                losses: cell
                    .trace
                    .rounds
                    .iter()
                    .flat_map(|rec| {
                        let targets = rec.targets.iter().map(move |id| LossRecord {
                            node: id.clone(),
                            round: rec.round,
                            targeted: true,
                        });
                        let cascaded = rec.cascade_lost.iter().map(move |id| LossRecord {
                            node: id.clone(),
                            round: rec.round,
                            targeted: false,
                        });
                        targets.chain(cascaded).collect::<Vec<_>>()
                    })
                    .collect(),
            })
            .collect(),
    };
    let orders_path = dir.join(ORDERS_FILE);
    fs::write(&orders_path, serde_json::to_vec_pretty(&orders)?)?;

    let mut final_config = config.clone();
    let mut sums = BTreeMap::new();
    sums.insert(TRACES_FILE.to_string(), file_sha256(&traces_path)?);
    sums.insert(ORDERS_FILE.to_string(), file_sha256(&orders_path)?);
    final_config.checksums = Some(sums);
    final_config.artifact_version = Some(crate::ARTIFACT_VERSION.to_string());
    fs::write(
        dir.join(CONFIG_FILE),
        serde_json::to_vec_pretty(&final_config)?,
    )?;
    Ok(())
}

fn parse_method_label(label: &str) -> Result<LimitMethod, ExperimentError> {
    match label {
        "real" => Ok(LimitMethod::Real),
        "volt_pf" => Ok(LimitMethod::VoltPf),
        "pf" => Ok(LimitMethod::Pf),
        "topological" => Ok(LimitMethod::Topological),
        other => other
            .strip_prefix("pl_")
            .and_then(|a| a.parse::<f64>().ok())
            .map(LimitMethod::Pl)
            .ok_or_else(|| ExperimentError::BadStore(format!("unknown method label {other}"))),
    }
}

/// Reads a store back for aggregation. The returned batch carries hollow
/// limit sets (labels only, no per-line limits) and traces without line-trip
/// detail or baselines; everything the report aggregations use is restored.
pub fn read_store(dir: &Path) -> Result<(RunConfig, BatchResult), ExperimentError> {
    let config: RunConfig = serde_json::from_slice(&fs::read(dir.join(CONFIG_FILE))?)?;
    let sums = config
        .checksums
        .as_ref()
        .ok_or_else(|| ExperimentError::BadStore("config.json lacks checksums".into()))?;
    for (file, expected) in sums {
        let actual = file_sha256(&dir.join(file))?;
        if &actual != expected {
            return Err(ExperimentError::Checksum { file: file.clone() });
        }
    }

    let orders_file: OrdersFile = serde_json::from_slice(&fs::read(dir.join(ORDERS_FILE))?)?;

    // method and plan catalogs, in stable batch order
    let loadings = config.method_loading.clone().unwrap_or_default();
    let mut methods: Vec<LimitSet> = Vec::new();
    for entry in &loadings {
        methods.push(LimitSet {
            method: parse_method_label(&entry.method)?,
            limits: Vec::new(),
        });
    }
    let plans = config.plans();

    let mut reader = csv::Reader::from_path(dir.join(TRACES_FILE))?;
    let header = reader.headers()?.clone();
    if header.iter().ne(TRACE_HEADER) {
        return Err(ExperimentError::BadStore("unexpected traces.csv header".into()));
    }
    let n_cells = methods.len() * plans.len() * config.sims as usize;
    let mut rounds_by_cell: Vec<Vec<RoundRecord>> = vec![Vec::new(); n_cells];
    let field = |rec: &csv::StringRecord, i: usize| -> String {
        rec.get(i).unwrap_or_default().to_string()
    };
    for record in reader.records() {
        let record = record?;
        let method = parse_method_label(&field(&record, 0))?;
        let m = methods
            .iter()
            .position(|s| s.method == method)
            .ok_or_else(|| ExperimentError::BadStore(format!("method {method} not in config")))?;
        let plan: usize = field(&record, 2)
            .parse()
            .map_err(|_| ExperimentError::BadStore("bad plan index".into()))?;
        let sim: u64 = field(&record, 3)
            .parse()
            .map_err(|_| ExperimentError::BadStore("bad sim id".into()))?;
        let round: usize = field(&record, 4)
            .parse()
            .map_err(|_| ExperimentError::BadStore("bad round".into()))?;
        let parse_opt = |s: String| -> Option<f64> {
            if s.is_empty() {
                None
            } else {
                s.parse().ok()
            }
        };
        let mean_alpha = parse_opt(field(&record, 10));
        let mean_load_level = parse_opt(field(&record, 11));
        let idx = (m * plans.len() + plan) * config.sims as usize + sim as usize;
        if idx >= n_cells {
            return Err(ExperimentError::BadStore("cell out of range".into()));
        }
        let target_field = field(&record, 5);
        rounds_by_cell[idx].push(RoundRecord {
            round,
            targets: if target_field.is_empty() {
                Vec::new()
            } else {
                target_field.split(';').map(str::to_string).collect()
            },
            cascade_lost: Vec::new(),
            tripped: Vec::new(),
            giant_damage: field(&record, 8)
                .parse()
                .map_err(|_| ExperimentError::BadStore("bad giant damage".into()))?,
            blackout_damage: field(&record, 9)
                .parse()
                .map_err(|_| ExperimentError::BadStore("bad blackout damage".into()))?,
            mean_alpha,
            mean_load_level,
        });
    }

    // fill cascade losses from the sidecar
    let mut cells: Vec<CellTrace> = Vec::with_capacity(n_cells);
    for (idx, cell_rounds) in rounds_by_cell.iter_mut().enumerate() {
        let sim = (idx % config.sims as usize) as u64;
        let rest = idx / config.sims as usize;
        let plan = rest % plans.len();
        let method = rest / plans.len();
        let mut rounds = std::mem::take(cell_rounds);
        rounds.sort_by_key(|r| r.round);
        cells.push(CellTrace {
            method,
            plan,
            sim,
            trace: SimulationTrace {
                rounds,
                baseline_giant: 0,
                baseline_served_mw: 0.0,
                max_residual_mw: 0.0,
                max_balance_error_mw: 0.0,
            },
        });
    }
    for cell_rec in &orders_file.cells {
        let method = parse_method_label(&cell_rec.method)?;
        let m = methods
            .iter()
            .position(|s| s.method == method)
            .ok_or_else(|| ExperimentError::BadStore("sidecar method not in config".into()))?;
        let idx = (m * plans.len() + cell_rec.plan) * config.sims as usize + cell_rec.sim as usize;
        if idx >= n_cells {
            return Err(ExperimentError::BadStore("sidecar cell out of range".into()));
        }
        for loss in &cell_rec.losses {
            if loss.targeted {
                continue;
            }
            if let Some(rec) = cells[idx]
                .trace
                .rounds
                .iter_mut()
                .find(|r| r.round == loss.round)
            {
                rec.cascade_lost.push(loss.node.clone());
            }
        }
    }

    let mut orders: Vec<Vec<Vec<String>>> =
        vec![vec![Vec::new(); config.sims as usize]; plans.len()];
    for rec in orders_file.orders {
        if rec.plan < plans.len() && (rec.sim as usize) < config.sims as usize {
            orders[rec.plan][rec.sim as usize] = rec.order;
        }
    }

    let batch = BatchResult {
        methods,
        plans,
        n_sims: config.sims,
        seed: config.seed,
        cells,
        orders,
    };
    Ok((config, batch))
}

/// Writes `curves.csv`, `correlations.csv`, `ranks.csv`, `alpha_traces.csv`
/// and `summary.txt` from an in-memory batch. Pure aggregation.
pub fn write_report(
    dir: &Path,
    config: &RunConfig,
    batch: &BatchResult,
) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir)?;
    let mut summary = String::new();
    summary.push_str("batch summary\n=============\n");
    summary.push_str(&format!(
        "methods: {}\nplans: {}\nsims per cell: {}\nseed: {}\n",
        batch
            .methods
            .iter()
            .map(|m| m.method.label())
            .collect::<Vec<_>>()
            .join(", "),
        batch
            .plans
            .iter()
            .map(|p| p.strategy.label().to_string())
            .collect::<Vec<_>>()
            .join(", "),
        batch.n_sims,
        batch.seed
    ));

    let has_real = batch.method_index(&LimitMethod::Real).is_some();

    // damage curves per plan
    let mut curves_writer = csv::Writer::from_path(dir.join("curves.csv"))?;
    curves_writer.write_record([
        "plan",
        "strategy",
        "method",
        "round",
        "giant_mean",
        "giant_sd",
        "blackout_mean",
        "blackout_sd",
    ])?;
    if has_real {
        for plan in 0..batch.plans.len() {
            let curves = damage_curves(batch, plan)?;
            for (m, method) in curves.methods.iter().enumerate() {
                for r in 0..curves.rounds {
                    curves_writer.write_record([
                        plan.to_string(),
                        batch.plans[plan].strategy.label().to_string(),
                        method.label(),
                        (r + 1).to_string(),
                        curves.giant_mean[m][r].to_string(),
                        curves.giant_sd[m][r].to_string(),
                        curves.blackout_mean[m][r].to_string(),
                        curves.blackout_sd[m][r].to_string(),
                    ])?;
                }
            }
            summary.push_str(&format!(
                "\nmean-damage RMSE vs real limits (plan {plan}, {}):\n",
                batch.plans[plan].strategy.label()
            ));
            let mut best: Option<(String, f64)> = None;
            for (m, method) in curves.methods.iter().enumerate() {
                let rmse = curves.rmse_vs_real[m];
                summary.push_str(&format!(
                    "  {:<14} giant {:.6}  blackout {:.6}\n",
                    method.label(),
                    rmse.giant,
                    rmse.blackout
                ));
                if *method != LimitMethod::Real {
                    let better = best.as_ref().is_none_or(|(_, b)| rmse.blackout < *b);
                    if better {
                        best = Some((method.label(), rmse.blackout));
                    }
                }
            }
            if let Some((label, rmse)) = best {
                summary.push_str(&format!(
                    "  best artificial method by blackout RMSE: {label} ({rmse:.6})\n"
                ));
            }
        }
    } else {
        summary.push_str("\nno real-limit cells: damage RMSE and correlations skipped\n");
    }
    curves_writer.flush()?;

    // loss-order correlations vs real
    let mut corr_writer = csv::Writer::from_path(dir.join("correlations.csv"))?;
    corr_writer.write_record(["plan", "method", "sim_id", "rho", "nodes_compared"])?;
    if has_real {
        for plan in 0..batch.plans.len() {
            summary.push_str(&format!("\nmean loss-order correlation (plan {plan}):\n"));
            for method in batch.methods.iter().map(|m| m.method) {
                if method == LimitMethod::Real {
                    continue;
                }
                let corr = loss_order_correlation(batch, plan, &method)?;
                for (sim, entry) in corr.per_sim.iter().enumerate() {
                    let (rho, n) = match entry {
                        Some((rho, n)) => (rho.to_string(), n.to_string()),
                        None => (String::new(), "0".to_string()),
                    };
                    corr_writer.write_record([
                        plan.to_string(),
                        method.label(),
                        sim.to_string(),
                        rho,
                        n,
                    ])?;
                }
                summary.push_str(&format!(
                    "  {:<14} mean rho {:.4} over {} sims ({} undefined)\n",
                    method.label(),
                    corr.mean_rho,
                    corr.defined,
                    corr.undefined
                ));
            }
        }
    }
    corr_writer.flush()?;

    // strategy rank tables over the deterministic-strategy plans
    let mut ranks_writer = csv::Writer::from_path(dir.join("ranks.csv"))?;
    ranks_writer.write_record(["method", "strategy", "round", "rank"])?;
    let deterministic: Vec<usize> = batch
        .plans
        .iter()
        .enumerate()
        .filter(|(_, p)| p.strategy != Strategy::Random && p.attack_type != AttackType::Adaptive)
        .map(|(i, _)| i)
        .collect();
    if has_real && deterministic.len() >= 2 {
        let sub = sub_batch(batch, &deterministic);
        let table = strategy_rank_table(&sub)?;
        for (m, method) in table.methods.iter().enumerate() {
            for r in 0..table.rounds {
                for (s, strategy) in table.strategies.iter().enumerate() {
                    ranks_writer.write_record([
                        method.label(),
                        strategy.label().to_string(),
                        (r + 1).to_string(),
                        table.ranks[m][r][s].to_string(),
                    ])?;
                }
            }
        }
        summary.push_str("\nstrategy-rank RMSE vs real limits:\n");
        for (m, method) in table.methods.iter().enumerate() {
            summary.push_str(&format!(
                "  {:<14} {:.6}\n",
                method.label(),
                table.rmse_vs_real[m]
            ));
        }
    }
    ranks_writer.flush()?;

    // alpha traces for bounded methods
    let mut alpha_writer = csv::Writer::from_path(dir.join("alpha_traces.csv"))?;
    alpha_writer.write_record(["plan", "method", "round", "mean_alpha", "mean_load_level"])?;
    let loadings = config.method_loading.clone().unwrap_or_default();
    let mut traces: Vec<AlphaTrace> = Vec::new();
    for plan in 0..batch.plans.len() {
        for entry in &loadings {
            let (Some(ia), Some(il)) = (entry.initial_alpha, entry.initial_load) else {
                continue;
            };
            let method = parse_method_label(&entry.method)?;
            if matches!(method, LimitMethod::Topological) {
                continue;
            }
            let trace = alpha_trace(batch, plan, &method, ia, il)?;
            alpha_writer.write_record([
                plan.to_string(),
                method.label(),
                "0".to_string(),
                ia.to_string(),
                il.to_string(),
            ])?;
            for (r, (a, l)) in trace
                .mean_alpha_by_round
                .iter()
                .zip(&trace.mean_load_by_round)
                .enumerate()
            {
                alpha_writer.write_record([
                    plan.to_string(),
                    method.label(),
                    (r + 1).to_string(),
                    a.to_string(),
                    l.to_string(),
                ])?;
            }
            if plan == 0 {
                traces.push(trace);
            }
        }
    }
    alpha_writer.flush()?;

    let pl_traces: Vec<&AlphaTrace> = traces
        .iter()
        .filter(|t| matches!(t.method, LimitMethod::Pl(_)))
        .collect();
    if pl_traces.len() >= 2 {
        summary.push_str("\nloading drop from initialization (plan 0):\n");
        for t in &pl_traces {
            summary.push_str(&format!(
                "  {:<14} delta_alpha {:.4}  delta_load {:.4}  total {:.4}\n",
                t.method.label(),
                t.delta_alpha,
                t.delta_load,
                t.delta_total
            ));
        }
        if let Some(best) = pl_traces
            .iter()
            .min_by(|a, b| a.delta_total.total_cmp(&b.delta_total))
        {
            summary.push_str(&format!(
                "  estimated true alpha: {}\n",
                best.method.label()
            ));
        }
    }

    let mut f = fs::File::create(dir.join("summary.txt"))?;
    f.write_all(summary.as_bytes())?;
    Ok(())
}

/// Restriction of a batch to a subset of its plans (for rank tables).
fn sub_batch(batch: &BatchResult, plan_indices: &[usize]) -> BatchResult {
    let plans: Vec<AttackPlan> = plan_indices.iter().map(|&i| batch.plans[i]).collect();
    let mut cells = Vec::new();
    for m in 0..batch.methods.len() {
        for (new_p, &old_p) in plan_indices.iter().enumerate() {
            for k in 0..batch.n_sims {
                let mut cell = batch.cell(m, old_p, k).clone();
                cell.plan = new_p;
                cells.push(cell);
            }
        }
    }
    BatchResult {
        methods: batch.methods.clone(),
        plans,
        n_sims: batch.n_sims,
        seed: batch.seed,
        cells,
        orders: plan_indices.iter().map(|&i| batch.orders[i].clone()).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{run_batch, Execution};
    use crate::grid::synth::{synth_grid, LimitPlanting, SynthSpec};

    #[test]
    fn store_round_trip_preserves_aggregation_data() {
        let grid = synth_grid(
            &SynthSpec::new(30, 4).with_planting(LimitPlanting::Alpha(3.0)),
        )
        .unwrap();
        let flows = crate::dcflow::initial_flows(&grid).unwrap();
        let methods = vec![
            crate::limits::real_limits(&grid).unwrap(),
            crate::limits::proportional_limits(&grid, &flows, 1.5).unwrap(),
        ];
        let loadings: Vec<MethodLoading> = methods
            .iter()
            .map(|m| {
                let (a, l) = crate::experiments::initial_loading(m, &flows).unwrap();
                MethodLoading {
                    method: m.method.label(),
                    initial_alpha: Some(a),
                    initial_load: Some(l),
                }
            })
            .collect();
        let plans = vec![crate::strategies::AttackPlan::new(Strategy::Random)];
        let batch = run_batch(&grid, methods, plans, 2, 5, Execution::Sequential).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let mut config = RunConfig::new("n.csv", "e.csv");
        config.sims = 2;
        config.seed = 5;
        config.limit_methods = LimitMethodsConfig {
            real: true,
            alphas: vec![1.5],
            volt_pf: false,
            pf: false,
            topological: false,
            model_folds: 10,
        };
        config.method_loading = Some(loadings);
        write_store(dir.path(), &config, &batch).unwrap();

        let (config2, restored) = read_store(dir.path()).unwrap();
        assert_eq!(restored.cells.len(), batch.cells.len());
        for (a, b) in batch.cells.iter().zip(&restored.cells) {
            assert_eq!(a.trace.rounds.len(), b.trace.rounds.len());
            for (ra, rb) in a.trace.rounds.iter().zip(&b.trace.rounds) {
                assert_eq!(ra.round, rb.round);
                assert_eq!(ra.targets, rb.targets);
                assert_eq!(ra.giant_damage, rb.giant_damage);
                assert_eq!(ra.blackout_damage, rb.blackout_damage);
                let mut la = ra.cascade_lost.clone();
                let mut lb = rb.cascade_lost.clone();
                la.sort();
                lb.sort();
                assert_eq!(la, lb);
            }
        }

        // aggregations agree between the live and restored batches
        let live = crate::experiments::damage_curves(&batch, 0).unwrap();
        let restored_curves = crate::experiments::damage_curves(&restored, 0).unwrap();
        assert_eq!(live.blackout_mean, restored_curves.blackout_mean);

        // reports are writable from the restored store
        let report_dir = tempfile::tempdir().unwrap();
        write_report(report_dir.path(), &config2, &restored).unwrap();
        assert!(report_dir.path().join("curves.csv").exists());
        assert!(report_dir.path().join("summary.txt").exists());
    }

    #[test]
    fn tampering_is_detected() {
        let grid = synth_grid(
            &SynthSpec::new(20, 6).with_planting(LimitPlanting::Alpha(2.0)),
        )
        .unwrap();
        let methods = vec![crate::limits::real_limits(&grid).unwrap()];
        let plans = vec![crate::strategies::AttackPlan::new(Strategy::Random)];
        let batch = run_batch(&grid, methods, plans, 1, 1, Execution::Sequential).unwrap();
        let flows = crate::dcflow::initial_flows(&grid).unwrap();
        let (a, l) = crate::experiments::initial_loading(&batch.methods[0], &flows).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let mut config = RunConfig::new("n.csv", "e.csv");
        config.sims = 1;
        config.seed = 1;
        config.method_loading = Some(vec![MethodLoading {
            method: "real".into(),
            initial_alpha: Some(a),
            initial_load: Some(l),
        }]);
        write_store(dir.path(), &config, &batch).unwrap();

        // flip a byte in traces.csv
        let path = dir.path().join(TRACES_FILE);
        let mut bytes = fs::read(&path).unwrap();
        let last = bytes.len() - 2;
        bytes[last] = if bytes[last] == b'0' { b'1' } else { b'0' };
        fs::write(&path, bytes).unwrap();
        assert!(matches!(
            read_store(dir.path()),
            Err(ExperimentError::Checksum { .. })
        ));
    }

    #[test]
    fn unknown_config_keys_rejected() {
        let json = r#"{"grid":{"nodes":"n","edges":"e"},"sims":1,"seed":0,"bogus":1}"#;
        assert!(serde_json::from_str::<RunConfig>(json).is_err());
    }

    #[test]
    fn topological_physics_restricts_methods() {
        let mut config = RunConfig::new("n", "e");
        config.pearl.physics = Physics::Topological;
        assert!(config.validate().is_err());
        config.limit_methods = LimitMethodsConfig {
            real: false,
            alphas: vec![],
            volt_pf: false,
            pf: false,
            topological: true,
            model_folds: 10,
        };
        assert!(config.validate().is_ok());
    }
}
