//! Monte Carlo attack batches and the comparison analyses built on them:
//! damage curves, node-loss-order correlation, attack-strategy rank tables,
//! and estimation of the system's true loading tolerance.
//!
//! A batch is a grid of independent cells (limit method x plan x simulation).
//! Removal orders are derived from `(seed, plan, sim)` only, so every limit
//! method replays the identical orders (the paired design) and reruns are
//! bit-identical regardless of thread count. Cells execute on rayon when the
//! `parallel` feature is enabled and `Execution::Parallel` is requested.

pub mod store;

use serde::Serialize;
use thiserror::Error;

use crate::cascade::{self, CascadeError, Physics, SimulationTrace};
use crate::dcflow::{self, DcFlowError, FlowState};
use crate::grid::{GridError, PowerGrid};
use crate::limits::{self, LimitError, LimitMethod, LimitSet, ZERO_FLOW_MW};
use crate::seeding::subrng;
use crate::stats;
use crate::strategies::{
    AdaptiveSelector, AttackPlan, AttackType, ScheduledSelector, Strategy, StrategyError,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Flow(#[from] DcFlowError),
    #[error(transparent)]
    Limit(#[from] LimitError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error("cell method={method} plan={plan} sim={sim}: {source}")]
    Cell {
        method: String,
        plan: usize,
        sim: u64,
        #[source]
        source: CascadeError,
    },
    #[error("batch contains no real-limit cells")]
    MissingReal,
    #[error("alpha traces are undefined for unbounded ({0}) limits")]
    UnboundedAlpha(LimitMethod),
    #[error("need at least {need} {what}, got {got}")]
    TooFew {
        what: &'static str,
        need: usize,
        got: usize,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{file}: checksum mismatch (store was modified after writing)")]
    Checksum { file: String },
    #[error("result store: {0}")]
    BadStore(String),
}

/// How batch cells are executed. `Parallel` falls back to sequential when
/// the crate is built without the `parallel` feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

fn run_indexed<T, F>(n: usize, exec: Execution, job: F) -> Result<Vec<T>, ExperimentError>
where
    T: Send,
    F: Fn(usize) -> Result<T, ExperimentError> + Sync + Send,
{
    match exec {
        Execution::Sequential => (0..n).map(job).collect(),
        Execution::Parallel => {
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(job).collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                (0..n).map(job).collect()
            }
        }
    }
}

/// One finished simulation cell.
#[derive(Debug, Clone)]
pub struct CellTrace {
    pub method: usize,
    pub plan: usize,
    pub sim: u64,
    pub trace: SimulationTrace,
}

/// All traces of one batch, ordered by (method, plan, sim).
#[derive(Debug, Clone)]
pub struct BatchResult {
    pub methods: Vec<LimitSet>,
    pub plans: Vec<AttackPlan>,
    pub n_sims: u64,
    pub seed: u64,
    pub cells: Vec<CellTrace>,
    /// Base removal orders per (plan, sim) as node ids; empty for adaptive
    /// plans, whose order emerges during the run.
    pub orders: Vec<Vec<Vec<String>>>,
}

impl BatchResult {
    pub fn cell(&self, method: usize, plan: usize, sim: u64) -> &CellTrace {
        let idx = (method * self.plans.len() + plan) * self.n_sims as usize + sim as usize;
        &self.cells[idx]
    }

    pub fn method_index(&self, method: &LimitMethod) -> Option<usize> {
        self.methods.iter().position(|m| &m.method == method)
    }

    fn real_index(&self) -> Result<usize, ExperimentError> {
        self.method_index(&LimitMethod::Real)
            .ok_or(ExperimentError::MissingReal)
    }
}

fn physics_for(method: &LimitMethod) -> Physics {
    match method {
        LimitMethod::Topological => Physics::Topological,
        _ => Physics::CascadingDc,
    }
}

/// Runs `n_sims` seeded attacks for every limit method under every plan.
///
/// Orders for non-adaptive plans are precomputed once per (plan, sim): the
/// random strategy reshuffles per sim, deterministic strategies rank the
/// intact grid once (flow- and limit-weighted strategies read the initial
/// flows and the grid's real limits). Every method then replays the same
/// orders.
pub fn run_batch(
    grid: &PowerGrid,
    methods: Vec<LimitSet>,
    plans: Vec<AttackPlan>,
    n_sims: u64,
    seed: u64,
    exec: Execution,
) -> Result<BatchResult, ExperimentError> {
    run_batch_with_progress(grid, methods, plans, n_sims, seed, exec, |_| {})
}

/// [`run_batch`] with a per-cell completion callback (called from worker
/// threads, in completion order).
pub fn run_batch_with_progress(
    grid: &PowerGrid,
    methods: Vec<LimitSet>,
    plans: Vec<AttackPlan>,
    n_sims: u64,
    seed: u64,
    exec: Execution,
    progress: impl Fn(&CellTrace) + Sync + Send,
) -> Result<BatchResult, ExperimentError> {
    if n_sims == 0 {
        return Err(ExperimentError::TooFew {
            what: "simulations",
            need: 1,
            got: 0,
        });
    }
    let flows = dcflow::initial_flows(grid)?;
    let weight_limits = limits::real_limits(grid).ok();

    // base orders per (plan, sim), shared by every method
    let mut orders: Vec<Vec<Vec<usize>>> = Vec::with_capacity(plans.len());
    for (p, plan) in plans.iter().enumerate() {
        plan.validate(grid.bus_count())?;
        let mut per_sim = Vec::with_capacity(n_sims as usize);
        if plan.attack_type == AttackType::Adaptive {
            orders.push(per_sim);
            continue;
        }
        match plan.strategy {
            Strategy::Random => {
                for k in 0..n_sims {
                    let mut rng = subrng(seed, "order", &[p as u64, k]);
                    per_sim.push(crate::strategies::rank_indices(
                        grid,
                        &vec![true; grid.bus_count()],
                        &vec![true; grid.line_count()],
                        Some(&flows.flows),
                        weight_limits.as_ref().map(|l| l.limits.as_slice()),
                        plan.strategy,
                        &mut rng,
                    )?);
                }
            }
            _ => {
                let mut rng = subrng(seed, "order", &[p as u64]);
                let order = crate::strategies::rank_indices(
                    grid,
                    &vec![true; grid.bus_count()],
                    &vec![true; grid.line_count()],
                    Some(&flows.flows),
                    weight_limits.as_ref().map(|l| l.limits.as_slice()),
                    plan.strategy,
                    &mut rng,
                )?;
                per_sim = vec![order; n_sims as usize];
            }
        }
        orders.push(per_sim);
    }

    let n_cells = methods.len() * plans.len() * n_sims as usize;
    let cells = run_indexed(n_cells, exec, |idx| {
        let sim = (idx % n_sims as usize) as u64;
        let rest = idx / n_sims as usize;
        let plan_idx = rest % plans.len();
        let method_idx = rest / plans.len();
        let plan = &plans[plan_idx];
        let method = &methods[method_idx];
        let physics = physics_for(&method.method);

        let mut selector: Box<dyn cascade::TargetSelector> = if plan.attack_type
            == AttackType::Adaptive
        {
            Box::new(AdaptiveSelector::new(
                plan.strategy,
                weight_limits.as_ref().map(|l| l.limits.clone()),
                plan.regime,
                seed ^ ((plan_idx as u64) << 32) ^ sim,
                plan.budget,
            ))
        } else {
            Box::new(ScheduledSelector::new(
                orders[plan_idx][sim as usize].clone(),
                plan.attack_type,
                plan.regime,
                plan.budget,
            ))
        };
        let trace = cascade::attack_with_selector(grid, method, selector.as_mut(), physics)
            .map_err(|source| ExperimentError::Cell {
                method: method.method.label(),
                plan: plan_idx,
                sim,
                source,
            })?;
        let cell = CellTrace {
            method: method_idx,
            plan: plan_idx,
            sim,
            trace,
        };
        progress(&cell);
        Ok(cell)
    })?;

    let orders_ids: Vec<Vec<Vec<String>>> = orders
        .iter()
        .map(|per_sim| {
            per_sim
                .iter()
                .map(|order| order.iter().map(|&b| grid.bus(b).id.clone()).collect())
                .collect()
        })
        .collect();

    Ok(BatchResult {
        methods,
        plans,
        n_sims,
        seed,
        cells,
        orders: orders_ids,
    })
}

/// Mean and standard deviation of both damage metrics per round, per method,
/// over one plan's simulations, plus each method's RMSE against the
/// real-limit mean curve. Traces are aligned by targeted-removal index and
/// padded with damage 1 after collapse.
#[derive(Debug, Clone, Serialize)]
pub struct DamageCurves {
    pub methods: Vec<LimitMethod>,
    pub plan: usize,
    pub rounds: usize,
    pub giant_mean: Vec<Vec<f64>>,
    pub giant_sd: Vec<Vec<f64>>,
    pub blackout_mean: Vec<Vec<f64>>,
    pub blackout_sd: Vec<Vec<f64>>,
    pub rmse_vs_real: Vec<CurveRmse>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CurveRmse {
    pub giant: f64,
    pub blackout: f64,
}

fn padded(values: &[f64], round: usize) -> f64 {
    // round is 1-based; beyond the trace the grid has fully collapsed
    values.get(round - 1).copied().unwrap_or(1.0)
}

pub fn damage_curves(batch: &BatchResult, plan: usize) -> Result<DamageCurves, ExperimentError> {
    let real = batch.real_index()?;
    let rounds = batch
        .cells
        .iter()
        .filter(|c| c.plan == plan)
        .map(|c| c.trace.rounds.len())
        .max()
        .unwrap_or(0);
    let n_methods = batch.methods.len();
    let mut giant_mean = vec![vec![0.0; rounds]; n_methods];
    let mut giant_sd = vec![vec![0.0; rounds]; n_methods];
    let mut blackout_mean = vec![vec![0.0; rounds]; n_methods];
    let mut blackout_sd = vec![vec![0.0; rounds]; n_methods];

    for m in 0..n_methods {
        for r in 1..=rounds {
            let mut giant = Vec::with_capacity(batch.n_sims as usize);
            let mut blackout = Vec::with_capacity(batch.n_sims as usize);
            for k in 0..batch.n_sims {
                let trace = &batch.cell(m, plan, k).trace;
                let g: Vec<f64> = trace.rounds.iter().map(|x| x.giant_damage).collect();
                let b: Vec<f64> = trace.rounds.iter().map(|x| x.blackout_damage).collect();
                giant.push(padded(&g, r));
                blackout.push(padded(&b, r));
            }
            giant_mean[m][r - 1] = stats::mean(&giant);
            giant_sd[m][r - 1] = stats::std_dev(&giant);
            blackout_mean[m][r - 1] = stats::mean(&blackout);
            blackout_sd[m][r - 1] = stats::std_dev(&blackout);
        }
    }

    let rmse_vs_real = (0..n_methods)
        .map(|m| CurveRmse {
            giant: stats::rmse(&giant_mean[m], &giant_mean[real]),
            blackout: stats::rmse(&blackout_mean[m], &blackout_mean[real]),
        })
        .collect();

    Ok(DamageCurves {
        methods: batch.methods.iter().map(|s| s.method).collect(),
        plan,
        rounds,
        giant_mean,
        giant_sd,
        blackout_mean,
        blackout_sd,
        rmse_vs_real,
    })
}

/// Per-simulation Spearman correlation between the rounds in which nodes
/// were lost to cascades under an artificial limit set and under the real
/// one. Nodes targeted in either run are excluded; only nodes cascade-lost
/// in both runs are compared.
#[derive(Debug, Clone, Serialize)]
pub struct LossOrderCorrelation {
    pub method: LimitMethod,
    pub plan: usize,
    /// Per sim: `Some((rho, nodes_compared))`, or `None` when fewer than two
    /// comparable nodes exist or a rank vector is constant.
    pub per_sim: Vec<Option<(f64, usize)>>,
    /// Mean rho over the defined simulations.
    pub mean_rho: f64,
    pub defined: usize,
    pub undefined: usize,
}

pub fn loss_order_correlation(
    batch: &BatchResult,
    plan: usize,
    method: &LimitMethod,
) -> Result<LossOrderCorrelation, ExperimentError> {
    let real = batch.real_index()?;
    let art = batch
        .method_index(method)
        .ok_or_else(|| ExperimentError::BadStore(format!("method {method} not in batch")))?;
    let mut per_sim = Vec::with_capacity(batch.n_sims as usize);
    for k in 0..batch.n_sims {
        let losses_a = batch.cell(art, plan, k).trace.node_losses();
        let losses_r = batch.cell(real, plan, k).trace.node_losses();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (node, a) in &losses_a {
            if a.targeted {
                continue;
            }
            match losses_r.get(node) {
                Some(r) if !r.targeted => {
                    xs.push(a.round as f64);
                    ys.push(r.round as f64);
                }
                _ => {} // targeted in the real run, or never lost there
            }
        }
        per_sim.push(stats::spearman(&xs, &ys).map(|rho| (rho, xs.len())));
    }
    let defined: Vec<f64> = per_sim.iter().flatten().map(|&(rho, _)| rho).collect();
    Ok(LossOrderCorrelation {
        method: *method,
        plan,
        mean_rho: stats::mean(&defined),
        defined: defined.len(),
        undefined: per_sim.len() - defined.len(),
        per_sim,
    })
}

/// Per-round strategy ranks (1 = most cumulative blackout damage, average
/// ranks on ties) for each limit method, and each method's RMSE against the
/// real-limit table.
#[derive(Debug, Clone, Serialize)]
pub struct StrategyRankTable {
    pub methods: Vec<LimitMethod>,
    pub strategies: Vec<Strategy>,
    pub rounds: usize,
    /// `ranks[method][round][strategy]`
    pub ranks: Vec<Vec<Vec<f64>>>,
    pub rmse_vs_real: Vec<f64>,
}

/// Builds the rank table from damage vectors `dmg[method][strategy][round]`.
fn rank_tables(dmg: &[Vec<Vec<f64>>], rounds: usize) -> Vec<Vec<Vec<f64>>> {
    dmg.iter()
        .map(|per_strategy| {
            (1..=rounds)
                .map(|r| {
                    // rank by damage descending: negate and rank ascending
                    let scores: Vec<f64> =
                        per_strategy.iter().map(|d| -padded(d, r)).collect();
                    stats::average_ranks(&scores)
                })
                .collect()
        })
        .collect()
}

/// Runs every deterministic strategy to collapse under every limit method
/// (sequential fixed attacks, shared orders) and compares rank tables.
pub fn strategy_rank_rmse(
    grid: &PowerGrid,
    methods: Vec<LimitSet>,
    strategies: &[Strategy],
    seed: u64,
    exec: Execution,
) -> Result<StrategyRankTable, ExperimentError> {
    let plans: Vec<AttackPlan> = strategies
        .iter()
        .map(|&s| {
            let mut p = AttackPlan::new(s);
            p.seed = seed;
            p
        })
        .collect();
    let batch = run_batch(grid, methods, plans, 1, seed, exec)?;
    strategy_rank_table(&batch)
}

/// Rank-table aggregation over an existing batch whose plans are the
/// strategies (one sim each).
pub fn strategy_rank_table(batch: &BatchResult) -> Result<StrategyRankTable, ExperimentError> {
    let real = batch.real_index()?;
    let strategies: Vec<Strategy> = batch.plans.iter().map(|p| p.strategy).collect();
    if strategies.len() < 2 {
        return Err(ExperimentError::TooFew {
            what: "strategies",
            need: 2,
            got: strategies.len(),
        });
    }
    let n_methods = batch.methods.len();
    let dmg: Vec<Vec<Vec<f64>>> = (0..n_methods)
        .map(|m| {
            (0..batch.plans.len())
                .map(|p| {
                    batch
                        .cell(m, p, 0)
                        .trace
                        .rounds
                        .iter()
                        .map(|r| r.blackout_damage)
                        .collect()
                })
                .collect()
        })
        .collect();
    let rounds = dmg
        .iter()
        .flat_map(|per| per.iter().map(|d| d.len()))
        .max()
        .unwrap_or(0);
    let ranks = rank_tables(&dmg, rounds);
    let rmse_vs_real = (0..n_methods)
        .map(|m| {
            let mut flat_a = Vec::with_capacity(rounds * strategies.len());
            let mut flat_r = Vec::with_capacity(rounds * strategies.len());
            for (per_round_a, per_round_r) in ranks[m].iter().zip(&ranks[real]) {
                flat_a.extend_from_slice(per_round_a);
                flat_r.extend_from_slice(per_round_r);
            }
            stats::rmse(&flat_a, &flat_r)
        })
        .collect();
    Ok(StrategyRankTable {
        methods: batch.methods.iter().map(|s| s.method).collect(),
        strategies,
        rounds,
        ranks,
        rmse_vs_real,
    })
}

/// Evolution of the mean surviving-line tolerance (limit/|flow|) and load
/// level (|flow|/limit) across an attack, averaged over simulations, with
/// the drops from initialization that the true-alpha estimate minimizes.
#[derive(Debug, Clone, Serialize)]
pub struct AlphaTrace {
    pub method: LimitMethod,
    pub initial_alpha: f64,
    pub initial_load: f64,
    /// Per round, mean over the sims that still have measurable lines.
    pub mean_alpha_by_round: Vec<f64>,
    pub mean_load_by_round: Vec<f64>,
    /// Mean over sims of the largest per-sim drop below the initial value.
    pub delta_alpha: f64,
    pub delta_load: f64,
    pub delta_total: f64,
}

/// Initial mean alpha and load level of a limit set over the intact grid.
pub fn initial_loading(
    limit_set: &LimitSet,
    initial_flows: &FlowState,
) -> Result<(f64, f64), ExperimentError> {
    if limit_set.is_unbounded() {
        return Err(ExperimentError::UnboundedAlpha(limit_set.method));
    }
    let mut alphas = Vec::new();
    let mut loads = Vec::new();
    for (&limit, &flow) in limit_set.limits.iter().zip(&initial_flows.flows) {
        let mag = flow.abs();
        if mag >= ZERO_FLOW_MW {
            alphas.push(limit / mag);
            loads.push(mag / limit);
        }
    }
    Ok((stats::mean(&alphas), stats::mean(&loads)))
}

/// Computes the alpha trace of one method over one plan's sims.
pub fn alpha_trace(
    batch: &BatchResult,
    plan: usize,
    method: &LimitMethod,
    initial_alpha: f64,
    initial_load: f64,
) -> Result<AlphaTrace, ExperimentError> {
    if matches!(method, LimitMethod::Topological) {
        return Err(ExperimentError::UnboundedAlpha(*method));
    }
    let m = batch
        .method_index(method)
        .ok_or_else(|| ExperimentError::BadStore(format!("method {method} not in batch")))?;
    let rounds = (0..batch.n_sims)
        .map(|k| batch.cell(m, plan, k).trace.rounds.len())
        .max()
        .unwrap_or(0);

    let mut mean_alpha_by_round = Vec::with_capacity(rounds);
    let mut mean_load_by_round = Vec::with_capacity(rounds);
    for r in 0..rounds {
        let mut alphas = Vec::new();
        let mut loads = Vec::new();
        for k in 0..batch.n_sims {
            if let Some(rec) = batch.cell(m, plan, k).trace.rounds.get(r) {
                if let (Some(a), Some(l)) = (rec.mean_alpha, rec.mean_load_level) {
                    alphas.push(a);
                    loads.push(l);
                }
            }
        }
        if alphas.is_empty() {
            break; // every sim has collapsed past this round
        }
        mean_alpha_by_round.push(stats::mean(&alphas));
        mean_load_by_round.push(stats::mean(&loads));
    }

    // per-sim maximum drop below the initial value, averaged over sims
    let mut drops_alpha = Vec::with_capacity(batch.n_sims as usize);
    let mut drops_load = Vec::with_capacity(batch.n_sims as usize);
    for k in 0..batch.n_sims {
        let trace = &batch.cell(m, plan, k).trace;
        let mut worst_alpha = 0.0f64;
        let mut worst_load = 0.0f64;
        for rec in &trace.rounds {
            if let Some(a) = rec.mean_alpha {
                worst_alpha = worst_alpha.max(initial_alpha - a);
            }
            if let Some(l) = rec.mean_load_level {
                worst_load = worst_load.max(initial_load - l);
            }
        }
        drops_alpha.push(worst_alpha);
        drops_load.push(worst_load);
    }
    let delta_alpha = stats::mean(&drops_alpha);
    let delta_load = stats::mean(&drops_load);
    Ok(AlphaTrace {
        method: *method,
        initial_alpha,
        initial_load,
        mean_alpha_by_round,
        mean_load_by_round,
        delta_alpha,
        delta_load,
        delta_total: delta_alpha + delta_load,
    })
}

/// Result of the true-alpha estimation sweep.
#[derive(Debug, Clone, Serialize)]
pub struct AlphaEstimate {
    pub traces: Vec<AlphaTrace>,
    /// The candidate whose total drop from initialization is smallest.
    pub best_alpha: f64,
}

/// Runs the attack batch under proportional loading at every candidate
/// tolerance and returns the candidate minimizing the summed drop of mean
/// alpha and mean load level from initialization.
pub fn estimate_true_alpha(
    grid: &PowerGrid,
    candidates: &[f64],
    plan: &AttackPlan,
    n_sims: u64,
    seed: u64,
    exec: Execution,
) -> Result<AlphaEstimate, ExperimentError> {
    if candidates.is_empty() {
        return Err(ExperimentError::TooFew {
            what: "candidate alphas",
            need: 1,
            got: 0,
        });
    }
    let flows = dcflow::initial_flows(grid)?;
    let methods: Vec<LimitSet> = candidates
        .iter()
        .map(|&a| limits::proportional_limits(grid, &flows, a))
        .collect::<Result<_, _>>()?;
    let initials: Vec<(f64, f64)> = methods
        .iter()
        .map(|m| initial_loading(m, &flows))
        .collect::<Result<_, _>>()?;
    let batch = run_batch(grid, methods, vec![*plan], n_sims, seed, exec)?;

    let mut traces = Vec::with_capacity(candidates.len());
    for (i, &alpha) in candidates.iter().enumerate() {
        let (ia, il) = initials[i];
        traces.push(alpha_trace(
            &batch,
            0,
            &LimitMethod::Pl(alpha),
            ia,
            il,
        )?);
    }
    let best = traces
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.delta_total.total_cmp(&b.delta_total))
        .map(|(i, _)| candidates[i])
        .expect("non-empty candidates");
    Ok(AlphaEstimate {
        traces,
        best_alpha: best,
    })
}
