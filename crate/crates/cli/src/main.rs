//! Command-line front end: grid synthesis, limit fitting, attack batches,
//! and report aggregation.
//!
//! Exit codes: 0 on success, 2 on validation or configuration errors,
//! 3 on numerical (flow-solve) errors.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use gridfall::cascade::Physics;
use gridfall::experiments::store::{
    execute_config, read_store, write_report, write_store, RunConfig,
};
use gridfall::experiments::Execution;
use gridfall::grid::synth::{synth_grid, LimitPlanting, SynthSpec};
use gridfall::grid::{load_grid, save_grid};
use gridfall::limits::{self, LinearLimitModel};
use gridfall::strategies::Strategy;

#[derive(Parser)]
#[command(
    name = "gridfall",
    version,
    about = "Cascading-failure simulation on power grids with configurable line-limit methods"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic grid and write its nodes/edges CSV files.
    Synth(SynthArgs),
    /// Fit artificial line limits and score them against the real ones.
    FitLimits(FitArgs),
    /// Run a seeded Monte Carlo attack batch and write a result store.
    Simulate(SimulateArgs),
    /// Aggregate a result store into curves, correlations, ranks and
    /// alpha-trace CSVs plus a text summary. Never re-simulates.
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output path for the nodes CSV.
    #[arg(long)]
    nodes_out: PathBuf,
    /// Output path for the edges CSV.
    #[arg(long)]
    edges_out: PathBuf,
    #[arg(long, default_value_t = 512)]
    nodes: usize,
    /// Line count (default keeps mean degree near 2.73).
    #[arg(long)]
    edges: Option<usize>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Plant real limits at alpha times the initial flow.
    #[arg(long, conflicts_with = "plant_model")]
    plant_alpha: Option<f64>,
    /// Plant real limits from a linear model "bias,flow,v275,v400"
    /// (coefficients in thousands of MW).
    #[arg(long, value_name = "B0,BF,B275,B400")]
    plant_model: Option<String>,
}

#[derive(Args)]
struct GridArgs {
    /// Nodes CSV (header: id,demand_mw,generation_mw).
    #[arg(long)]
    grid_nodes: PathBuf,
    /// Edges CSV (header: id,from,to,susceptance|reactance[,voltage_kv][,limit_mw]).
    #[arg(long)]
    grid_edges: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Output directory for limit sets and accuracy reports.
    #[arg(long)]
    out: PathBuf,
    /// Proportional-loading tolerances to evaluate.
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SimulateArgs {
    /// Batch configuration JSON; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    grid_nodes: Option<PathBuf>,
    #[arg(long)]
    grid_edges: Option<PathBuf>,
    /// Output directory for the result store.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    sims: Option<u64>,
    /// Proportional-loading tolerances to simulate.
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    /// Attack strategies (random, degree, betweenness,
    /// electrical_centrality, entropic_degree_limit, entropic_degree_flow).
    #[arg(long, value_delimiter = ',')]
    strategies: Option<Vec<String>>,
    /// Physics model: dc or topological.
    #[arg(long)]
    physics: Option<String>,
    /// Run batch cells on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Result store directory written by `simulate`.
    #[arg(long)]
    results: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}

/// 3 for numerical (flow-solve) failures, 2 for everything else.
fn classify(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<gridfall::dcflow::DcFlowError>().is_some() {
            return 3;
        }
    }
    2
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Synth(args) => cmd_synth(args),
        Command::FitLimits(args) => cmd_fit_limits(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let mut spec = SynthSpec::new(args.nodes, args.seed);
    spec.edges = args.edges;
    if let Some(alpha) = args.plant_alpha {
        spec.planting = LimitPlanting::Alpha(alpha);
    } else if let Some(raw) = &args.plant_model {
        let parts: Vec<f64> = raw
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .with_context(|| format!("cannot parse model coefficients from {raw:?}"))?;
        if parts.len() != 4 {
            bail!("--plant-model expects 4 coefficients, got {}", parts.len());
        }
        spec.planting = LimitPlanting::Model(LinearLimitModel {
            bias: parts[0],
            flow_coeff: parts[1],
            v275: Some(parts[2]),
            v400: Some(parts[3]),
        });
    }
    let grid = synth_grid(&spec)?;
    save_grid(&grid, &args.nodes_out, &args.edges_out)?;
    let stats = grid.topology_stats();
    eprintln!(
        "wrote {} buses, {} lines (mean degree {:.3}, mean distance {:.2})",
        stats.node_count, stats.edge_count, stats.mean_degree, stats.mean_unweighted_distance
    );
    Ok(())
}

fn cmd_fit_limits(args: FitArgs) -> Result<()> {
    let grid = load_grid(&args.grid.grid_nodes, &args.grid.grid_edges)?;
    let flows = gridfall::dcflow::initial_flows(&grid)?;
    let real = limits::real_limits(&grid)?;
    std::fs::create_dir_all(&args.out)?;

    let alphas = args
        .alphas
        .unwrap_or_else(|| limits::DEFAULT_ALPHA_GRID.to_vec());
    for &alpha in &alphas {
        if alpha.is_nan() || alpha <= 0.0 {
            bail!(
                "invalid argument: {}",
                limits::LimitError::BadAlpha(alpha)
            );
        }
    }

    let mut sets = vec![real.clone()];
    for &alpha in &alphas {
        sets.push(limits::proportional_limits(&grid, &flows, alpha)?);
    }
    let volt_fit = limits::fit_linear_model(&grid, &flows, &real, true, args.folds, args.seed)?;
    let pf_fit = limits::fit_linear_model(&grid, &flows, &real, false, args.folds, args.seed)?;
    sets.push(volt_fit.predicted.clone());
    sets.push(pf_fit.predicted.clone());

    for set in &sets {
        let label = set.method.label();
        let mut writer =
            csv::WriterBuilder::new().from_path(args.out.join(format!("limits_{label}.csv")))?;
        writer.write_record(["line_id", "limit_mw", "method"])?;
        for (line, limit) in grid.lines().iter().zip(&set.limits) {
            writer.write_record([line.id.as_str(), &limit.to_string(), &label])?;
        }
        writer.flush()?;
        if set.method != limits::LimitMethod::Real {
            let report = limits::score_limits(set, &real)?;
            std::fs::write(
                args.out.join(format!("accuracy_{label}.json")),
                serde_json::to_vec_pretty(&report)?,
            )?;
        }
    }

    // per-fold model coefficients for both fits
    for (name, fit) in [("volt_pf", &volt_fit), ("pf", &pf_fit)] {
        std::fs::write(
            args.out.join(format!("model_{name}.json")),
            serde_json::to_vec_pretty(&fit.fold_models)?,
        )?;
    }

    let dist = limits::alpha_distribution(&real, &flows, 20);
    std::fs::write(
        args.out.join("alpha_distribution.json"),
        serde_json::to_vec_pretty(&dist)?,
    )?;
    eprintln!(
        "fit {} limit sets; real-limit loading: mean alpha {:.3}, median {:.3}",
        sets.len(),
        dist.mean,
        dist.median
    );
    Ok(())
}

fn parse_strategies(names: &[String]) -> Result<Vec<Strategy>> {
    names
        .iter()
        .map(|name| match name.as_str() {
            "random" => Ok(Strategy::Random),
            "degree" => Ok(Strategy::Degree),
            "betweenness" => Ok(Strategy::Betweenness),
            "electrical_centrality" => Ok(Strategy::ElectricalCentrality),
            "entropic_degree_limit" => Ok(Strategy::EntropicDegreeLimit),
            "entropic_degree_flow" => Ok(Strategy::EntropicDegreeFlow),
            other => bail!("unknown strategy {other:?}"),
        })
        .collect()
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let mut config: RunConfig = match &args.config {
        Some(path) => serde_json::from_slice(
            &std::fs::read(path).with_context(|| format!("reading {}", path.display()))?,
        )
        .with_context(|| format!("parsing {}", path.display()))?,
        None => {
            let (Some(nodes), Some(edges)) = (&args.grid_nodes, &args.grid_edges) else {
                bail!("either --config or both --grid-nodes and --grid-edges are required");
            };
            RunConfig::new(nodes.display().to_string(), edges.display().to_string())
        }
    };

    // flags override the config file
    if let Some(nodes) = &args.grid_nodes {
        config.grid.nodes = nodes.display().to_string();
        config.grid.nodes_sha256 = None;
    }
    if let Some(edges) = &args.grid_edges {
        config.grid.edges = edges.display().to_string();
        config.grid.edges_sha256 = None;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(sims) = args.sims {
        config.sims = sims;
    }
    if let Some(alphas) = &args.alphas {
        config.limit_methods.alphas = alphas.clone();
    }
    if let Some(names) = &args.strategies {
        config.strategies = parse_strategies(names)?;
    }
    match args.physics.as_deref() {
        None => {}
        Some("dc") => config.pearl.physics = Physics::CascadingDc,
        Some("topological") => {
            config.pearl.physics = Physics::Topological;
            config.limit_methods.real = false;
            config.limit_methods.volt_pf = false;
            config.limit_methods.pf = false;
            config.limit_methods.alphas.clear();
            config.limit_methods.topological = true;
        }
        Some(other) => bail!("unknown physics {other:?} (expected dc or topological)"),
    }
    config.validate()?;

    let exec = if args.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let (config, batch) = execute_config(&config, exec, |cell| {
        eprintln!(
            "  done method_idx={} plan={} sim={} rounds={}",
            cell.method,
            cell.plan,
            cell.sim,
            cell.trace.rounds.len()
        );
    })?;
    write_store(&args.out, &config, &batch)?;
    eprintln!("store written to {}", args.out.display());
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let (config, batch) = read_store(&args.results)?;
    write_report(&args.results, &config, &batch)?;
    eprintln!("report written to {}", args.results.display());
    Ok(())
}
