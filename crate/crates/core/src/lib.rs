//! Cascading-failure simulation for power transmission grids.
//!
//! The crate models a grid as buses (substations) and lines with electrical
//! attributes, solves linearized DC load flow per energized island, and
//! simulates targeted node-removal attacks in which overloaded lines trip,
//! power is rebalanced, and unpowered islands are shed. Line limits can be
//! taken from data (`Real`), generated by proportional loading (`Pl`),
//! predicted by linear models (`VoltPf`, `Pf`), or disabled (`Topological`),
//! and batches of seeded Monte Carlo attacks compare how each artificial
//! limit method tracks the real one.
//!
//! Modules follow the pipeline:
//!
//! - [`grid`]: data model, CSV ingestion/serialization, validation, and
//!   synthetic-grid generation with planted ground-truth limits.
//! - [`dcflow`]: per-component DC load-flow solve `f = CA(A^T CA)^{-1} p`.
//! - [`limits`]: limit-set construction, OLS limit models with k-fold
//!   cross-validation, and accuracy scoring.
//! - [`cascade`]: the attack engine (remove, trip, rebalance, island).
//! - [`strategies`]: node-ranking attack strategies and removal schedules.
//! - [`experiments`]: seeded batch runner, damage curves, loss-order
//!   correlation, strategy rank tables, and true-alpha estimation.
//!
//! Batch cells are independent and run on rayon when the `parallel` feature
//! (default) is enabled; per-cell seeding keeps results identical in both
//! modes.

pub mod cascade;
pub mod dcflow;
pub mod experiments;
pub mod grid;
pub mod limits;
pub mod stats;
pub mod strategies;

mod graphops;
mod seeding;

pub use cascade::{attack_the_grid, Physics, RoundRecord, SimulationTrace};
pub use dcflow::{solve_flows, FlowState};
pub use grid::{Bus, Line, PowerGrid, TopologyStats, VoltageClass};
pub use limits::{LimitMethod, LimitSet};

/// Version string recorded in batch configs so result stores can be tied to
/// the code that produced them.
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");
