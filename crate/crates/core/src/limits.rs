//! Line-limit construction and scoring.
//!
//! A [`LimitSet`] assigns one MW limit to every line. Besides the limits
//! recorded in the data (`Real`), limits can be generated by proportional
//! loading (`Pl`: alpha times the initial absolute flow), predicted by
//! linear models on initial flow and voltage class (`VoltPf`, `Pf`), or
//! disabled entirely (`Topological`, the alpha-to-infinity case: lines never
//! trip).
//!
//! The linear models are fit by ordinary least squares under k-fold
//! cross-validation; every line's predicted limit comes from the fold in
//! which it was held out. Regressor and response are expressed in thousands
//! of MW, so coefficients stay comparable across grids of different scale.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dcflow::FlowState;
use crate::grid::{PowerGrid, VoltageClass};
use crate::seeding::subrng;
use crate::stats;

/// Lines with |initial flow| below this are treated as carrying no flow.
pub const ZERO_FLOW_MW: f64 = 1e-9;
/// Floor applied to proportional and model limits so a zero-flow line never
/// receives a limit of 0 and trips spuriously.
pub const LIMIT_FLOOR_MW: f64 = 1.0;
/// Design-matrix condition estimate above which a warning is logged.
pub const CONDITION_WARN: f64 = 1e10;

/// The default sweep of proportional-loading tolerance values.
pub const DEFAULT_ALPHA_GRID: [f64; 13] = [
    1.05, 1.1, 1.2, 1.3, 1.5, 2.0, 3.0, 5.0, 7.0, 10.0, 15.0, 20.0, 50.0,
];

#[derive(Debug, Error)]
pub enum LimitError {
    #[error("alpha must be positive, got {0}")]
    BadAlpha(f64),
    #[error("line {0} has no real limit")]
    MissingRealLimit(String),
    #[error("need at least 2 folds, got {0}")]
    BadFolds(usize),
    #[error("fold {fold}: design matrix is rank deficient beyond indicator dropping")]
    RankDeficient { fold: usize },
    #[error("limit sets cover different line counts ({0} vs {1})")]
    Mismatch(usize, usize),
    #[error("real limit of line index {0} is not positive; MAPE undefined")]
    ZeroRealLimit(usize),
    #[error("flow state covers {got} lines, grid has {expected}")]
    FlowCount { got: usize, expected: usize },
}

/// How a limit set was produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitMethod {
    Real,
    Pl(f64),
    VoltPf,
    Pf,
    Topological,
}

impl LimitMethod {
    /// Stable label used in CSV columns and file names.
    pub fn label(&self) -> String {
        match self {
            LimitMethod::Real => "real".to_string(),
            LimitMethod::Pl(a) => format!("pl_{a}"),
            LimitMethod::VoltPf => "volt_pf".to_string(),
            LimitMethod::Pf => "pf".to_string(),
            LimitMethod::Topological => "topological".to_string(),
        }
    }
}

impl fmt::Display for LimitMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

/// One MW limit per line, aligned with the grid's line indexing.
/// `Topological` sets carry `f64::INFINITY`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitSet {
    pub method: LimitMethod,
    pub limits: Vec<f64>,
}

impl LimitSet {
    pub fn is_unbounded(&self) -> bool {
        self.limits.iter().any(|l| l.is_infinite())
    }
}

/// Proportional loading: limit_i = alpha * |f_i| of the initial flow, with
/// zero-flow lines floored at `max(alpha * 1 MW, 1 MW)`.
pub fn proportional_limits(
    grid: &PowerGrid,
    initial_flows: &FlowState,
    alpha: f64,
) -> Result<LimitSet, LimitError> {
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(LimitError::BadAlpha(alpha));
    }
    if initial_flows.flows.len() != grid.line_count() {
        return Err(LimitError::FlowCount {
            got: initial_flows.flows.len(),
            expected: grid.line_count(),
        });
    }
    let limits = initial_flows
        .flows
        .iter()
        .map(|f| {
            let mag = f.abs();
            if mag < ZERO_FLOW_MW {
                (alpha * LIMIT_FLOOR_MW).max(LIMIT_FLOOR_MW)
            } else {
                alpha * mag
            }
        })
        .collect();
    Ok(LimitSet {
        method: LimitMethod::Pl(alpha),
        limits,
    })
}

/// The alpha-to-infinity case: no line ever trips.
pub fn topological_limits(grid: &PowerGrid) -> LimitSet {
    LimitSet {
        method: LimitMethod::Topological,
        limits: vec![f64::INFINITY; grid.line_count()],
    }
}

/// The limits recorded in the data; errors if any line lacks one.
pub fn real_limits(grid: &PowerGrid) -> Result<LimitSet, LimitError> {
    let mut limits = Vec::with_capacity(grid.line_count());
    for line in grid.lines() {
        limits.push(
            line.real_limit
                .ok_or_else(|| LimitError::MissingRealLimit(line.id.clone()))?,
        );
    }
    Ok(LimitSet {
        method: LimitMethod::Real,
        limits,
    })
}

/// Linear limit model in thousands of MW: prediction = bias + flow_coeff *
/// x_flow + v275 * 1[275 kV] + v400 * 1[400 kV], where x_flow is the initial
/// absolute flow in thousands of MW. Indicator coefficients are `None` for
/// the flow-only model or when a fold's training data made one collinear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearLimitModel {
    pub bias: f64,
    pub flow_coeff: f64,
    pub v275: Option<f64>,
    pub v400: Option<f64>,
}

impl LinearLimitModel {
    /// Predicted limit in MW (evaluated in thousands of MW, then converted),
    /// floored at [`LIMIT_FLOOR_MW`].
    pub fn predict_mw(&self, flow_mw: f64, class: VoltageClass) -> f64 {
        let mut y = self.bias + self.flow_coeff * (flow_mw.abs() / 1000.0);
        if class == VoltageClass::V275 {
            y += self.v275.unwrap_or(0.0);
        }
        if class == VoltageClass::V400 {
            y += self.v400.unwrap_or(0.0);
        }
        (y * 1000.0).max(LIMIT_FLOOR_MW)
    }
}

/// Cross-validated fit: the per-fold models, the out-of-fold predicted limit
/// set, and each line's fold assignment.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub fold_models: Vec<LinearLimitModel>,
    pub predicted: LimitSet,
    pub fold_of_line: Vec<usize>,
}

/// Fits the voltage-and-flow or flow-only limit model with seeded k-fold
/// cross-validation. Every line's prediction comes from the model of the
/// fold that held it out.
pub fn fit_linear_model(
    grid: &PowerGrid,
    initial_flows: &FlowState,
    real: &LimitSet,
    use_voltage: bool,
    folds: usize,
    seed: u64,
) -> Result<FitResult, LimitError> {
    let n = grid.line_count();
    if folds < 2 || folds > n {
        return Err(LimitError::BadFolds(folds));
    }
    if initial_flows.flows.len() != n {
        return Err(LimitError::FlowCount {
            got: initial_flows.flows.len(),
            expected: n,
        });
    }
    if real.limits.len() != n {
        return Err(LimitError::Mismatch(real.limits.len(), n));
    }

    // seeded line-level fold assignment
    let mut order: Vec<usize> = (0..n).collect();
    use rand::seq::SliceRandom;
    order.shuffle(&mut subrng(seed, "limit-model-folds", &[folds as u64]));
    let mut fold_of_line = vec![0usize; n];
    for (pos, &line) in order.iter().enumerate() {
        fold_of_line[line] = pos % folds;
    }

    // regressors in thousands of MW
    let x_flow: Vec<f64> = initial_flows.flows.iter().map(|f| f.abs() / 1000.0).collect();
    let y: Vec<f64> = real.limits.iter().map(|l| l / 1000.0).collect();

    let mut fold_models = Vec::with_capacity(folds);
    let mut predicted = vec![0.0f64; n];
    for fold in 0..folds {
        let train: Vec<usize> = (0..n).filter(|&i| fold_of_line[i] != fold).collect();
        let model = ols_fit(grid, &x_flow, &y, &train, use_voltage, fold)?;
        for i in 0..n {
            if fold_of_line[i] == fold {
                predicted[i] =
                    model.predict_mw(initial_flows.flows[i], grid.line(i).voltage_class);
            }
        }
        fold_models.push(model);
    }

    Ok(FitResult {
        fold_models,
        predicted: LimitSet {
            method: if use_voltage {
                LimitMethod::VoltPf
            } else {
                LimitMethod::Pf
            },
            limits: predicted,
        },
        fold_of_line,
    })
}

fn ols_fit(
    grid: &PowerGrid,
    x_flow: &[f64],
    y: &[f64],
    train: &[usize],
    use_voltage: bool,
    fold: usize,
) -> Result<LinearLimitModel, LimitError> {
    // columns: intercept, flow, then voltage indicators that vary in the
    // training set; constant indicators are collinear and get dropped
    let mut use_v275 = false;
    let mut use_v400 = false;
    if use_voltage {
        let n275 = train
            .iter()
            .filter(|&&i| grid.line(i).voltage_class == VoltageClass::V275)
            .count();
        let n400 = train
            .iter()
            .filter(|&&i| grid.line(i).voltage_class == VoltageClass::V400)
            .count();
        use_v275 = n275 > 0 && n275 < train.len();
        use_v400 = n400 > 0 && n400 < train.len();
        if (n275 > 0 && !use_v275) || (n400 > 0 && !use_v400) {
            log::warn!("fold {fold}: voltage indicator constant in training set, dropped");
        }
    }
    let k = 2 + use_v275 as usize + use_v400 as usize;
    let mut design = DMatrix::zeros(train.len(), k);
    let mut response = DVector::zeros(train.len());
    for (row, &i) in train.iter().enumerate() {
        design[(row, 0)] = 1.0;
        design[(row, 1)] = x_flow[i];
        let mut col = 2;
        if use_v275 {
            design[(row, col)] = (grid.line(i).voltage_class == VoltageClass::V275) as u8 as f64;
            col += 1;
        }
        if use_v400 {
            design[(row, col)] = (grid.line(i).voltage_class == VoltageClass::V400) as u8 as f64;
        }
        response[row] = y[i];
    }

    let xtx = design.transpose() * &design;
    let xty = design.transpose() * response;

    // condition estimate from the normal-equation eigenvalues
    let eigen = xtx.clone().symmetric_eigen();
    let max_ev = eigen.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let min_ev = eigen
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if min_ev > 0.0 && max_ev / min_ev > CONDITION_WARN {
        log::warn!(
            "fold {fold}: normal equations condition estimate {:.3e} above {CONDITION_WARN:e}",
            max_ev / min_ev
        );
    }

    let beta = xtx
        .cholesky()
        .ok_or(LimitError::RankDeficient { fold })?
        .solve(&xty);

    let mut col = 2;
    let v275 = if use_v275 {
        let v = beta[col];
        col += 1;
        Some(v)
    } else {
        None
    };
    let v400 = if use_v400 { Some(beta[col]) } else { None };
    Ok(LinearLimitModel {
        bias: beta[0],
        flow_coeff: beta[1],
        v275,
        v400,
    })
}

/// Accuracy of a predicted limit set against the real one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub r_squared: f64,
    /// Root mean square error in MW.
    pub rmse: f64,
    /// Mean |real - predicted| / real, as a fraction.
    pub mape: f64,
}

/// Scores predicted limits against real ones with R^2, RMSE and MAPE.
pub fn score_limits(predicted: &LimitSet, real: &LimitSet) -> Result<AccuracyReport, LimitError> {
    if predicted.limits.len() != real.limits.len() {
        return Err(LimitError::Mismatch(
            predicted.limits.len(),
            real.limits.len(),
        ));
    }
    if let Some(idx) = real.limits.iter().position(|&l| l <= 0.0) {
        return Err(LimitError::ZeroRealLimit(idx));
    }
    let n = real.limits.len() as f64;
    let mean_real = stats::mean(&real.limits);
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    let mut ape = 0.0;
    for (&p, &r) in predicted.limits.iter().zip(&real.limits) {
        ss_res += (r - p) * (r - p);
        ss_tot += (r - mean_real) * (r - mean_real);
        ape += (r - p).abs() / r;
    }
    let r_squared = if ss_tot == 0.0 {
        if ss_res == 0.0 {
            1.0
        } else {
            f64::NEG_INFINITY
        }
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(AccuracyReport {
        r_squared,
        rmse: (ss_res / n).sqrt(),
        mape: ape / n,
    })
}

/// Distribution of the per-line loading tolerance alpha_i = limit_i / |f_i|.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaDistribution {
    /// Per line: the tolerance, or `None` for zero-flow lines.
    pub per_line: Vec<Option<f64>>,
    pub mean: f64,
    pub median: f64,
    /// `(bin_low, bin_high, count)` over the observed range.
    pub histogram: Vec<(f64, f64, usize)>,
    /// Lines excluded because they carry no measurable initial flow.
    pub zero_flow_lines: usize,
}

/// Summarizes limit_i / |f_i| over lines with measurable initial flow.
pub fn alpha_distribution(
    real: &LimitSet,
    initial_flows: &FlowState,
    bins: usize,
) -> AlphaDistribution {
    let mut per_line = Vec::with_capacity(real.limits.len());
    let mut values = Vec::new();
    let mut zero_flow = 0usize;
    for (&limit, &flow) in real.limits.iter().zip(&initial_flows.flows) {
        let mag = flow.abs();
        if mag < ZERO_FLOW_MW {
            zero_flow += 1;
            per_line.push(None);
        } else {
            let a = limit / mag;
            values.push(a);
            per_line.push(Some(a));
        }
    }
    values.sort_by(f64::total_cmp);
    let mean = stats::mean(&values);
    let median = if values.is_empty() {
        0.0
    } else if values.len() % 2 == 1 {
        values[values.len() / 2]
    } else {
        (values[values.len() / 2 - 1] + values[values.len() / 2]) / 2.0
    };
    let histogram = if values.is_empty() || bins == 0 {
        Vec::new()
    } else {
        let lo = values[0];
        let hi = values[values.len() - 1];
        let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
        let mut counts = vec![0usize; bins];
        for &v in &values {
            let b = (((v - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        counts
            .into_iter()
            .enumerate()
            .map(|(i, c)| (lo + i as f64 * width, lo + (i + 1) as f64 * width, c))
            .collect()
    };
    AlphaDistribution {
        per_line,
        mean,
        median,
        histogram,
        zero_flow_lines: zero_flow,
    }
}
