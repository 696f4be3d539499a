//! Test-set metrics: RMSE, average operation cost, and the average of the
//! costs strictly above the empirical beta-quantile.

use std::io::Write;

use rayon::prelude::*;
use thiserror::Error;

use crate::data::Dataset;
use crate::dispatch::{DispatchError, ResourceFleet};
use crate::train::{LinearModel, TrainError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("beta {0} must lie in [0, 1)")]
    InvalidBeta(f64),
    #[error("{found} forecasts for {expected} samples")]
    LengthMismatch { found: usize, expected: usize },
    #[error("forecast {y_hat} for sample (day {day}, slot {slot}) is not a number")]
    NonFinite { day: usize, slot: usize, y_hat: f64 },
    #[error("realization {y} kW at (day {day}, slot {slot}) admits no feasible forecast")]
    InfeasibleRealization { day: usize, slot: usize, y: f64 },
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Dispatch(#[from] DispatchError),
    #[error("trace file: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// Root mean squared error of the unclamped forecasts (kW).
    pub rmse: f64,
    /// Mean overall operation cost ($).
    pub avg_cost: f64,
    /// Mean of the costs strictly above `quantile` ($). When no cost exceeds
    /// it, this is the maximum cost and `degenerate` is set.
    pub avg_high_cost: f64,
    pub beta: f64,
    /// The `max(1, ceil(beta N))`-th smallest cost.
    pub quantile: f64,
    pub n: usize,
    pub m_above: usize,
    pub degenerate: bool,
    /// Forecasts moved onto the feasible box before dispatch.
    pub clamped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub day: usize,
    pub slot: usize,
    pub y: f64,
    pub y_hat: f64,
    /// Forecast actually dispatched, after clamping.
    pub y_hat_used: f64,
    pub cost: f64,
}

/// Index into the sorted costs of the empirical beta-quantile.
pub fn quantile_rank(n: usize, beta: f64) -> usize {
    ((beta * n as f64 - 1e-9).ceil() as usize).clamp(1, n) - 1
}

/// Aggregate per-sample costs; `rmse` is filled in by the caller.
pub fn summarize_costs(costs: &[f64], beta: f64) -> Result<MetricsReport, EvalError> {
    if costs.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    if !(0.0..1.0).contains(&beta) {
        return Err(EvalError::InvalidBeta(beta));
    }
    let n = costs.len();
    let mut sorted = costs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let quantile = sorted[quantile_rank(n, beta)];
    let above: Vec<f64> = sorted.iter().copied().filter(|&c| c > quantile).collect();
    let avg_cost = costs.iter().sum::<f64>() / n as f64;
    let (avg_high_cost, degenerate) =
        if above.is_empty() { (sorted[n - 1], true) } else { (above.iter().sum::<f64>() / above.len() as f64, false) };
    Ok(MetricsReport {
        rmse: 0.0,
        avg_cost,
        avg_high_cost,
        beta,
        quantile,
        n,
        m_above: above.len(),
        degenerate,
        clamped: 0,
    })
}

/// Dispatch every forecast against its realization and report the metrics
/// together with the per-sample trace.
pub fn evaluate_forecasts(
    forecasts: &[f64],
    test: &Dataset,
    fleet: &ResourceFleet,
    beta: f64,
) -> Result<(MetricsReport, Vec<TraceRow>), EvalError> {
    if test.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    if forecasts.len() != test.len() {
        return Err(EvalError::LengthMismatch { found: forecasts.len(), expected: test.len() });
    }
    let trace: Vec<TraceRow> = test
        .samples
        .par_iter()
        .zip(forecasts)
        .map(|(s, &y_hat)| {
            if !y_hat.is_finite() {
                return Err(EvalError::NonFinite { day: s.day, slot: s.slot, y_hat });
            }
            let (lo, hi) = fleet.forecast_range(s.y).ok_or(EvalError::InfeasibleRealization {
                day: s.day,
                slot: s.slot,
                y: s.y,
            })?;
            let y_hat_used = y_hat.clamp(lo, hi);
            let cost = fleet.overall_cost(y_hat_used, s.y)?;
            Ok(TraceRow { day: s.day, slot: s.slot, y: s.y, y_hat, y_hat_used, cost })
        })
        .collect::<Result<_, EvalError>>()?;
    let costs: Vec<f64> = trace.iter().map(|r| r.cost).collect();
    let mut report = summarize_costs(&costs, beta)?;
    let sq: f64 = trace.iter().map(|r| (r.y_hat - r.y).powi(2)).sum();
    report.rmse = (sq / trace.len() as f64).sqrt();
    report.clamped = trace.iter().filter(|r| r.y_hat_used != r.y_hat).count();
    Ok((report, trace))
}

pub fn evaluate(
    model: &LinearModel,
    test: &Dataset,
    fleet: &ResourceFleet,
    beta: f64,
) -> Result<MetricsReport, EvalError> {
    model.check_dimension(test)?;
    Ok(evaluate_forecasts(&model.predict_all(test), test, fleet, beta)?.0)
}

/// `day,slot,y,y_hat,y_hat_used,cost` with one row per sample.
pub fn write_trace_csv<W: Write>(out: W, rows: &[TraceRow]) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| EvalError::Io(e.to_string());
    w.write_record(["day", "slot", "y", "y_hat", "y_hat_used", "cost"]).map_err(io)?;
    for r in rows {
        w.write_record(&[
            r.day.to_string(),
            r.slot.to_string(),
            r.y.to_string(),
            r.y_hat.to_string(),
            r.y_hat_used.to_string(),
            r.cost.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| EvalError::Io(e.to_string()))
}
