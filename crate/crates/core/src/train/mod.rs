//! CVaR-minimizing training of linear forecast models.
//!
//! For a model `y_hat = intercept + w . s`, the training objective is the
//! sample CVaR of the surface cost `C(y_hat, y)`, written in its
//! minimization form over the VaR level `alpha`:
//!
//! ```text
//! min_{w, alpha}  alpha + 1/(N (1 - beta)) * sum_i max(0, C(y_hat_i, y_i) - alpha)
//! ```
//!
//! Since `C` is a maximum of affine functions, each summand is itself a
//! maximum of affine functions of `(w, alpha)` and the problem is an LP.
//! [`Backend::ExactLp`] solves it exactly; [`Backend::Subgradient`] runs a
//! subgradient method on the forecast weights, with `alpha` minimized in
//! closed form and an exact hinge penalty standing in for the feasible box.

mod exact;
mod model_io;
mod subgradient;

pub use exact::{assemble_mean_cost_lp, assemble_training_lp, mean_cost_objective};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::lp::LpError;
use crate::surface::CostSurface;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("no costs to aggregate")]
    EmptyInput,
    #[error("beta {0} must lie in [0, 1)")]
    InvalidBeta(f64),
    #[error("model has {model} features but the dataset has {data}")]
    DimensionMismatch { model: usize, data: usize },
    #[error("sample (day {day}, slot {slot}) with y = {y} kW admits no feasible forecast")]
    InfeasibleSample { day: usize, slot: usize, y: f64 },
    #[error("LP solver: {0}")]
    Lp(#[from] LpError),
    #[error(
        "subgradient method did not converge after {iterations} iterations (relative gap estimate {gap_estimate:.3e})"
    )]
    NonConvergence { iterations: usize, gap_estimate: f64 },
    #[error("model file: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Backend {
    #[default]
    #[serde(rename = "exact")]
    ExactLp,
    #[serde(rename = "subgrad")]
    Subgradient,
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Backend::ExactLp => "exact",
            Backend::Subgradient => "subgrad",
        }
    }
}

impl std::str::FromStr for Backend {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(Backend::ExactLp),
            "subgrad" => Ok(Backend::Subgradient),
            other => Err(format!("unknown backend `{other}` (expected `exact` or `subgrad`)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubgradientSettings {
    pub iterations: usize,
    /// Step lengths are `step_scale * sd(y) / (mean feature norm * sqrt(t))`
    /// along the normalized subgradient.
    pub step_scale: f64,
    /// Weight on the summed box violation, as a multiple of the steepest
    /// segment slope.
    pub penalty_factor: f64,
    /// Largest relative improvement of the best objective over the final tenth
    /// of the run that is still accepted as converged.
    pub tolerance: f64,
}

impl Default for SubgradientSettings {
    fn default() -> Self {
        Self { iterations: 5000, step_scale: 1.0, penalty_factor: 10.0, tolerance: 1e-2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub beta: f64,
    pub backend: Backend,
    pub subgradient: SubgradientSettings,
}

impl TrainConfig {
    pub fn new(beta: f64, backend: Backend) -> Self {
        Self { beta, backend, subgradient: SubgradientSettings::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub feature_names: Vec<String>,
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn new(feature_names: Vec<String>, weights: Vec<f64>, intercept: f64) -> Self {
        assert_eq!(feature_names.len(), weights.len());
        Self { feature_names, weights, intercept }
    }

    pub fn predict(&self, features: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(features).map(|(w, x)| w * x).sum::<f64>()
    }

    pub fn predict_all(&self, data: &Dataset) -> Vec<f64> {
        data.samples.iter().map(|s| self.predict(&s.features)).collect()
    }

    pub fn check_dimension(&self, data: &Dataset) -> Result<(), TrainError> {
        if self.weights.len() != data.num_features() {
            return Err(TrainError::DimensionMismatch { model: self.weights.len(), data: data.num_features() });
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.intercept.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub backend: Backend,
    pub iterations: usize,
    pub status: String,
    /// Rows and columns of the equivalent explicit LP.
    pub lp_rows: usize,
    pub lp_vars: usize,
    /// ExactLp: primal minus dual certificate value. Subgradient: relative
    /// improvement of the best objective over the final tenth of the run.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model: LinearModel,
    pub beta: f64,
    pub alpha_star: f64,
    pub objective: f64,
    pub diagnostics: Diagnostics,
}

/// Exact sample CVaR and VaR of `costs` at level `beta`.
///
/// The Rockafellar-Uryasev function `alpha + sum (c - alpha)^+ / ((1-beta) M)`
/// is minimized at the `floor(beta M) + 1`-th smallest cost (it is flat
/// between two order statistics when `beta M` is an integer; the upper end
/// is returned). At `beta = 0` the CVaR is returned as the plain mean and
/// the VaR as the minimum.
pub fn cvar_of_costs(costs: &[f64], beta: f64) -> Result<(f64, f64), TrainError> {
    if costs.is_empty() {
        return Err(TrainError::EmptyInput);
    }
    if !(0.0..1.0).contains(&beta) {
        return Err(TrainError::InvalidBeta(beta));
    }
    let m = costs.len();
    let mut sorted = costs.to_vec();
    sorted.sort_by(f64::total_cmp);
    if beta == 0.0 {
        return Ok((costs.iter().sum::<f64>() / m as f64, sorted[0]));
    }
    let bm = beta * m as f64;
    let k = if (bm - bm.round()).abs() <= 1e-9 * m as f64 { bm.round() } else { bm.floor() } as usize;
    let var = sorted[k.min(m - 1)];
    Ok((ru_objective(&sorted, var, beta), var))
}

/// `alpha + sum_i max(0, c_i - alpha) / ((1 - beta) M)`.
pub fn ru_objective(costs: &[f64], alpha: f64, beta: f64) -> f64 {
    let tail: f64 = costs.iter().map(|c| (c - alpha).max(0.0)).sum();
    alpha + tail / ((1.0 - beta) * costs.len() as f64)
}

/// Per-sample surface costs of a model, without the box check.
pub fn model_costs(model: &LinearModel, data: &Dataset, surface: &CostSurface) -> Vec<f64> {
    data.samples.iter().map(|s| surface.eval_unchecked(model.predict(&s.features), s.y)).collect()
}

/// Train by minimizing the sample CVaR of surface costs.
pub fn train(data: &Dataset, surface: &CostSurface, config: &TrainConfig) -> Result<TrainedModel, TrainError> {
    if !(0.0..1.0).contains(&config.beta) {
        return Err(TrainError::InvalidBeta(config.beta));
    }
    if data.is_empty() {
        return Err(TrainError::EmptyInput);
    }
    match config.backend {
        Backend::ExactLp => exact::train_exact(data, surface, config.beta),
        Backend::Subgradient => subgradient::train_subgradient(data, surface, config.beta, &config.subgradient),
    }
}
