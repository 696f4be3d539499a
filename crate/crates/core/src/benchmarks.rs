//! Comparison methods: least-squares regression (Qua-E), risk-neutral
//! value-oriented training (Val-N), and a scenario-based stochastic program
//! solved per test sample (Sto-OPT).

use rayon::prelude::*;
use thiserror::Error;

use crate::data::Dataset;
use crate::linalg::{least_squares, Standardizer};
use crate::lp::{LpError, LpProblem, PolyhedralProgram, SolverOptions};
use crate::surface::CostSurface;
use crate::train::{cvar_of_costs, train, Backend, LinearModel, TrainConfig, TrainError, TrainedModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BenchError {
    #[error("need at least {needed} samples, found {found}")]
    InsufficientSamples { needed: usize, found: usize },
    #[error("k = {k} exceeds the {n} training samples")]
    KTooLarge { k: usize, n: usize },
    #[error("context has {found} features, expected {expected}")]
    DimensionMismatch { found: usize, expected: usize },
    #[error("no scenarios")]
    EmptyScenarios,
    #[error("no forecast is feasible for every scenario")]
    NoCommonForecast,
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("LP solver: {0}")]
    Lp(#[from] LpError),
}

/// Ordinary least squares with an intercept. A ridge of
/// `1e-8 * trace(X'X) / p` is added only when the normal equations are
/// singular.
pub fn train_qua_e(data: &Dataset) -> Result<LinearModel, BenchError> {
    let needed = data.num_features() + 1;
    if data.len() < needed {
        return Err(BenchError::InsufficientSamples { needed, found: data.len() });
    }
    let (w, _) = least_squares(&data.contexts(), &data.targets());
    Ok(LinearModel::new(data.feature_names.clone(), w[1..].to_vec(), w[0]))
}

/// Expected-cost training: the CVaR trainer at `beta = 0`, exact backend.
pub fn train_val_n(data: &Dataset, surface: &CostSurface) -> Result<TrainedModel, BenchError> {
    Ok(train(data, surface, &TrainConfig::new(0.0, Backend::ExactLp))?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    /// Net-demand realizations (kW), nearest first.
    pub scenarios: Vec<f64>,
    /// Positions of the scenarios in the training dataset.
    pub sources: Vec<usize>,
    pub k: usize,
}

/// Nearest-neighbor search over z-scored training contexts.
#[derive(Debug, Clone)]
pub struct KnnIndex {
    st: Standardizer,
    rows: Vec<Vec<f64>>,
    ys: Vec<f64>,
}

impl KnnIndex {
    pub fn new(train: &Dataset) -> Self {
        let raw = train.contexts();
        let st = Standardizer::fit(&raw);
        let rows = raw.iter().map(|r| st.apply(r)).collect();
        Self { st, rows, ys: train.targets() }
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    /// The `k` training samples closest to `context` in Euclidean distance;
    /// equal distances go to the lower index.
    pub fn query(&self, context: &[f64], k: usize) -> Result<ScenarioSet, BenchError> {
        let n = self.len();
        if k == 0 {
            return Err(BenchError::EmptyScenarios);
        }
        if k > n {
            return Err(BenchError::KTooLarge { k, n });
        }
        let expected = self.st.mean.len();
        if context.len() != expected {
            return Err(BenchError::DimensionMismatch { found: context.len(), expected });
        }
        let q = self.st.apply(context);
        let mut dist: Vec<(f64, usize)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| (r.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < n {
            dist.select_nth_unstable_by(k - 1, cmp);
            dist.truncate(k);
        }
        dist.sort_unstable_by(cmp);
        Ok(ScenarioSet {
            scenarios: dist.iter().map(|&(_, i)| self.ys[i]).collect(),
            sources: dist.iter().map(|&(_, i)| i).collect(),
            k,
        })
    }
}

pub fn knn_scenarios(train: &Dataset, context: &[f64], k: usize) -> Result<ScenarioSet, BenchError> {
    KnnIndex::new(train).query(context, k)
}

/// Forecasts feasible for every scenario: the intersection of their boxes.
fn common_bounds(surface: &CostSurface, scenarios: &[f64]) -> Result<(f64, f64), BenchError> {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for &y in scenarios {
        let (a, b) = surface.forecast_bounds(y).ok_or(BenchError::NoCommonForecast)?;
        lo = lo.max(a);
        hi = hi.min(b);
    }
    if lo > hi {
        return Err(BenchError::NoCommonForecast);
    }
    Ok((lo, hi))
}

/// CVaR-optimal forecast against equiprobable scenarios.
///
/// Minimizes `alpha + sum_m max(0, C(y_hat, y_m) - alpha) / ((1 - beta) M)`
/// over `(y_hat, alpha)` with `y_hat` feasible for every scenario. Returns
/// `(y_hat, alpha)`.
pub fn sto_opt_decide(surface: &CostSurface, scenarios: &ScenarioSet, beta: f64) -> Result<(f64, f64), BenchError> {
    let ys = &scenarios.scenarios;
    if ys.is_empty() {
        return Err(BenchError::EmptyScenarios);
    }
    if !(0.0..1.0).contains(&beta) {
        return Err(TrainError::InvalidBeta(beta).into());
    }
    let (lo, hi) = common_bounds(surface, ys)?;
    let mut program = PolyhedralProgram::new(2);
    program.set_linear(vec![0.0, 1.0]);
    let weight = 1.0 / ((1.0 - beta) * ys.len() as f64);
    for &y in ys {
        let pieces = std::iter::once(([0.0, 0.0], 0.0))
            .chain(surface.segments.iter().map(|s| ([s.coef_yhat, -1.0], s.coef_y * y + s.intercept)));
        program.add_term(weight, pieces);
    }
    program.add_row(vec![1.0, 0.0], lo, hi);

    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let y0 = mean.clamp(lo, hi);
    let costs: Vec<f64> = ys.iter().map(|&y| surface.eval_unchecked(y0, y)).collect();
    let (_, alpha0) = cvar_of_costs(&costs, beta)?;
    let sol = program.solve(&[y0, alpha0], &SolverOptions::default())?;
    Ok((sol.z[0], sol.z[1]))
}

/// Explicit LP of [`sto_opt_decide`]. Variables: `y_hat, alpha, nu_1..nu_M,
/// chi_1..chi_M`, all free.
pub fn assemble_sto_opt_lp(surface: &CostSurface, scenarios: &ScenarioSet, beta: f64) -> Result<LpProblem, BenchError> {
    let ys = &scenarios.scenarios;
    if ys.is_empty() {
        return Err(BenchError::EmptyScenarios);
    }
    let (lo, hi) = common_bounds(surface, ys)?;
    let m = ys.len();
    let nvars = 2 + 2 * m;
    let mut objective = vec![0.0; nvars];
    objective[1] = 1.0;
    for v in &mut objective[2 + m..] {
        *v = 1.0 / ((1.0 - beta) * m as f64);
    }
    let mut lp = LpProblem::new(nvars).with_objective(objective);
    lp.free_all();
    for (i, &y) in ys.iter().enumerate() {
        for seg in &surface.segments {
            let mut row = vec![0.0; nvars];
            row[0] = seg.coef_yhat;
            row[2 + i] = -1.0;
            lp.add_le(row, -(seg.coef_y * y + seg.intercept));
        }
        let mut row = vec![0.0; nvars];
        row[2 + i] = 1.0;
        row[1] = -1.0;
        row[2 + m + i] = -1.0;
        lp.add_le(row, 0.0);
        let mut row = vec![0.0; nvars];
        row[2 + m + i] = -1.0;
        lp.add_le(row, 0.0);
    }
    let mut row = vec![0.0; nvars];
    row[0] = 1.0;
    lp.add_le(row.clone(), hi);
    lp.add_ge(row, lo);
    Ok(lp)
}

/// Sto-OPT forecast for every sample of `test`, with scenarios drawn from
/// `train`. Samples are solved in parallel; the output is in test order.
pub fn sto_opt_forecasts(
    train: &Dataset,
    test: &Dataset,
    surface: &CostSurface,
    beta: f64,
    k: usize,
) -> Result<Vec<f64>, BenchError> {
    let index = KnnIndex::new(train);
    test.samples
        .par_iter()
        .map(|s| {
            let scenarios = index.query(&s.features, k)?;
            sto_opt_decide(surface, &scenarios, beta).map(|(y_hat, _)| y_hat)
        })
        .collect()
}
