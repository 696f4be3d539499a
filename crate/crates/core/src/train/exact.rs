use super::{cvar_of_costs, Backend, Diagnostics, LinearModel, TrainError, TrainedModel};
use crate::data::Dataset;
use crate::linalg::{least_squares, Standardizer};
use crate::lp::{LpProblem, PolyhedralProgram, SolverOptions};
use crate::surface::CostSurface;

/// Feasible forecast interval of every sample.
pub(crate) fn sample_bounds(data: &Dataset, surface: &CostSurface) -> Result<Vec<(f64, f64)>, TrainError> {
    data.samples
        .iter()
        .map(|s| surface.forecast_bounds(s.y).ok_or(TrainError::InfeasibleSample { day: s.day, slot: s.slot, y: s.y }))
        .collect()
}

/// Training data with standardized features, targets, and forecast bounds.
pub(crate) struct StandardizedData {
    pub st: Standardizer,
    pub rows: Vec<Vec<f64>>,
    pub ys: Vec<f64>,
    pub bounds: Vec<(f64, f64)>,
}

impl StandardizedData {
    pub fn new(data: &Dataset, surface: &CostSurface) -> Result<Self, TrainError> {
        let bounds = sample_bounds(data, surface)?;
        let raw = data.contexts();
        let st = Standardizer::fit(&raw);
        let rows = raw.iter().map(|r| st.apply(r)).collect();
        Ok(Self { st, rows, ys: data.targets(), bounds })
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    /// Least-squares weights on standardized features, intercept first.
    pub fn least_squares(&self) -> Vec<f64> {
        least_squares(&self.rows, &self.ys).0
    }

    pub fn forecast(&self, theta: &[f64], i: usize) -> f64 {
        theta[0] + self.rows[i].iter().zip(&theta[1..]).map(|(x, w)| x * w).sum::<f64>()
    }

    pub fn to_model(&self, names: &[String], theta: &[f64]) -> LinearModel {
        let raw = self.st.unscale_weights(theta);
        LinearModel::new(names.to_vec(), raw[1..].to_vec(), raw[0])
    }

    /// `(1, x_i)`: gradient of the forecast with respect to `theta`.
    fn design_row(&self, i: usize) -> Vec<f64> {
        let mut g = Vec::with_capacity(self.rows[i].len() + 1);
        g.push(1.0);
        g.extend_from_slice(&self.rows[i]);
        g
    }

    fn add_box_rows(&self, program: &mut PolyhedralProgram, dim: usize) {
        for (i, &(lo, hi)) in self.bounds.iter().enumerate() {
            let mut row = self.design_row(i);
            row.resize(dim, 0.0);
            program.add_row(row, lo, hi);
        }
    }
}

/// `z = (theta, alpha)`; one term `max(0, seg_k(y_hat_i, y_i) - alpha)` per
/// sample plus `alpha` itself.
fn cvar_program(sd: &StandardizedData, surface: &CostSurface, beta: f64) -> PolyhedralProgram {
    let p = sd.rows.first().map_or(0, Vec::len);
    let dim = p + 2;
    let mut program = PolyhedralProgram::new(dim);
    let mut linear = vec![0.0; dim];
    linear[dim - 1] = 1.0;
    program.set_linear(linear);
    let weight = 1.0 / (sd.len() as f64 * (1.0 - beta));
    for i in 0..sd.len() {
        let x = sd.design_row(i);
        let mut pieces: Vec<(Vec<f64>, f64)> = Vec::with_capacity(surface.segments.len() + 1);
        pieces.push((vec![0.0; dim], 0.0));
        for seg in &surface.segments {
            let mut g: Vec<f64> = x.iter().map(|v| seg.coef_yhat * v).collect();
            g.push(-1.0);
            pieces.push((g, seg.coef_y * sd.ys[i] + seg.intercept));
        }
        program.add_term(weight, pieces);
    }
    sd.add_box_rows(&mut program, dim);
    program
}

fn lp_size(n: usize, segments: usize, features: usize) -> (usize, usize) {
    (n * (segments + 2) + 2 * n, 2 * n + features + 2)
}

pub(super) fn train_exact(data: &Dataset, surface: &CostSurface, beta: f64) -> Result<TrainedModel, TrainError> {
    let sd = StandardizedData::new(data, surface)?;
    let program = cvar_program(&sd, surface, beta);

    let theta0 = sd.least_squares();
    let costs: Vec<f64> = (0..sd.len()).map(|i| surface.eval_unchecked(sd.forecast(&theta0, i), sd.ys[i])).collect();
    let (_, alpha0) = cvar_of_costs(&costs, beta)?;
    let mut start = theta0;
    start.push(alpha0);

    let sol = program.solve(&start, &SolverOptions::default())?;
    let dim = program.dim();
    let (lp_rows, lp_vars) = lp_size(sd.len(), surface.segments.len(), data.num_features());
    Ok(TrainedModel {
        model: sd.to_model(&data.feature_names, &sol.z[..dim - 1]),
        beta,
        alpha_star: sol.z[dim - 1],
        objective: sol.objective,
        diagnostics: Diagnostics {
            backend: Backend::ExactLp,
            iterations: sol.iterations,
            status: "optimal".into(),
            lp_rows,
            lp_vars,
            gap: sol.objective - sol.dual_objective,
        },
    })
}

/// Minimum over linear models of the mean surface cost, solved through its
/// own formulation (one max-affine term per sample, no VaR variable).
pub fn mean_cost_objective(data: &Dataset, surface: &CostSurface) -> Result<(LinearModel, f64), TrainError> {
    let sd = StandardizedData::new(data, surface)?;
    let dim = data.num_features() + 1;
    let mut program = PolyhedralProgram::new(dim);
    let weight = 1.0 / sd.len() as f64;
    for i in 0..sd.len() {
        let x = sd.design_row(i);
        program.add_term(
            weight,
            surface.segments.iter().map(|seg| {
                let g: Vec<f64> = x.iter().map(|v| seg.coef_yhat * v).collect();
                (g, seg.coef_y * sd.ys[i] + seg.intercept)
            }),
        );
    }
    sd.add_box_rows(&mut program, dim);
    let sol = program.solve(&sd.least_squares(), &SolverOptions::default())?;
    Ok((sd.to_model(&data.feature_names, &sol.z), sol.objective))
}

/// Explicit epigraph LP over raw features.
///
/// Variables: `intercept, w_1..w_p, alpha, nu_1..nu_N, chi_1..chi_N`, all
/// free. Rows, per sample: `nu_i >= segment_k` for every segment, then
/// `chi_i >= nu_i - alpha`, `chi_i >= 0`; after all samples, the two box
/// rows of each sample.
pub fn assemble_training_lp(data: &Dataset, surface: &CostSurface, beta: f64) -> Result<LpProblem, TrainError> {
    if !(0.0..1.0).contains(&beta) {
        return Err(TrainError::InvalidBeta(beta));
    }
    let bounds = sample_bounds(data, surface)?;
    let n = data.len();
    let p = data.num_features();
    let (alpha, nu0, chi0) = (p + 1, p + 2, p + 2 + n);
    let nvars = p + 2 + 2 * n;
    let mut objective = vec![0.0; nvars];
    objective[alpha] = 1.0;
    for v in &mut objective[chi0..] {
        *v = 1.0 / (n as f64 * (1.0 - beta));
    }
    let mut lp = LpProblem::new(nvars).with_objective(objective);
    lp.free_all();
    for (i, s) in data.samples.iter().enumerate() {
        for seg in &surface.segments {
            // a_k (b + w.s) + b_k y + c_k - nu_i <= 0
            let mut row = vec![0.0; nvars];
            row[0] = seg.coef_yhat;
            for (j, x) in s.features.iter().enumerate() {
                row[1 + j] = seg.coef_yhat * x;
            }
            row[nu0 + i] = -1.0;
            lp.add_le(row, -(seg.coef_y * s.y + seg.intercept));
        }
        let mut row = vec![0.0; nvars];
        row[nu0 + i] = 1.0;
        row[alpha] = -1.0;
        row[chi0 + i] = -1.0;
        lp.add_le(row, 0.0);
        let mut row = vec![0.0; nvars];
        row[chi0 + i] = -1.0;
        lp.add_le(row, 0.0);
    }
    add_raw_box_rows(&mut lp, data, &bounds, nvars);
    Ok(lp)
}

/// Explicit LP of the mean-cost problem. Variables: `intercept, w, nu_1..nu_N`.
pub fn assemble_mean_cost_lp(data: &Dataset, surface: &CostSurface) -> Result<LpProblem, TrainError> {
    let bounds = sample_bounds(data, surface)?;
    let n = data.len();
    let p = data.num_features();
    let nu0 = p + 1;
    let nvars = p + 1 + n;
    let mut objective = vec![0.0; nvars];
    for v in &mut objective[nu0..] {
        *v = 1.0 / n as f64;
    }
    let mut lp = LpProblem::new(nvars).with_objective(objective);
    lp.free_all();
    for (i, s) in data.samples.iter().enumerate() {
        for seg in &surface.segments {
            let mut row = vec![0.0; nvars];
            row[0] = seg.coef_yhat;
            for (j, x) in s.features.iter().enumerate() {
                row[1 + j] = seg.coef_yhat * x;
            }
            row[nu0 + i] = -1.0;
            lp.add_le(row, -(seg.coef_y * s.y + seg.intercept));
        }
    }
    add_raw_box_rows(&mut lp, data, &bounds, nvars);
    Ok(lp)
}

fn add_raw_box_rows(lp: &mut LpProblem, data: &Dataset, bounds: &[(f64, f64)], nvars: usize) {
    for (s, &(lo, hi)) in data.samples.iter().zip(bounds) {
        let mut row = vec![0.0; nvars];
        row[0] = 1.0;
        row[1..=s.features.len()].copy_from_slice(&s.features);
        lp.add_le(row.clone(), hi);
        lp.add_ge(row, lo);
    }
}
