use super::exact::StandardizedData;
use super::{cvar_of_costs, Backend, Diagnostics, SubgradientSettings, TrainError, TrainedModel};
use crate::data::Dataset;
use crate::surface::CostSurface;

struct Penalized<'a> {
    sd: &'a StandardizedData,
    surface: &'a CostSurface,
    kappa: f64,
}

impl Penalized<'_> {
    /// Surface cost and its derivative in `y_hat`, plus the box violation and
    /// its derivative.
    fn cost_and_slope(&self, i: usize, y_hat: f64) -> (f64, f64, f64, f64) {
        let y = self.sd.ys[i];
        let (lo, hi) = self.sd.bounds[i];
        let mut best = f64::NEG_INFINITY;
        let mut slope = 0.0;
        for seg in &self.surface.segments {
            let v = seg.eval(y_hat, y);
            if v > best {
                best = v;
                slope = seg.coef_yhat;
            }
        }
        if y_hat < lo {
            (best, slope, lo - y_hat, -1.0)
        } else if y_hat > hi {
            (best, slope, y_hat - hi, 1.0)
        } else {
            (best, slope, 0.0, 0.0)
        }
    }

    /// `CVaR_beta(costs) + kappa * total violation`.
    fn objective(&self, theta: &[f64], beta: f64) -> Result<(f64, f64), TrainError> {
        let mut costs = Vec::with_capacity(self.sd.len());
        let mut violation = 0.0;
        for i in 0..self.sd.len() {
            let (c, _, v, _) = self.cost_and_slope(i, self.sd.forecast(theta, i));
            costs.push(c);
            violation += v;
        }
        let (cvar, alpha) = cvar_of_costs(&costs, beta)?;
        Ok((cvar + self.kappa * violation, alpha))
    }

    /// Penalized objective and a subgradient in `theta`.
    ///
    /// With alpha fixed at a minimizer, samples above alpha enter with weight
    /// one and samples tied at alpha share whatever weight makes the alpha
    /// derivative vanish, which yields a true subgradient of the partial
    /// minimum over alpha.
    fn evaluate(&self, theta: &[f64], beta: f64) -> Result<(f64, Vec<f64>), TrainError> {
        let n = self.sd.len();
        let mut costs = Vec::with_capacity(n);
        let mut slopes = Vec::with_capacity(n);
        let mut violation = 0.0;
        let mut grad = vec![0.0; theta.len()];
        for i in 0..n {
            let (c, s, v, dv) = self.cost_and_slope(i, self.sd.forecast(theta, i));
            costs.push(c);
            slopes.push(s);
            if v > 0.0 {
                violation += v;
                self.accumulate(&mut grad, i, self.kappa * dv);
            }
        }
        let (cvar, alpha) = cvar_of_costs(&costs, beta)?;
        let mass = n as f64 * (1.0 - beta);
        let above = costs.iter().filter(|&&c| c > alpha).count() as f64;
        let tied = costs.iter().filter(|&&c| c == alpha).count() as f64;
        let tied_weight = if tied > 0.0 { ((mass - above) / tied).clamp(0.0, 1.0) } else { 0.0 };
        for i in 0..n {
            let w = if costs[i] > alpha {
                1.0
            } else if costs[i] == alpha {
                tied_weight
            } else {
                continue;
            };
            self.accumulate(&mut grad, i, w * slopes[i] / mass);
        }
        Ok((cvar + self.kappa * violation, grad))
    }

    fn accumulate(&self, grad: &mut [f64], i: usize, g: f64) {
        grad[0] += g;
        for (gj, x) in grad[1..].iter_mut().zip(&self.sd.rows[i]) {
            *gj += g * x;
        }
    }
}

pub(super) fn train_subgradient(
    data: &Dataset,
    surface: &CostSurface,
    beta: f64,
    settings: &SubgradientSettings,
) -> Result<TrainedModel, TrainError> {
    let sd = StandardizedData::new(data, surface)?;
    let max_slope = surface.max_yhat_slope().max(f64::MIN_POSITIVE);
    let pen = Penalized { sd: &sd, surface, kappa: settings.penalty_factor * max_slope };
    let mean_norm =
        sd.rows.iter().map(|r| (1.0 + r.iter().map(|x| x * x).sum::<f64>()).sqrt()).sum::<f64>() / sd.len() as f64;
    let n = sd.len() as f64;
    let y_mean = sd.ys.iter().sum::<f64>() / n;
    let y_spread = (sd.ys.iter().map(|y| (y - y_mean).powi(2)).sum::<f64>() / n).sqrt().max(1.0);
    let step = settings.step_scale * y_spread / mean_norm;

    let iters = settings.iterations.max(1);
    let avg_from = iters / 2 + 1;
    // With fewer than two iterations there is no earlier best to compare
    // against, and the gap stays infinite.
    let tail_from = iters - (iters / 10).max(1);
    let mut theta = sd.least_squares();
    let mut avg = vec![0.0; theta.len()];
    let mut avg_count = 0.0;
    let mut best = (f64::INFINITY, theta.clone());
    let mut best_before_tail = f64::INFINITY;
    let mut iterations = iters;

    for t in 1..=iters {
        let (obj, grad) = pen.evaluate(&theta, beta)?;
        if t == tail_from {
            best_before_tail = best.0;
        }
        if obj < best.0 {
            best = (obj, theta.clone());
        }
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm == 0.0 {
            // A zero subgradient certifies optimality.
            best_before_tail = obj;
            iterations = t;
            break;
        }
        // Normalized step: the penalty can make raw subgradients orders of
        // magnitude longer than the cost part.
        let eta = step / ((t as f64).sqrt() * norm);
        for (th, g) in theta.iter_mut().zip(&grad) {
            *th -= eta * g;
        }
        if t >= avg_from {
            avg_count += 1.0;
            for (a, th) in avg.iter_mut().zip(&theta) {
                *a += (th - *a) / avg_count;
            }
        }
    }

    let mut theta_star = best.1;
    if avg_count > 0.0 && pen.objective(&avg, beta)?.0 <= best.0 {
        theta_star = avg;
    }
    let (objective, alpha_star) = pen.objective(&theta_star, beta)?;
    // Progress over the final tenth of the run, relative to the result.
    let gap = ((best_before_tail - objective) / objective.abs().max(f64::MIN_POSITIVE)).max(0.0);
    if gap.is_nan() || gap > settings.tolerance {
        return Err(TrainError::NonConvergence { iterations, gap_estimate: gap });
    }
    Ok(TrainedModel {
        model: sd.to_model(&data.feature_names, &theta_star),
        beta,
        alpha_star,
        objective,
        diagnostics: Diagnostics {
            backend: Backend::Subgradient,
            iterations,
            status: "converged".into(),
            lp_rows: sd.len() * (surface.segments.len() + 2) + 2 * sd.len(),
            lp_vars: 2 * sd.len() + data.num_features() + 2,
            gap,
        },
    })
}
