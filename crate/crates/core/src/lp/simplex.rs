//! Dense bounded-variable revised primal simplex.
//!
//! Rows are converted to equalities with one slack per inequality. Phase 1
//! minimizes the sum of artificials; phase 2 fixes the artificials at zero
//! and optimizes the true objective from the phase-1 basis. The basis inverse
//! is kept explicitly and refactored periodically. Dantzig pricing is used
//! until a run of degenerate pivots, after which Bland's rule takes over
//! until the next nondegenerate step.

use nalgebra::DMatrix;

use super::problem::{dot, LpProblem, LpSolution, LpStatus};
use super::{LpError, FEAS_TOL, PIVOT_TOL};

const OPT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;
const DEGENERATE_RUN: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable parked at zero.
    Free,
}

struct Tableau {
    m: usize,
    n_struct: usize,
    n_ineq: usize,
    cols: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    lo: Vec<f64>,
    up: Vec<f64>,
    x: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    binv: DMatrix<f64>,
    iterations: usize,
}

enum PhaseOutcome {
    Optimal,
    Unbounded,
}

/// Solve `problem` to optimality, or report infeasibility/unboundedness.
pub fn solve(problem: &LpProblem) -> Result<LpSolution, LpError> {
    problem.validate()?;
    let mut t = Tableau::build(problem);

    let phase1_cost: Vec<f64> = (0..t.cols.len()).map(|j| if t.is_artificial(j) { 1.0 } else { 0.0 }).collect();
    if let PhaseOutcome::Unbounded = t.run(&phase1_cost)? {
        return Err(LpError::NumericalFailure {
            iterations: t.iterations,
            reason: "phase 1 reported an unbounded ray".into(),
        });
    }
    let infeas: f64 = (0..t.cols.len()).filter(|&j| t.is_artificial(j)).map(|j| t.x[j]).sum();
    let scale = 1.0 + t.rhs.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if infeas > FEAS_TOL * scale {
        return Ok(LpSolution::without_point(LpStatus::Infeasible, problem, t.iterations));
    }

    for j in 0..t.cols.len() {
        if t.is_artificial(j) {
            t.up[j] = 0.0;
            if t.state[j] != VarState::Basic {
                t.x[j] = 0.0;
                t.state[j] = VarState::AtLower;
            }
        }
    }
    let mut cost = vec![0.0; t.cols.len()];
    cost[..t.n_struct].copy_from_slice(&problem.objective);
    if let PhaseOutcome::Unbounded = t.run(&cost)? {
        return Ok(LpSolution::without_point(LpStatus::Unbounded, problem, t.iterations));
    }
    t.refactor()?;
    Ok(t.certificate(problem, &cost))
}

impl Tableau {
    fn build(p: &LpProblem) -> Self {
        let n = p.num_vars();
        let n_ineq = p.ineq.len();
        let m = n_ineq + p.eq.len();
        let rows: Vec<&Vec<f64>> = p.ineq.iter().chain(&p.eq).collect();
        let rhs: Vec<f64> = p.ineq_rhs.iter().chain(&p.eq_rhs).copied().collect();

        let mut cols = Vec::with_capacity(n + n_ineq + m);
        for j in 0..n {
            cols.push(rows.iter().map(|r| r[j]).collect::<Vec<_>>());
        }
        for i in 0..n_ineq {
            let mut c = vec![0.0; m];
            c[i] = 1.0;
            cols.push(c);
        }
        let mut lo: Vec<f64> = p.lower.clone();
        let mut up: Vec<f64> = p.upper.clone();
        lo.extend(std::iter::repeat_n(0.0, n_ineq + m));
        up.extend(std::iter::repeat_n(f64::INFINITY, n_ineq + m));

        let mut x = vec![0.0; n + n_ineq + m];
        let mut state = vec![VarState::AtLower; n + n_ineq + m];
        for j in 0..n {
            let (l, u) = (lo[j], up[j]);
            (x[j], state[j]) = if l.is_finite() {
                (l, VarState::AtLower)
            } else if u.is_finite() {
                (u, VarState::AtUpper)
            } else {
                (0.0, VarState::Free)
            };
        }
        let mut residual = rhs.clone();
        for j in 0..n {
            if x[j] != 0.0 {
                for i in 0..m {
                    residual[i] -= cols[j][i] * x[j];
                }
            }
        }

        let mut basis = Vec::with_capacity(m);
        for i in 0..m {
            let art = n + n_ineq + i;
            let mut c = vec![0.0; m];
            let sign = if residual[i] < 0.0 { -1.0 } else { 1.0 };
            c[i] = sign;
            cols.push(c);
            if i < n_ineq && residual[i] >= 0.0 {
                let slack = n + i;
                basis.push(slack);
                x[slack] = residual[i];
                state[slack] = VarState::Basic;
            } else {
                basis.push(art);
                x[art] = residual[i].abs();
                state[art] = VarState::Basic;
            }
        }

        let mut t = Self {
            m,
            n_struct: n,
            n_ineq,
            cols,
            rhs,
            lo,
            up,
            x,
            state,
            basis,
            binv: DMatrix::identity(m, m),
            iterations: 0,
        };
        // Initial basis is a signed identity.
        for i in 0..m {
            t.binv[(i, i)] = 1.0 / t.cols[t.basis[i]][i];
        }
        t
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= self.n_struct + self.n_ineq
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        if self.m == 0 {
            return Ok(());
        }
        let b = DMatrix::from_fn(self.m, self.m, |i, k| self.cols[self.basis[k]][i]);
        self.binv = b.try_inverse().ok_or_else(|| LpError::NumericalFailure {
            iterations: self.iterations,
            reason: "basis matrix became singular".into(),
        })?;
        // Recompute basic values from the nonbasic ones.
        let mut r = self.rhs.clone();
        for (j, col) in self.cols.iter().enumerate() {
            if self.state[j] != VarState::Basic && self.x[j] != 0.0 {
                for i in 0..self.m {
                    r[i] -= col[i] * self.x[j];
                }
            }
        }
        for (k, &bj) in self.basis.iter().enumerate() {
            self.x[bj] = (0..self.m).map(|i| self.binv[(k, i)] * r[i]).sum();
        }
        Ok(())
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        // y' = c_B' B^-1
        let mut y = vec![0.0; self.m];
        for (k, &bj) in self.basis.iter().enumerate() {
            let cb = cost[bj];
            if cb != 0.0 {
                for i in 0..self.m {
                    y[i] += cb * self.binv[(k, i)];
                }
            }
        }
        y
    }

    fn ftran(&self, col: &[f64]) -> Vec<f64> {
        (0..self.m).map(|k| (0..self.m).map(|i| self.binv[(k, i)] * col[i]).sum()).collect()
    }

    fn run(&mut self, cost: &[f64]) -> Result<PhaseOutcome, LpError> {
        let ncols = self.cols.len();
        let limit = 50 * (self.m + ncols) + 1000;
        let mut degenerate_run = 0usize;
        let mut since_refactor = 0usize;

        loop {
            if self.iterations > limit {
                return Err(LpError::NumericalFailure {
                    iterations: self.iterations,
                    reason: "iteration cap reached".into(),
                });
            }
            let bland = degenerate_run >= DEGENERATE_RUN;
            let y = self.duals(cost);
            let cscale = 1.0 + cost.iter().fold(0.0_f64, |a, v| a.max(v.abs()));

            // Pricing: pick entering column and direction (+1 increase, -1 decrease).
            let mut entering: Option<(usize, f64, f64)> = None;
            for j in 0..ncols {
                let st = self.state[j];
                if st == VarState::Basic || self.lo[j] == self.up[j] {
                    continue;
                }
                let d = cost[j] - dot(&y, &self.cols[j]);
                let dir = match st {
                    VarState::AtLower if d < -OPT_TOL * cscale => 1.0,
                    VarState::AtUpper if d > OPT_TOL * cscale => -1.0,
                    VarState::Free if d.abs() > OPT_TOL * cscale => -d.signum(),
                    _ => continue,
                };
                let score = d.abs();
                match entering {
                    None => entering = Some((j, dir, score)),
                    Some((_, _, best)) if !bland && score > best => entering = Some((j, dir, score)),
                    _ => {}
                }
                if bland {
                    break;
                }
            }
            let Some((q, dir, _)) = entering else {
                return Ok(PhaseOutcome::Optimal);
            };

            let w = self.ftran(&self.cols[q]);
            // Ratio test. Basic k moves by -dir * w[k] per unit step.
            let mut best: Option<(usize, f64, f64)> = None;
            for k in 0..self.m {
                let delta = -dir * w[k];
                if delta.abs() <= PIVOT_TOL {
                    continue;
                }
                let bj = self.basis[k];
                let bound = if delta < 0.0 { self.lo[bj] } else { self.up[bj] };
                if !bound.is_finite() {
                    continue;
                }
                let limit_k = ((bound - self.x[bj]) / delta).max(0.0);
                let take = match best {
                    None => true,
                    Some((kk, _, lim)) => {
                        limit_k < lim - PIVOT_TOL
                            || (limit_k <= lim + PIVOT_TOL
                                && if bland { bj < self.basis[kk] } else { w[k].abs() > w[kk].abs() })
                    }
                };
                if take {
                    best = Some((k, delta, limit_k));
                }
            }
            let flip = self.up[q] - self.lo[q];
            let (step, leave) = match best {
                Some((k, delta, lim)) if lim <= flip => (lim, Some((k, delta))),
                _ => (flip, None),
            };
            if !step.is_finite() {
                return Ok(PhaseOutcome::Unbounded);
            }
            self.iterations += 1;
            if step <= PIVOT_TOL {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }

            // Apply the step.
            self.x[q] += dir * step;
            for k in 0..self.m {
                let bj = self.basis[k];
                self.x[bj] -= dir * w[k] * step;
            }
            match leave {
                None => {
                    // Bound flip of the entering variable.
                    self.state[q] = if dir > 0.0 { VarState::AtUpper } else { VarState::AtLower };
                    self.x[q] = if dir > 0.0 { self.up[q] } else { self.lo[q] };
                }
                Some((r, delta)) => {
                    let out = self.basis[r];
                    if delta < 0.0 {
                        self.x[out] = self.lo[out];
                        self.state[out] = VarState::AtLower;
                    } else {
                        self.x[out] = self.up[out];
                        self.state[out] = VarState::AtUpper;
                    }
                    self.basis[r] = q;
                    self.state[q] = VarState::Basic;
                    self.pivot(r, &w);
                    since_refactor += 1;
                    if since_refactor >= REFACTOR_EVERY {
                        self.refactor()?;
                        since_refactor = 0;
                    }
                }
            }
        }
    }

    /// Eta update of the explicit inverse after column `w = B^-1 a_q` enters at row `r`.
    fn pivot(&mut self, r: usize, w: &[f64]) {
        let piv = w[r];
        for i in 0..self.m {
            self.binv[(r, i)] /= piv;
        }
        for k in 0..self.m {
            if k == r || w[k] == 0.0 {
                continue;
            }
            let f = w[k];
            for i in 0..self.m {
                let v = self.binv[(r, i)];
                self.binv[(k, i)] -= f * v;
            }
        }
    }

    fn certificate(&self, problem: &LpProblem, cost: &[f64]) -> LpSolution {
        let y = self.duals(cost);
        let n = self.n_struct;
        let x: Vec<f64> = self.x[..n].to_vec();
        let bound_duals: Vec<f64> = (0..n)
            .map(|j| if self.state[j] == VarState::Basic { 0.0 } else { cost[j] - dot(&y, &self.cols[j]) })
            .collect();
        LpSolution {
            status: LpStatus::Optimal,
            objective: problem.objective_value(&x),
            x,
            ineq_duals: y[..self.n_ineq].iter().map(|v| -v).collect(),
            eq_duals: y[self.n_ineq..].to_vec(),
            bound_duals,
            iterations: self.iterations,
        }
    }
}
