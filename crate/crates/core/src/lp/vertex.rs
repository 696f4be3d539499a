//! Exhaustive basic-solution enumeration.
//!
//! Every inequality gets a slack, giving `m` equality rows over `n + m_ineq`
//! columns. For every choice of `m` basic columns with a nonsingular basis and
//! every assignment of nonbasic columns to a finite bound (free columns sit at
//! zero), the basic values are solved and checked. The cheapest feasible point
//! wins; among ties a basis whose reduced costs are dual feasible is
//! preferred, so the returned duals form a valid certificate. Unboundedness
//! is detected by enumerating basic rays with negative cost.

use nalgebra::{DMatrix, DVector};

use super::problem::{dot, LpProblem, LpSolution, LpStatus};
use super::{LpError, FEAS_TOL};

const MAX_VARS: usize = 12;
const MAX_ROWS: usize = 30;
const MAX_WORK: f64 = 5e7;

struct Standard {
    m: usize,
    n: usize,
    n_ineq: usize,
    cols: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    lo: Vec<f64>,
    up: Vec<f64>,
    cost: Vec<f64>,
}

pub fn enumerate_vertices(problem: &LpProblem) -> Result<LpSolution, LpError> {
    problem.validate()?;
    let n = problem.num_vars();
    if n > MAX_VARS || problem.num_rows() > MAX_ROWS {
        return Err(LpError::TooLarge(format!(
            "{n} variables and {} rows (limits {MAX_VARS} and {MAX_ROWS})",
            problem.num_rows()
        )));
    }
    let s = Standard::new(problem);
    let ncols = s.cols.len();
    let work = binomial(ncols, s.m) * 2f64.powi((ncols - s.m) as i32) * (s.m.max(1) as f64);
    if work > MAX_WORK {
        return Err(LpError::TooLarge(format!("estimated {work:.2e} basis evaluations")));
    }

    let mut best: Option<Candidate> = None;
    let mut any_feasible = false;
    for basis in Combinations::new(ncols, s.m) {
        let Some(binv) = s.basis_inverse(&basis) else { continue };
        let nonbasic: Vec<usize> = (0..ncols).filter(|j| !basis.contains(j)).collect();
        let choices: Vec<Vec<f64>> = nonbasic.iter().map(|&j| s.bound_choices(j)).collect();
        if choices.iter().any(|c| c.is_empty()) {
            continue;
        }
        let y = s.duals(&basis, &binv);
        let mut pick = vec![0usize; nonbasic.len()];
        loop {
            let mut x = vec![0.0; ncols];
            for (slot, &j) in nonbasic.iter().enumerate() {
                x[j] = choices[slot][pick[slot]];
            }
            if s.complete_basic(&basis, &binv, &mut x) {
                any_feasible = true;
                let obj = dot(&s.cost, &x);
                let dual_ok = s.dual_feasible(&nonbasic, &x, &y);
                let cand = Candidate { obj, dual_ok, x, y: y.clone(), basis: basis.clone() };
                best = Some(match best {
                    None => cand,
                    Some(b) => pick_better(b, cand),
                });
            }
            if !advance(&mut pick, &choices) {
                break;
            }
        }
    }

    if !any_feasible {
        return Ok(LpSolution::without_point(LpStatus::Infeasible, problem, 0));
    }
    if s.has_descent_ray() {
        return Ok(LpSolution::without_point(LpStatus::Unbounded, problem, 0));
    }
    let best = best.expect("feasible point recorded");
    Ok(s.certificate(problem, best))
}

struct Candidate {
    obj: f64,
    dual_ok: bool,
    x: Vec<f64>,
    y: Vec<f64>,
    basis: Vec<usize>,
}

fn pick_better(a: Candidate, b: Candidate) -> Candidate {
    let tol = FEAS_TOL * (1.0 + a.obj.abs());
    // Within tolerance, prefer the vertex whose dual certificate checks out.
    let tie_break = b.obj <= a.obj + tol && b.dual_ok && !a.dual_ok;
    if b.obj < a.obj - tol || tie_break {
        b
    } else {
        a
    }
}

impl Standard {
    fn new(p: &LpProblem) -> Self {
        let n = p.num_vars();
        let n_ineq = p.ineq.len();
        let m = p.num_rows();
        let rows: Vec<&Vec<f64>> = p.ineq.iter().chain(&p.eq).collect();
        let mut cols: Vec<Vec<f64>> = (0..n).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        for i in 0..n_ineq {
            let mut c = vec![0.0; m];
            c[i] = 1.0;
            cols.push(c);
        }
        let mut lo = p.lower.clone();
        let mut up = p.upper.clone();
        lo.extend(std::iter::repeat_n(0.0, n_ineq));
        up.extend(std::iter::repeat_n(f64::INFINITY, n_ineq));
        let mut cost = p.objective.clone();
        cost.extend(std::iter::repeat_n(0.0, n_ineq));
        Self { m, n, n_ineq, cols, rhs: p.ineq_rhs.iter().chain(&p.eq_rhs).copied().collect(), lo, up, cost }
    }

    fn basis_inverse(&self, basis: &[usize]) -> Option<DMatrix<f64>> {
        if self.m == 0 {
            return Some(DMatrix::zeros(0, 0));
        }
        let b = DMatrix::from_fn(self.m, self.m, |i, k| self.cols[basis[k]][i]);
        let lu = b.clone().lu();
        let det = lu.determinant();
        if det.abs() < 1e-12 {
            return None;
        }
        lu.try_inverse()
    }

    fn bound_choices(&self, j: usize) -> Vec<f64> {
        let (l, u) = (self.lo[j], self.up[j]);
        match (l.is_finite(), u.is_finite()) {
            (true, true) if l == u => vec![l],
            (true, true) => vec![l, u],
            (true, false) => vec![l],
            (false, true) => vec![u],
            (false, false) => vec![0.0],
        }
    }

    /// Fill basic values in `x`; false when they violate their bounds.
    fn complete_basic(&self, basis: &[usize], binv: &DMatrix<f64>, x: &mut [f64]) -> bool {
        let mut r = self.rhs.clone();
        for (j, col) in self.cols.iter().enumerate() {
            if x[j] != 0.0 && !basis.contains(&j) {
                for i in 0..self.m {
                    r[i] -= col[i] * x[j];
                }
            }
        }
        let xb = binv * DVector::from_vec(r);
        for (k, &j) in basis.iter().enumerate() {
            let v = xb[k];
            let scale = 1.0 + v.abs();
            if v < self.lo[j] - FEAS_TOL * scale || v > self.up[j] + FEAS_TOL * scale {
                return false;
            }
            x[j] = v;
        }
        true
    }

    fn duals(&self, basis: &[usize], binv: &DMatrix<f64>) -> Vec<f64> {
        let cb = DVector::from_iterator(self.m, basis.iter().map(|&j| self.cost[j]));
        (binv.transpose() * cb).iter().copied().collect()
    }

    fn dual_feasible(&self, nonbasic: &[usize], x: &[f64], y: &[f64]) -> bool {
        let tol = FEAS_TOL * (1.0 + self.cost.iter().fold(0.0_f64, |a, c| a.max(c.abs())));
        nonbasic.iter().all(|&j| {
            let d = self.cost[j] - dot(y, &self.cols[j]);
            let at_lo = self.lo[j].is_finite() && x[j] == self.lo[j];
            let at_up = self.up[j].is_finite() && x[j] == self.up[j];
            (at_lo && at_up) || (at_lo && d >= -tol) || (at_up && d <= tol) || d.abs() <= tol
        })
    }

    fn has_descent_ray(&self) -> bool {
        let ncols = self.cols.len();
        let tol = FEAS_TOL * (1.0 + self.cost.iter().fold(0.0_f64, |a, c| a.max(c.abs())));
        for basis in Combinations::new(ncols, self.m) {
            let Some(binv) = self.basis_inverse(&basis) else { continue };
            for j in (0..ncols).filter(|j| !basis.contains(j)) {
                let signs: &[f64] = match (self.lo[j].is_finite(), self.up[j].is_finite()) {
                    (true, true) => &[],
                    (true, false) => &[1.0],
                    (false, true) => &[-1.0],
                    (false, false) => &[1.0, -1.0],
                };
                let w = &binv * DVector::from_column_slice(&self.cols[j]);
                for &sgn in signs {
                    let mut cost = self.cost[j] * sgn;
                    let mut ok = true;
                    for (k, &bj) in basis.iter().enumerate() {
                        let r = -w[k] * sgn;
                        cost += self.cost[bj] * r;
                        let ok_k = match (self.lo[bj].is_finite(), self.up[bj].is_finite()) {
                            (true, true) => r.abs() <= FEAS_TOL,
                            (true, false) => r >= -FEAS_TOL,
                            (false, true) => r <= FEAS_TOL,
                            (false, false) => true,
                        };
                        if !ok_k {
                            ok = false;
                            break;
                        }
                    }
                    if ok && cost < -tol {
                        return true;
                    }
                }
            }
        }
        false
    }

    fn certificate(&self, problem: &LpProblem, c: Candidate) -> LpSolution {
        let x = c.x[..self.n].to_vec();
        let bound_duals = (0..self.n)
            .map(|j| if c.basis.contains(&j) { 0.0 } else { self.cost[j] - dot(&c.y, &self.cols[j]) })
            .collect();
        LpSolution {
            status: LpStatus::Optimal,
            objective: problem.objective_value(&x),
            x,
            ineq_duals: c.y[..self.n_ineq].iter().map(|v| -v).collect(),
            eq_duals: c.y[self.n_ineq..].to_vec(),
            bound_duals,
            iterations: 0,
        }
    }
}

fn advance(pick: &mut [usize], choices: &[Vec<f64>]) -> bool {
    for slot in 0..pick.len() {
        pick[slot] += 1;
        if pick[slot] < choices[slot].len() {
            return true;
        }
        pick[slot] = 0;
    }
    false
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Lexicographic `k`-subsets of `0..n`.
struct Combinations {
    n: usize,
    idx: Vec<usize>,
    done: bool,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Self { n, idx: (0..k).collect(), done: k > n }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        let k = self.idx.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < self.n - k + i {
                self.idx[i] += 1;
                for t in i + 1..k {
                    self.idx[t] = self.idx[t - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}
