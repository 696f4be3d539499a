use super::LpError;

/// `min c'x  s.t.  G x <= h,  A x = b,  lower <= x <= upper`.
///
/// Bounds may be infinite. Rows are stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub ineq: Vec<Vec<f64>>,
    pub ineq_rhs: Vec<f64>,
    pub eq: Vec<Vec<f64>>,
    pub eq_rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LpProblem {
    /// A problem with `n` variables, zero objective, no rows, and `x >= 0`.
    pub fn new(n: usize) -> Self {
        Self {
            objective: vec![0.0; n],
            ineq: Vec::new(),
            ineq_rhs: Vec::new(),
            eq: Vec::new(),
            eq_rhs: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.ineq.len() + self.eq.len()
    }

    pub fn with_objective(mut self, c: Vec<f64>) -> Self {
        self.objective = c;
        self
    }

    pub fn add_le(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.ineq.push(row);
        self.ineq_rhs.push(rhs);
        self
    }

    pub fn add_ge(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.add_le(row.into_iter().map(|v| -v).collect(), -rhs)
    }

    pub fn add_eq(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.eq.push(row);
        self.eq_rhs.push(rhs);
        self
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) -> &mut Self {
        self.lower[j] = lower;
        self.upper[j] = upper;
        self
    }

    /// Mark every variable free.
    pub fn free_all(&mut self) -> &mut Self {
        self.lower.iter_mut().for_each(|l| *l = f64::NEG_INFINITY);
        self.upper.iter_mut().for_each(|u| *u = f64::INFINITY);
        self
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        let bad = |msg: String| Err(LpError::Malformed(msg));
        if self.ineq.len() != self.ineq_rhs.len() || self.eq.len() != self.eq_rhs.len() {
            return bad("row/rhs count mismatch".into());
        }
        if self.lower.len() != n || self.upper.len() != n {
            return bad("bound vectors do not match variable count".into());
        }
        for (i, row) in self.ineq.iter().chain(&self.eq).enumerate() {
            if row.len() != n {
                return bad(format!("row {i} has {} entries, expected {n}", row.len()));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return bad(format!("row {i} has a non-finite entry"));
            }
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&self.objective) || !finite(&self.ineq_rhs) || !finite(&self.eq_rhs) {
            return bad("non-finite objective or right-hand side".into());
        }
        for j in 0..n {
            let (l, u) = (self.lower[j], self.upper[j]);
            if l.is_nan() || u.is_nan() || l == f64::INFINITY || u == f64::NEG_INFINITY || l > u {
                return bad(format!("invalid bounds [{l}, {u}] on variable {j}"));
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        dot(&self.objective, x)
    }

    /// Largest violation of any row or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (row, &h) in self.ineq.iter().zip(&self.ineq_rhs) {
            worst = worst.max(dot(row, x) - h);
        }
        for (row, &b) in self.eq.iter().zip(&self.eq_rhs) {
            worst = worst.max((dot(row, x) - b).abs());
        }
        for j in 0..x.len() {
            worst = worst.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Primal/dual certificate.
///
/// Dual signs follow `c = A'eq_duals - G'ineq_duals + bound_duals`, so
/// `ineq_duals >= 0` and `eq_duals` is the marginal objective change per unit
/// increase of the corresponding right-hand side. `bound_duals` are the
/// reduced costs: nonnegative at an active lower bound, nonpositive at an
/// active upper bound.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub eq_duals: Vec<f64>,
    pub ineq_duals: Vec<f64>,
    pub bound_duals: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    pub(crate) fn without_point(status: LpStatus, problem: &LpProblem, iterations: usize) -> Self {
        Self {
            status,
            x: Vec::new(),
            objective: match status {
                LpStatus::Unbounded => f64::NEG_INFINITY,
                _ => f64::INFINITY,
            },
            eq_duals: vec![0.0; problem.eq.len()],
            ineq_duals: vec![0.0; problem.ineq.len()],
            bound_duals: vec![0.0; problem.num_vars()],
            iterations,
        }
    }

    /// Dual objective `b'y_eq - h'y_ineq + sum(bound terms)`.
    pub fn dual_objective(&self, problem: &LpProblem) -> f64 {
        let mut v = dot(&problem.eq_rhs, &self.eq_duals) - dot(&problem.ineq_rhs, &self.ineq_duals);
        for (j, &d) in self.bound_duals.iter().enumerate() {
            let bound = if d > 0.0 { problem.lower[j] } else { problem.upper[j] };
            if d != 0.0 && bound.is_finite() {
                v += d * bound;
            }
        }
        v
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
