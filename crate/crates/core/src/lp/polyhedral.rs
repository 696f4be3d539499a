//! Exact solver for `min c'z + sum_i w_i max_k (g_ik'z + h_ik)` subject to
//! range rows `l_j <= a_j'z <= u_j`, with `z` low-dimensional and many terms.
//!
//! This is the epigraph LP `min c'z + sum_i w_i nu_i, nu_i >= g_ik'z + h_ik`
//! solved without materializing `nu`. The method walks vertices of the
//! arrangement of kink hyperplanes (where two pieces of a term tie) and row
//! bounds. At a vertex, `dim` hyperplanes are active; solving for their
//! multipliers either certifies optimality (every term's multipliers form a
//! convex combination of its active pieces, row multipliers have the right
//! sign) or identifies an edge along which the objective decreases. Along an
//! edge the objective is a one-dimensional convex piecewise-linear function;
//! the step goes to its minimizing breakpoint, which supplies the hyperplane
//! that replaces the one left behind. Terms that own a basis kink may not
//! switch piece during a step, which keeps every basis hyperplane a genuine
//! kink. Offsets and row bounds are perturbed slightly so vertices are
//! simple; the optimal basis is then re-checked against the exact data.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::{DMatrix, DVector};

use super::LpError;

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Consecutive degenerate steps before the leaving hyperplane is drawn at
    /// random among the improving candidates.
    pub randomize_after: usize,
    /// Relative size of the offset and bound perturbation that removes ties.
    pub perturbation: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { max_iterations: 500_000, randomize_after: 25, perturbation: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct RangeRow {
    pub coefs: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Default)]
pub struct PolyhedralProgram {
    dim: usize,
    linear: Vec<f64>,
    weights: Vec<f64>,
    term_start: Vec<usize>,
    grads: Vec<f64>,
    offsets: Vec<f64>,
    rows: Vec<RangeRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyhedralSolution {
    pub z: Vec<f64>,
    pub objective: f64,
    /// Value of the dual certificate built from the final multipliers.
    pub dual_objective: f64,
    pub iterations: usize,
    pub degenerate_steps: usize,
}

impl PolyhedralProgram {
    pub fn new(dim: usize) -> Self {
        Self { dim, linear: vec![0.0; dim], term_start: vec![0], ..Default::default() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_terms(&self) -> usize {
        self.weights.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn set_linear(&mut self, c: Vec<f64>) {
        assert_eq!(c.len(), self.dim);
        self.linear = c;
    }

    /// Add `weight * max_k (grad_k'z + offset_k)`; returns the term index.
    pub fn add_term<G: AsRef<[f64]>>(&mut self, weight: f64, pieces: impl IntoIterator<Item = (G, f64)>) -> usize {
        assert!(weight > 0.0, "term weights must be positive");
        let before = self.offsets.len();
        for (g, h) in pieces {
            let g = g.as_ref();
            assert_eq!(g.len(), self.dim);
            self.grads.extend_from_slice(g);
            self.offsets.push(h);
        }
        assert!(self.offsets.len() > before, "a term needs at least one piece");
        self.weights.push(weight);
        self.term_start.push(self.offsets.len());
        self.weights.len() - 1
    }

    pub fn add_row(&mut self, coefs: Vec<f64>, lower: f64, upper: f64) {
        assert_eq!(coefs.len(), self.dim);
        assert!(lower <= upper);
        self.rows.push(RangeRow { coefs, lower, upper });
    }

    fn pieces(&self, term: usize) -> std::ops::Range<usize> {
        self.term_start[term]..self.term_start[term + 1]
    }

    fn grad(&self, piece: usize) -> &[f64] {
        &self.grads[piece * self.dim..(piece + 1) * self.dim]
    }

    fn piece_value(&self, piece: usize, z: &[f64]) -> f64 {
        dot(self.grad(piece), z) + self.offsets[piece]
    }

    pub fn term_value(&self, term: usize, z: &[f64]) -> f64 {
        self.pieces(term).map(|p| self.piece_value(p, z)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn objective(&self, z: &[f64]) -> f64 {
        let mut v = dot(&self.linear, z);
        for i in 0..self.num_terms() {
            v += self.weights[i] * self.term_value(i, z);
        }
        v
    }

    pub fn max_row_violation(&self, z: &[f64]) -> f64 {
        self.rows.iter().fold(0.0_f64, |acc, r| {
            let a = dot(&r.coefs, z);
            acc.max(r.lower - a).max(a - r.upper)
        })
    }

    /// Solve from `start`. Rows violated at `start` are first repaired by
    /// minimizing the total violation.
    pub fn solve(&self, start: &[f64], opts: &SolverOptions) -> Result<PolyhedralSolution, LpError> {
        if start.len() != self.dim {
            return Err(LpError::Malformed(format!("start has {} entries, expected {}", start.len(), self.dim)));
        }
        if start.iter().any(|v| !v.is_finite()) {
            return Err(LpError::Malformed("non-finite start point".into()));
        }
        let row_scale = 1.0 + self.rows.iter().fold(0.0_f64, |a, r| a.max(r.lower.abs().min(r.upper.abs())));
        let mut z0 = start.to_vec();
        if self.max_row_violation(&z0) > 1e-9 * row_scale {
            let repair = self.violation_program();
            let fixed = repair.solve_perturbed(z0, opts)?;
            if fixed.objective > 1e-8 * row_scale {
                return Err(LpError::Infeasible);
            }
            z0 = fixed.z;
        }
        self.solve_perturbed(z0, opts)
    }

    /// Solve a copy whose offsets and row bounds carry tiny random shifts, so
    /// that vertices are generically simple, then carry the optimal basis
    /// back to the exact data and confirm it there.
    fn solve_perturbed(&self, z0: Vec<f64>, opts: &SolverOptions) -> Result<PolyhedralSolution, LpError> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x9e37_79b9);
        let eps = opts.perturbation;
        let mut shifted = self.clone();
        if eps > 0.0 {
            for i in 0..self.num_terms() {
                let range = self.pieces(i);
                let scale = 1.0 + self.offsets[range.clone()].iter().fold(0.0_f64, |a, h| a.max(h.abs()));
                for k in range {
                    shifted.offsets[k] += eps * scale * rng.random::<f64>();
                }
            }
            for r in &mut shifted.rows {
                r.lower -= eps * (1.0 + r.lower.abs()) * rng.random::<f64>();
                r.upper += eps * (1.0 + r.upper.abs()) * rng.random::<f64>();
            }
        }
        let mut solver = Solver::new(&shifted, z0, *opts);
        solver.run()?;
        solver.retarget(self);
        let mult = solver.run()?;
        Ok(solver.finish(&mult))
    }

    fn violation_program(&self) -> PolyhedralProgram {
        let mut p = PolyhedralProgram::new(self.dim);
        let zero = vec![0.0; self.dim];
        for r in &self.rows {
            let mut pieces: Vec<(Vec<f64>, f64)> = vec![(zero.clone(), 0.0)];
            if r.upper.is_finite() {
                pieces.push((r.coefs.clone(), -r.upper));
            }
            if r.lower.is_finite() {
                pieces.push((r.coefs.iter().map(|v| -v).collect(), r.lower));
            }
            p.add_term(1.0, pieces);
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Hyper {
    /// Piece `piece` of `term` tied with the term's base piece.
    Kink {
        term: usize,
        piece: usize,
    },
    Upper(usize),
    Lower(usize),
    /// Flat direction fixed at its current level.
    Pin {
        normal: Vec<f64>,
        value: f64,
    },
}

enum Leave {
    Hyper(usize),
    /// Drop the base piece of a term; its first basis kink becomes the base.
    Rebase(usize),
}

enum Step {
    Stop { t: f64, entering: Entering, current: Vec<usize> },
    Increasing,
    Flat,
    Unbounded,
}

enum Entering {
    Kink { term: usize, from: usize, to: usize },
    Row(Hyper),
}

struct Solver<'a> {
    p: &'a PolyhedralProgram,
    opts: SolverOptions,
    z: Vec<f64>,
    values: Vec<f64>,
    base: Vec<usize>,
    kinks: Vec<u32>,
    row_active: Vec<bool>,
    basis: Vec<Hyper>,
    iterations: usize,
    degenerate: usize,
    degenerate_run: usize,
    rng: rand_chacha::ChaCha8Rng,
}

impl<'a> Solver<'a> {
    fn new(p: &'a PolyhedralProgram, z: Vec<f64>, opts: SolverOptions) -> Self {
        let mut s = Self {
            p,
            opts,
            z,
            values: vec![0.0; p.offsets.len()],
            base: vec![0; p.num_terms()],
            kinks: vec![0; p.num_terms()],
            row_active: vec![false; p.rows.len()],
            basis: Vec::new(),
            iterations: 0,
            degenerate: 0,
            degenerate_run: 0,
            rng: rand::SeedableRng::seed_from_u64(0x5eed),
        };
        s.refresh_values();
        for i in 0..p.num_terms() {
            s.base[i] = s.argmax(i);
        }
        s
    }

    /// Switch to a program with identical gradients and rows but different
    /// offsets or bounds, keeping the basis and every term's base piece. The
    /// multipliers depend only on those, so an optimal basis stays optimal.
    fn retarget(&mut self, p: &'a PolyhedralProgram) {
        self.p = p;
        self.refresh_values();
        self.degenerate_run = 0;
    }

    fn refresh_values(&mut self) {
        for piece in 0..self.values.len() {
            self.values[piece] = self.p.piece_value(piece, &self.z);
        }
    }

    fn argmax(&self, term: usize) -> usize {
        let mut best = self.p.term_start[term];
        for k in self.p.pieces(term) {
            if self.values[k] > self.values[best] {
                best = k;
            }
        }
        best
    }

    fn normal(&self, h: &Hyper) -> Vec<f64> {
        match h {
            Hyper::Kink { term, piece } => {
                let gb = self.p.grad(self.base[*term]);
                self.p.grad(*piece).iter().zip(gb).map(|(a, b)| a - b).collect()
            }
            Hyper::Upper(r) | Hyper::Lower(r) => self.p.rows[*r].coefs.clone(),
            Hyper::Pin { normal, .. } => normal.clone(),
        }
    }

    fn level(&self, h: &Hyper) -> f64 {
        match h {
            Hyper::Kink { term, piece } => self.p.offsets[self.base[*term]] - self.p.offsets[*piece],
            Hyper::Upper(r) => self.p.rows[*r].upper,
            Hyper::Lower(r) => self.p.rows[*r].lower,
            Hyper::Pin { value, .. } => *value,
        }
    }

    fn basis_matrix(&self) -> DMatrix<f64> {
        let d = self.p.dim;
        let mut m = DMatrix::zeros(self.basis.len(), d);
        for (r, h) in self.basis.iter().enumerate() {
            for (c, v) in self.normal(h).into_iter().enumerate() {
                m[(r, c)] = v;
            }
        }
        m
    }

    /// `c + sum_i w_i g_{i, base_i}`.
    fn base_gradient(&self) -> Vec<f64> {
        let mut q = self.p.linear.clone();
        for i in 0..self.p.num_terms() {
            let w = self.p.weights[i];
            for (qc, g) in q.iter_mut().zip(self.p.grad(self.base[i])) {
                *qc += w * g;
            }
        }
        q
    }

    fn failure(&self, reason: &str) -> LpError {
        LpError::NumericalFailure { iterations: self.iterations, reason: reason.into() }
    }

    /// Iterate to an optimal vertex; returns the final basis multipliers.
    fn run(&mut self) -> Result<DVector<f64>, LpError> {
        let d = self.p.dim;
        loop {
            if self.iterations >= self.opts.max_iterations {
                return Err(self.failure("iteration cap reached"));
            }
            self.iterations += 1;
            if self.basis.len() < d {
                self.grow_basis()?;
                continue;
            }

            let m = self.basis_matrix();
            let lu = m.clone().lu();
            // Remove accumulated drift: put z exactly on its basis hyperplanes.
            let rhs = DVector::from_iterator(d, self.basis.iter().map(|h| self.level(h)));
            let snapped = lu.solve(&rhs).ok_or_else(|| self.failure("singular vertex basis"))?;
            self.z.copy_from_slice(snapped.as_slice());
            self.refresh_values();

            let q = DVector::from_vec(self.base_gradient());
            let mult = m.transpose().lu().solve(&(-&q)).ok_or_else(|| self.failure("singular multiplier system"))?;

            let Some((leave, signs)) = self.choose_leaving(&mult, &q, &lu) else {
                return Ok(mult);
            };
            let dir = lu.solve(&signs).ok_or_else(|| self.failure("singular edge system"))?;
            let dir: Vec<f64> = dir.iter().copied().collect();

            let released = match leave {
                Leave::Hyper(h) => {
                    let gone = self.basis.remove(h);
                    match gone {
                        Hyper::Kink { term, .. } => {
                            self.kinks[term] -= 1;
                            Some(term)
                        }
                        Hyper::Upper(r) | Hyper::Lower(r) => {
                            self.row_active[r] = false;
                            None
                        }
                        Hyper::Pin { .. } => None,
                    }
                }
                Leave::Rebase(term) => {
                    let pos = self
                        .basis
                        .iter()
                        .position(|h| matches!(h, Hyper::Kink { term: t, .. } if *t == term))
                        .expect("rebased term owns a kink");
                    let Hyper::Kink { piece, .. } = self.basis.remove(pos) else { unreachable!() };
                    self.base[term] = piece;
                    self.kinks[term] -= 1;
                    Some(term)
                }
            };

            match self.line_search(&dir, released) {
                Step::Stop { t, entering, current } => self.apply(&dir, t, entering, current),
                Step::Unbounded => return Err(LpError::Unbounded),
                Step::Increasing | Step::Flat => {
                    return Err(self.failure("edge with negative multiplier is not a descent edge"))
                }
            }
        }
    }

    /// With fewer than `dim` active hyperplanes, move within their
    /// intersection until a new hyperplane becomes active.
    fn grow_basis(&mut self) -> Result<(), LpError> {
        let d = self.p.dim;
        let m = self.basis_matrix();
        let project = |v: &DVector<f64>| -> DVector<f64> {
            if m.nrows() == 0 {
                return v.clone();
            }
            let mmt = &m * m.transpose();
            let lu = mmt.lu();
            let mut out = v.clone();
            for _ in 0..2 {
                let coef = lu.solve(&(&m * &out)).unwrap_or_else(|| DVector::zeros(m.nrows()));
                out -= m.transpose() * coef;
            }
            out
        };
        let q = DVector::from_vec(self.base_gradient());
        let mut candidates: Vec<DVector<f64>> = vec![-project(&q)];
        for j in 0..d {
            let mut e = DVector::zeros(d);
            e[j] = 1.0;
            candidates.push(project(&e));
        }
        let qn = q.norm();
        for (ci, cand) in candidates.into_iter().enumerate() {
            let norm = cand.norm();
            let big_enough = if ci == 0 { norm > 1e-9 * (1.0 + qn) } else { norm > 1e-6 };
            if !big_enough {
                continue;
            }
            let dir: Vec<f64> = cand.iter().map(|v| v / norm).collect();
            let back: Vec<f64> = dir.iter().map(|v| -v).collect();
            let mut flat = 0;
            for dvec in [dir.clone(), back] {
                match self.line_search(&dvec, None) {
                    Step::Stop { t, entering, current } => {
                        self.apply(&dvec, t, entering, current);
                        return Ok(());
                    }
                    Step::Unbounded => return Err(LpError::Unbounded),
                    Step::Flat => flat += 1,
                    Step::Increasing => {}
                }
            }
            if flat == 2 {
                let value = dot(&dir, &self.z);
                self.basis.push(Hyper::Pin { normal: dir, value });
                return Ok(());
            }
        }
        Err(self.failure("no admissible direction from a non-vertex point"))
    }

    fn choose_leaving(
        &mut self,
        mult: &DVector<f64>,
        q: &DVector<f64>,
        lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    ) -> Option<(Leave, DVector<f64>)> {
        let d = self.p.dim;
        let mtol = 1e-11 * (1.0 + q.amax());
        // (leave, signs, derivative)
        let mut cands: Vec<(Leave, DVector<f64>, f64)> = Vec::new();
        let mut term_sum: Vec<(usize, f64)> = Vec::new();
        for (h, hyp) in self.basis.iter().enumerate() {
            let mh = mult[h];
            let (sign, deriv) = match hyp {
                Hyper::Kink { term, .. } => {
                    match term_sum.iter_mut().find(|(t, _)| t == term) {
                        Some(e) => e.1 += mh,
                        None => term_sum.push((*term, mh)),
                    }
                    let tol = mtol.max(1e-9 * self.p.weights[*term]);
                    if mh < -tol {
                        (-1.0, mh)
                    } else {
                        continue;
                    }
                }
                Hyper::Upper(_) if mh < -mtol => (-1.0, mh),
                Hyper::Lower(_) if mh > mtol => (1.0, -mh),
                Hyper::Pin { .. } if mh.abs() > mtol => (-mh.signum(), -mh.abs()),
                _ => continue,
            };
            let mut s = DVector::zeros(d);
            s[h] = sign;
            cands.push((Leave::Hyper(h), s, deriv));
        }
        for (term, sum) in term_sum {
            let w = self.p.weights[term];
            if sum > w + mtol.max(1e-9 * w) {
                let mut s = DVector::zeros(d);
                for (h, hyp) in self.basis.iter().enumerate() {
                    if matches!(hyp, Hyper::Kink { term: t, .. } if *t == term) {
                        s[h] = 1.0;
                    }
                }
                cands.push((Leave::Rebase(term), s, w - sum));
            }
        }
        if cands.is_empty() {
            return None;
        }
        let ci = if self.degenerate_run >= self.opts.randomize_after {
            rand::Rng::random_range(&mut self.rng, 0..cands.len())
        } else {
            let mut best: Option<(usize, f64)> = None;
            for (ci, (_, s, deriv)) in cands.iter().enumerate() {
                let norm = lu.solve(s).map(|v| v.norm()).unwrap_or(1.0).max(1e-300);
                let score = deriv / norm;
                if best.is_none_or(|(_, b)| score < b) {
                    best = Some((ci, score));
                }
            }
            best?.0
        };
        let (leave, s, _) = cands.swap_remove(ci);
        Some((leave, s))
    }

    /// `released` names a term that just lost a basis kink; the edge moves to
    /// the side where its base piece is the maximum, so it starts there.
    fn line_search(&self, dir: &[f64], released: Option<usize>) -> Step {
        let p = self.p;
        let slopes: Vec<f64> = (0..self.values.len()).map(|k| dot(p.grad(k), dir)).collect();
        let lin_slope = dot(&p.linear, dir);

        let active: Vec<usize> = self
            .basis
            .iter()
            .filter_map(|h| match h {
                Hyper::Kink { piece, .. } => Some(*piece),
                _ => None,
            })
            .collect();

        let mut scale = lin_slope.abs();
        let mut current = Vec::with_capacity(p.num_terms());
        let mut sigma = lin_slope;
        let mut heap: Vec<Event> = Vec::with_capacity(p.num_terms() + p.rows.len());
        for i in 0..p.num_terms() {
            let w = p.weights[i];
            let start = if self.kinks[i] > 0 || released == Some(i) {
                self.base[i]
            } else {
                let vmax = p.pieces(i).map(|k| self.values[k]).fold(f64::NEG_INFINITY, f64::max);
                let tie = 1e-11 * (1.0 + vmax.abs());
                let mut pick = None::<usize>;
                for k in p.pieces(i) {
                    if self.values[k] >= vmax - tie && pick.is_none_or(|b| slopes[k] < slopes[b]) {
                        pick = Some(k);
                    }
                }
                pick.expect("term has pieces")
            };
            current.push(start);
            sigma += w * slopes[start];
            scale += w * p.pieces(i).map(|k| slopes[k].abs()).fold(0.0, f64::max);
            if let Some((t, to)) = self.next_break(i, start, 0.0, &slopes, &active) {
                heap.push(Event { t, key: i, target: to });
            }
        }
        let nterms = p.num_terms();
        for (r, row) in p.rows.iter().enumerate() {
            if self.row_active[r] {
                continue;
            }
            let rate = dot(&row.coefs, dir);
            let act = dot(&row.coefs, &self.z);
            let rtol = 1e-12 * (1.0 + row.coefs.iter().fold(0.0_f64, |a, v| a.max(v.abs())));
            if rate > rtol && row.upper.is_finite() {
                let t = ((row.upper - act) / rate).max(0.0);
                heap.push(Event { t, key: nterms + 2 * r, target: 0 });
            } else if rate < -rtol && row.lower.is_finite() {
                let t = ((row.lower - act) / rate).max(0.0);
                heap.push(Event { t, key: nterms + 2 * r + 1, target: 0 });
            }
        }

        let stol = 1e-11 * scale + 1e-300;
        if sigma > stol {
            return Step::Increasing;
        }
        let flat_start = sigma >= -stol;
        let mut heap = BinaryHeap::from(heap);
        while let Some(ev) = heap.pop() {
            if ev.key >= nterms {
                let r = (ev.key - nterms) / 2;
                let h = if (ev.key - nterms).is_multiple_of(2) { Hyper::Upper(r) } else { Hyper::Lower(r) };
                return Step::Stop { t: ev.t, entering: Entering::Row(h), current };
            }
            let i = ev.key;
            let from = current[i];
            let to = ev.target;
            if self.kinks[i] > 0 {
                return Step::Stop { t: ev.t, entering: Entering::Kink { term: i, from, to }, current };
            }
            sigma += p.weights[i] * (slopes[to] - slopes[from]);
            current[i] = to;
            if flat_start || sigma >= -stol {
                return Step::Stop { t: ev.t, entering: Entering::Kink { term: i, from, to }, current };
            }
            if let Some((t, next)) = self.next_break(i, to, ev.t, &slopes, &active) {
                heap.push(Event { t, key: i, target: next });
            }
        }
        if sigma < -stol {
            Step::Unbounded
        } else {
            Step::Flat
        }
    }

    /// Next breakpoint of term `i` along the ray, starting on piece `from` at `t0`.
    fn next_break(&self, i: usize, from: usize, t0: f64, slopes: &[f64], active: &[usize]) -> Option<(f64, usize)> {
        let sc = slopes[from];
        let vc = self.values[from];
        let mut best: Option<(f64, usize)> = None;
        for k in self.p.pieces(i) {
            if k == from || active.contains(&k) {
                continue;
            }
            let ds = slopes[k] - sc;
            if ds <= 1e-13 * (1.0 + sc.abs() + slopes[k].abs()) {
                continue;
            }
            let t = ((vc - self.values[k]) / ds).max(t0);
            let better = match best {
                None => true,
                Some((bt, bk)) => {
                    let tie = 1e-12 * (1.0 + bt.abs());
                    t < bt - tie || (t <= bt + tie && slopes[k] < slopes[bk])
                }
            };
            if better {
                best = Some((t, k));
            }
        }
        best
    }

    fn apply(&mut self, dir: &[f64], t: f64, entering: Entering, current: Vec<usize>) {
        let dnorm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        let znorm = self.z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if t * dnorm <= 1e-12 * (1.0 + znorm) {
            self.degenerate += 1;
            self.degenerate_run += 1;
        } else {
            self.degenerate_run = 0;
        }
        for (zc, dc) in self.z.iter_mut().zip(dir) {
            *zc += t * dc;
        }
        self.refresh_values();
        for (i, cur) in current.into_iter().enumerate() {
            if self.kinks[i] == 0 {
                self.base[i] = cur;
            }
        }
        match entering {
            Entering::Kink { term, from, to } => {
                if self.kinks[term] == 0 {
                    self.base[term] = from;
                }
                self.kinks[term] += 1;
                self.basis.push(Hyper::Kink { term, piece: to });
            }
            Entering::Row(h) => {
                if let Hyper::Upper(r) | Hyper::Lower(r) = h {
                    self.row_active[r] = true;
                }
                self.basis.push(h);
            }
        }
    }

    fn finish(self, mult: &DVector<f64>) -> PolyhedralSolution {
        let p = self.p;
        let mut dual = 0.0;
        let mut used = vec![0.0; p.num_terms()];
        for (h, hyp) in self.basis.iter().enumerate() {
            let mh = mult[h];
            match hyp {
                Hyper::Kink { term, piece } => {
                    used[*term] += mh;
                    dual += mh * p.offsets[*piece];
                }
                Hyper::Upper(r) => dual -= mh * p.rows[*r].upper,
                Hyper::Lower(r) => dual -= mh * p.rows[*r].lower,
                Hyper::Pin { value, .. } => dual -= mh * value,
            }
        }
        for i in 0..p.num_terms() {
            dual += (p.weights[i] - used[i]) * p.offsets[self.base[i]];
        }
        PolyhedralSolution {
            objective: p.objective(&self.z),
            dual_objective: dual,
            z: self.z,
            iterations: self.iterations,
            degenerate_steps: self.degenerate,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Event {
    t: f64,
    key: usize,
    target: usize,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed so the max-heap pops the earliest event, then the lowest key.
    fn cmp(&self, other: &Self) -> Ordering {
        other.t.total_cmp(&self.t).then_with(|| other.key.cmp(&self.key))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn absolute_value_minimum() {
        // min |z - 3| + 0.5 |z + 1|  -> z = 3, value 2
        let mut p = PolyhedralProgram::new(1);
        p.add_term(1.0, [(vec![1.0], -3.0), (vec![-1.0], 3.0)]);
        p.add_term(0.5, [(vec![1.0], 1.0), (vec![-1.0], -1.0)]);
        let s = p.solve(&[0.0], &SolverOptions::default()).unwrap();
        assert!((s.z[0] - 3.0).abs() < 1e-12);
        assert!((s.objective - 2.0).abs() < 1e-12);
        assert!((s.dual_objective - 2.0).abs() < 1e-12);
    }

    #[test]
    fn row_bounds_bind() {
        // min -z subject to z <= 4
        let mut p = PolyhedralProgram::new(1);
        p.set_linear(vec![-1.0]);
        p.add_row(vec![1.0], f64::NEG_INFINITY, 4.0);
        let s = p.solve(&[0.0], &SolverOptions::default()).unwrap();
        assert!((s.z[0] - 4.0).abs() < 1e-12);
        assert!((s.dual_objective + 4.0).abs() < 1e-12);
    }

    #[test]
    fn unbounded_is_reported() {
        let mut p = PolyhedralProgram::new(1);
        p.set_linear(vec![-1.0]);
        assert_eq!(p.solve(&[0.0], &SolverOptions::default()), Err(LpError::Unbounded));
    }

    #[test]
    fn infeasible_rows_are_reported() {
        let mut p = PolyhedralProgram::new(1);
        p.add_row(vec![1.0], 2.0, 3.0);
        p.add_row(vec![1.0], 5.0, 6.0);
        assert_eq!(p.solve(&[0.0], &SolverOptions::default()), Err(LpError::Infeasible));
    }

    #[test]
    fn start_outside_rows_is_repaired() {
        let mut p = PolyhedralProgram::new(2);
        p.add_term(1.0, [(vec![1.0, 1.0], 0.0), (vec![-1.0, -1.0], 0.0)]);
        p.add_row(vec![1.0, 0.0], 1.0, 2.0);
        p.add_row(vec![0.0, 1.0], 1.0, 2.0);
        let s = p.solve(&[10.0, -10.0], &SolverOptions::default()).unwrap();
        assert!(p.max_row_violation(&s.z) < 1e-9);
        assert!((s.objective - 2.0).abs() < 1e-9);
    }

    fn epigraph_lp(p: &PolyhedralProgram) -> crate::lp::LpProblem {
        let d = p.dim;
        let n = d + p.num_terms();
        let mut obj = p.linear.clone();
        obj.extend_from_slice(&p.weights);
        let mut lp = crate::lp::LpProblem::new(n).with_objective(obj);
        lp.free_all();
        for i in 0..p.num_terms() {
            for k in p.pieces(i) {
                let mut row = p.grad(k).to_vec();
                row.resize(n, 0.0);
                row[d + i] = -1.0;
                lp.add_le(row, -p.offsets[k]);
            }
        }
        for r in &p.rows {
            let mut row = r.coefs.clone();
            row.resize(n, 0.0);
            if r.upper.is_finite() {
                lp.add_le(row.clone(), r.upper);
            }
            if r.lower.is_finite() {
                lp.add_ge(row, r.lower);
            }
        }
        lp
    }

    fn random_case(dim: usize, seed: u64, integer: bool) -> (PolyhedralProgram, Vec<f64>) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> f64 {
            if integer {
                rng.random_range(-3i32..=3) as f64
            } else {
                rng.random_range(-3.0..3.0)
            }
        };
        let mut p = PolyhedralProgram::new(dim);
        p.set_linear((0..dim).map(|_| draw(&mut rng)).collect());
        for _ in 0..rng.random_range(1..20) {
            let pieces: Vec<(Vec<f64>, f64)> = (0..rng.random_range(1..6))
                .map(|_| ((0..dim).map(|_| draw(&mut rng)).collect(), draw(&mut rng)))
                .collect();
            let w = if integer { 1.0 } else { rng.random_range(0.1..2.0) };
            p.add_term(w, pieces);
        }
        for j in 0..dim {
            let mut e = vec![0.0; dim];
            e[j] = 1.0;
            p.add_row(e, -5.0, 5.0);
        }
        let extra: Vec<f64> = (0..dim).map(|_| draw(&mut rng)).collect();
        p.add_row(extra, -2.0, f64::INFINITY);
        let start: Vec<f64> = (0..dim).map(|_| draw(&mut rng) * 3.0).collect();
        (p, start)
    }

    fn check_case(dim: usize, seed: u64, integer: bool) -> Result<(), String> {
        let (p, start) = random_case(dim, seed, integer);
        let dense = crate::lp::solve(&epigraph_lp(&p)).unwrap();
        match p.solve(&start, &SolverOptions::default()) {
            Ok(s) => {
                if dense.status != crate::lp::LpStatus::Optimal {
                    return Err(format!("dense status {:?}", dense.status));
                }
                if p.max_row_violation(&s.z) > 1e-7 {
                    return Err("row violation".into());
                }
                let tol = 1e-7 * (1.0 + dense.objective.abs());
                if (s.objective - dense.objective).abs() > tol {
                    return Err(format!("structured {} dense {}", s.objective, dense.objective));
                }
                if (s.dual_objective - s.objective).abs() > tol {
                    return Err(format!("dual {} primal {}", s.dual_objective, s.objective));
                }
                Ok(())
            }
            Err(LpError::Infeasible) if dense.status == crate::lp::LpStatus::Infeasible => Ok(()),
            Err(e) => Err(e.to_string()),
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(300))]
        #[test]
        fn matches_dense_simplex_on_epigraph(
            dim in 1usize..5,
            seed in proptest::prelude::any::<u64>(),
            integer in proptest::prelude::any::<bool>(),
        ) {
            let outcome = check_case(dim, seed, integer);
            proptest::prop_assert!(outcome.is_ok(), "{:?}", outcome);
        }
    }

    #[test]
    fn degenerate_integer_instance() {
        check_case(2, 14569691471407259170, true).unwrap();
        check_case(2, 5793900612531642247, false).unwrap();
        check_case(3, 5650240635336984614, true).unwrap();
        check_case(2, 4128096902512466736, true).unwrap();
    }

    #[test]
    fn flat_directions_are_pinned() {
        // The objective ignores z[1].
        let mut p = PolyhedralProgram::new(2);
        p.add_term(1.0, [(vec![1.0, 0.0], 0.0), (vec![-1.0, 0.0], 0.0)]);
        let s = p.solve(&[5.0, 7.0], &SolverOptions::default()).unwrap();
        assert!(s.objective.abs() < 1e-12);
    }
}
