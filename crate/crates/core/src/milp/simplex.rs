//! Bounded-variable revised simplex with an explicit dense basis inverse.
//!
//! Every row gets a logical variable (`a_i x + s_i = b_i`) whose bounds encode
//! the row sense, so variable bounds never become rows. Rows whose initial
//! logical value is out of range get an artificial, and a phase-1 pass drives
//! the artificials to zero before the real objective is priced.

use super::{LpOptions, MilpModel, MilpSolution, Sense, SolveStatus};

/// Steps shorter than this count as degenerate for the Bland switch.
const DEGENERATE_STEP: f64 = 1e-11;
/// Full reinversion of the basis after this many pivots.
const REFACTOR_INTERVAL: usize = 400;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum State {
    Basic,
    AtLower,
    AtUpper,
}

#[derive(Clone, Debug)]
pub(crate) struct LpOutcome {
    pub status: SolveStatus,
    /// Structural values; empty unless `status` is optimal.
    pub values: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

/// Row-equilibrated copy of a model's constraint matrix, shared across solves
/// that differ only in variable bounds.
#[derive(Clone, Debug)]
pub(crate) struct StandardForm {
    rows: usize,
    cols: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    senses: Vec<Sense>,
    cost: Vec<f64>,
}

impl StandardForm {
    pub fn new(model: &MilpModel) -> Self {
        let rows = model.num_constraints();
        let mut cols = vec![Vec::new(); model.num_variables()];
        let mut rhs = Vec::with_capacity(rows);
        let mut senses = Vec::with_capacity(rows);
        for (i, row) in model.constraints().iter().enumerate() {
            let max = row.terms.iter().fold(0.0f64, |m, &(_, a)| m.max(a.abs()));
            let scale = if max > 0.0 { 1.0 / max } else { 1.0 };
            for &(v, a) in &row.terms {
                if a != 0.0 {
                    cols[v.0].push((i, a * scale));
                }
            }
            rhs.push(row.rhs * scale);
            senses.push(row.sense);
        }
        Self {
            rows,
            cols,
            rhs,
            senses,
            cost: model.objective().to_vec(),
        }
    }

    /// Scaled entries `(row, coefficient)` of structural column `j`.
    pub fn column(&self, j: usize) -> &[(usize, f64)] {
        &self.cols[j]
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    /// Scaled row activities at `x`.
    pub fn activities(&self, x: &[f64]) -> Vec<f64> {
        let mut act = vec![0.0; self.rows];
        for (col, &xj) in self.cols.iter().zip(x) {
            if xj != 0.0 {
                for &(i, a) in col {
                    act[i] += a * xj;
                }
            }
        }
        act
    }

    /// Amount by which scaled row `i` is violated at `activity`.
    pub fn row_violation(&self, i: usize, activity: f64) -> f64 {
        let b = self.rhs[i];
        match self.senses[i] {
            Sense::Le => (activity - b).max(0.0),
            Sense::Ge => (b - activity).max(0.0),
            Sense::Eq => (activity - b).abs(),
        }
    }

    pub fn solve(&self, lower: &[f64], upper: &[f64], options: &LpOptions) -> LpOutcome {
        let mut s = Simplex::new(self, lower, upper, options);
        s.run()
    }
}

/// Solves the LP relaxation of `model`: binaries are treated as continuous
/// variables on their bounds.
pub fn solve_lp(model: &MilpModel, options: &LpOptions) -> MilpSolution {
    let (lower, upper): (Vec<f64>, Vec<f64>) =
        model.variables().iter().map(|v| (v.lower, v.upper)).unzip();
    let out = StandardForm::new(model).solve(&lower, &upper, options);
    MilpSolution {
        status: out.status,
        values: out.values,
        objective: out.objective,
        nodes_explored: 0,
        lp_iterations: out.iterations,
    }
}

struct Simplex<'a> {
    form: &'a StandardForm,
    opts: &'a LpOptions,
    m: usize,
    /// Structural variable count. Logical `i` lives at `n + i`, artificial `i` at `n + m + i`.
    n: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    /// Artificial column for row `i` is `sigma[i] * e_i`.
    sigma: Vec<f64>,
    state: Vec<State>,
    x: Vec<f64>,
    basis: Vec<usize>,
    /// Row-major `m x m` basis inverse.
    binv: Vec<f64>,
    iterations: usize,
    since_refactor: usize,
}

impl<'a> Simplex<'a> {
    fn new(form: &'a StandardForm, lower: &[f64], upper: &[f64], opts: &'a LpOptions) -> Self {
        let m = form.rows;
        let n = form.cols.len();
        let total = n + 2 * m;
        let mut lo = Vec::with_capacity(total);
        let mut hi = Vec::with_capacity(total);
        lo.extend_from_slice(lower);
        hi.extend_from_slice(upper);
        for sense in &form.senses {
            let (l, u) = match sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            lo.push(l);
            hi.push(u);
        }
        lo.extend(std::iter::repeat(0.0).take(m));
        hi.extend(std::iter::repeat(0.0).take(m));

        let mut state = vec![State::AtLower; total];
        let mut x = vec![0.0; total];
        x[..n].copy_from_slice(&lo[..n]);

        let mut residual = form.rhs.clone();
        for (j, col) in form.cols.iter().enumerate() {
            if x[j] != 0.0 {
                for &(i, a) in col {
                    residual[i] -= a * x[j];
                }
            }
        }

        let mut sigma = vec![1.0; m];
        let mut basis = Vec::with_capacity(m);
        let mut binv = vec![0.0; m * m];
        for (i, &r) in residual.iter().enumerate() {
            let logical = n + i;
            if r >= lo[logical] && r <= hi[logical] {
                state[logical] = State::Basic;
                x[logical] = r;
                basis.push(logical);
                binv[i * m + i] = 1.0;
            } else {
                let (bound, st) = if r < lo[logical] {
                    (lo[logical], State::AtLower)
                } else {
                    (hi[logical], State::AtUpper)
                };
                state[logical] = st;
                x[logical] = bound;
                let art = n + m + i;
                sigma[i] = if r > bound { 1.0 } else { -1.0 };
                hi[art] = f64::INFINITY;
                state[art] = State::Basic;
                x[art] = (r - bound).abs();
                basis.push(art);
                binv[i * m + i] = sigma[i];
            }
        }

        Self {
            form,
            opts,
            m,
            n,
            lower: lo,
            upper: hi,
            cost: vec![0.0; total],
            sigma,
            state,
            x,
            basis,
            binv,
            iterations: 0,
            since_refactor: 0,
        }
    }

    fn run(&mut self) -> LpOutcome {
        let (m, n) = (self.m, self.n);
        let artificial = n + m..n + 2 * m;

        if self.basis.iter().any(|b| artificial.contains(b)) {
            for j in artificial.clone() {
                self.cost[j] = 1.0;
            }
            if let Err(status) = self.iterate() {
                return self.fail(status);
            }
            self.recompute_basics();
            let worst = artificial.clone().map(|j| self.x[j]).fold(0.0, f64::max);
            if worst > self.opts.feasibility_tol {
                return self.fail(SolveStatus::Infeasible);
            }
            for j in artificial.clone() {
                self.cost[j] = 0.0;
                self.upper[j] = 0.0;
                if self.state[j] != State::Basic {
                    self.state[j] = State::AtLower;
                    self.x[j] = 0.0;
                }
            }
        }

        self.cost[..n].copy_from_slice(&self.form.cost);
        for round in 0..3 {
            if let Err(status) = self.iterate() {
                return self.fail(status);
            }
            if self.since_refactor > 0 {
                self.refactor();
            } else {
                self.recompute_basics();
            }
            if self.basics_within_bounds() || round == 2 {
                break;
            }
        }

        let values: Vec<f64> = (0..n)
            .map(|j| self.x[j].clamp(self.lower[j], self.upper[j]))
            .collect();
        let objective = values.iter().zip(&self.form.cost).map(|(x, c)| x * c).sum();
        LpOutcome {
            status: SolveStatus::Optimal,
            values,
            objective,
            iterations: self.iterations,
        }
    }

    fn fail(&self, status: SolveStatus) -> LpOutcome {
        LpOutcome {
            status,
            values: Vec::new(),
            objective: f64::NAN,
            iterations: self.iterations,
        }
    }

    fn basics_within_bounds(&self) -> bool {
        let tol = self.opts.feasibility_tol;
        self.basis.iter().all(|&b| {
            let v = self.x[b];
            v >= self.lower[b] - tol * (1.0 + self.lower[b].abs())
                && v <= self.upper[b] + tol * (1.0 + self.upper[b].abs())
        })
    }

    fn column(&self, j: usize) -> ColumnRef<'_> {
        let (n, m) = (self.n, self.m);
        if j < n {
            ColumnRef::Sparse(&self.form.cols[j])
        } else if j < n + m {
            ColumnRef::Unit(j - n, 1.0)
        } else {
            let i = j - n - m;
            ColumnRef::Unit(i, self.sigma[i])
        }
    }

    fn dot_column(&self, j: usize, y: &[f64]) -> f64 {
        match self.column(j) {
            ColumnRef::Sparse(c) => c.iter().map(|&(i, a)| y[i] * a).sum(),
            ColumnRef::Unit(i, a) => y[i] * a,
        }
    }

    /// `B^-1 a_j`
    fn ftran(&self, j: usize, out: &mut [f64]) {
        let m = self.m;
        out.fill(0.0);
        let mut add = |row: usize, a: f64| {
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.binv[i * m + row] * a;
            }
        };
        match self.column(j) {
            ColumnRef::Sparse(c) => c.iter().for_each(|&(r, a)| add(r, a)),
            ColumnRef::Unit(r, a) => add(r, a),
        }
    }

    /// Runs primal simplex on the current cost vector until no improving column remains.
    fn iterate(&mut self) -> Result<(), SolveStatus> {
        let m = self.m;
        let total = self.x.len();
        let opt_tol = self.opts.optimality_tol;
        let mut y = vec![0.0; m];
        let mut alpha = vec![0.0; m];
        let mut degenerate_run = 0usize;
        let mut bland = false;

        loop {
            if self.iterations >= self.opts.iteration_limit {
                return Err(SolveStatus::IterationLimit);
            }
            if self.since_refactor >= REFACTOR_INTERVAL {
                self.refactor();
            }

            y.fill(0.0);
            for (i, &b) in self.basis.iter().enumerate() {
                let cb = self.cost[b];
                if cb != 0.0 {
                    let row = &self.binv[i * m..(i + 1) * m];
                    for (yk, r) in y.iter_mut().zip(row) {
                        *yk += cb * r;
                    }
                }
            }

            let mut entering = None;
            let mut best = 0.0;
            for j in 0..total {
                let st = self.state[j];
                if st == State::Basic || self.upper[j] <= self.lower[j] {
                    continue;
                }
                let d = self.cost[j] - self.dot_column(j, &y);
                let improving = match st {
                    State::AtLower => d < -opt_tol,
                    State::AtUpper => d > opt_tol,
                    State::Basic => false,
                };
                if !improving {
                    continue;
                }
                if bland {
                    entering = Some(j);
                    break;
                }
                if d.abs() > best {
                    best = d.abs();
                    entering = Some(j);
                }
            }
            let Some(q) = entering else {
                return Ok(());
            };
            let dir = if self.state[q] == State::AtLower { 1.0 } else { -1.0 };
            self.ftran(q, &mut alpha);

            let step = self.ratio_test(q, dir, &alpha, bland)?;
            let t = match step {
                Step::Flip(t) | Step::Pivot(_, t) => t,
            };
            for (i, &a) in alpha.iter().enumerate() {
                if a != 0.0 {
                    let b = self.basis[i];
                    self.x[b] -= dir * t * a;
                }
            }
            match step {
                Step::Flip(_) => {
                    if dir > 0.0 {
                        self.state[q] = State::AtUpper;
                        self.x[q] = self.upper[q];
                    } else {
                        self.state[q] = State::AtLower;
                        self.x[q] = self.lower[q];
                    }
                }
                Step::Pivot(r, _) => {
                    self.x[q] += dir * t;
                    let leaving = self.basis[r];
                    if dir * alpha[r] > 0.0 {
                        self.state[leaving] = State::AtLower;
                        self.x[leaving] = self.lower[leaving];
                    } else {
                        self.state[leaving] = State::AtUpper;
                        self.x[leaving] = self.upper[leaving];
                    }
                    if leaving >= self.n + m {
                        // artificials never re-enter
                        self.upper[leaving] = 0.0;
                        self.state[leaving] = State::AtLower;
                        self.x[leaving] = 0.0;
                    }
                    self.state[q] = State::Basic;
                    self.basis[r] = q;
                    self.pivot_inverse(r, &alpha);
                }
            }
            self.iterations += 1;

            if t < DEGENERATE_STEP {
                degenerate_run += 1;
                if degenerate_run >= self.opts.degenerate_stall_limit {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
                bland = false;
            }
        }
    }

    fn ratio_test(&self, q: usize, dir: f64, alpha: &[f64], bland: bool) -> Result<Step, SolveStatus> {
        let ftol = self.opts.feasibility_tol;
        let ptol = self.opts.pivot_tol;
        let range = self.upper[q] - self.lower[q];

        // exact ratio for row i, or None when the row never blocks
        let exact = |i: usize| -> Option<f64> {
            let a = alpha[i];
            if a.abs() <= ptol {
                return None;
            }
            let b = self.basis[i];
            let delta = dir * a;
            if delta > 0.0 {
                let lo = self.lower[b];
                lo.is_finite().then(|| ((self.x[b] - lo) / delta).max(0.0))
            } else {
                let hi = self.upper[b];
                hi.is_finite().then(|| ((hi - self.x[b]) / -delta).max(0.0))
            }
        };

        if bland {
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.m {
                if let Some(r) = exact(i) {
                    let better = match best {
                        None => true,
                        Some((bi, bt)) => {
                            r < bt - 1e-12 || (r <= bt + 1e-12 && self.basis[i] < self.basis[bi])
                        }
                    };
                    if better {
                        best = Some((i, r));
                    }
                }
            }
            return match best {
                Some((_, t)) if range <= t => Ok(Step::Flip(range)),
                Some((i, t)) => Ok(Step::Pivot(i, t)),
                None if range.is_finite() => Ok(Step::Flip(range)),
                None => Err(SolveStatus::Unbounded),
            };
        }

        // Harris: relaxed bound first, then the largest pivot under it
        let mut relaxed = f64::INFINITY;
        let mut tightest = f64::INFINITY;
        for i in 0..self.m {
            let a = alpha[i];
            if a.abs() <= ptol {
                continue;
            }
            let b = self.basis[i];
            let delta = dir * a;
            let bound = if delta > 0.0 { self.lower[b] } else { self.upper[b] };
            if !bound.is_finite() {
                continue;
            }
            let slack = if delta > 0.0 { self.x[b] - bound } else { bound - self.x[b] };
            relaxed = relaxed.min((slack.max(0.0) + ftol * (1.0 + bound.abs())) / delta.abs());
            tightest = tightest.min(slack.max(0.0) / delta.abs());
        }
        if range <= tightest {
            return if range.is_finite() {
                Ok(Step::Flip(range))
            } else {
                Err(SolveStatus::Unbounded)
            };
        }
        let mut chosen: Option<(usize, f64)> = None;
        for i in 0..self.m {
            if let Some(r) = exact(i) {
                if r <= relaxed {
                    let better = match chosen {
                        None => true,
                        Some((ci, _)) => alpha[i].abs() > alpha[ci].abs(),
                    };
                    if better {
                        chosen = Some((i, r));
                    }
                }
            }
        }
        match chosen {
            Some((i, t)) => Ok(Step::Pivot(i, t)),
            None => Err(SolveStatus::Unbounded),
        }
    }

    fn pivot_inverse(&mut self, r: usize, alpha: &[f64]) {
        let m = self.m;
        let piv = alpha[r];
        let mut pivot_row: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
        for v in &mut pivot_row {
            *v /= piv;
        }
        let nz: Vec<usize> = (0..m).filter(|&k| pivot_row[k] != 0.0).collect();
        for (i, &a) in alpha.iter().enumerate() {
            if i == r || a == 0.0 {
                continue;
            }
            let row = &mut self.binv[i * m..(i + 1) * m];
            for &k in &nz {
                row[k] -= a * pivot_row[k];
            }
        }
        self.binv[r * m..(r + 1) * m].copy_from_slice(&pivot_row);
        self.since_refactor += 1;
    }

    /// `x_B = B^-1 (b - N x_N)`
    fn recompute_basics(&mut self) {
        let m = self.m;
        let mut rhs = self.form.rhs.clone();
        for j in 0..self.x.len() {
            if self.state[j] == State::Basic || self.x[j] == 0.0 {
                continue;
            }
            let xj = self.x[j];
            match self.column(j) {
                ColumnRef::Sparse(c) => c.iter().for_each(|&(i, a)| rhs[i] -= a * xj),
                ColumnRef::Unit(i, a) => rhs[i] -= a * xj,
            }
        }
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            let v: f64 = row.iter().zip(&rhs).map(|(a, b)| a * b).sum();
            self.x[self.basis[i]] = v;
        }
    }

    /// Rebuilds `B^-1` from the basis columns by Gauss-Jordan elimination.
    fn refactor(&mut self) {
        let m = self.m;
        let mut b = vec![0.0; m * m];
        for (k, &j) in self.basis.iter().enumerate() {
            match self.column(j) {
                ColumnRef::Sparse(c) => c.iter().for_each(|&(i, a)| b[i * m + k] = a),
                ColumnRef::Unit(i, a) => b[i * m + k] = a,
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let mut piv_row = col;
            let mut piv_val = b[col * m + col].abs();
            for r in col + 1..m {
                let v = b[r * m + col].abs();
                if v > piv_val {
                    piv_val = v;
                    piv_row = r;
                }
            }
            if piv_val == 0.0 {
                // singular basis: keep the product-form inverse
                return;
            }
            if piv_row != col {
                for k in 0..m {
                    b.swap(col * m + k, piv_row * m + k);
                    inv.swap(col * m + k, piv_row * m + k);
                }
            }
            let p = b[col * m + col];
            let brow: Vec<f64> = b[col * m..(col + 1) * m].iter().map(|v| v / p).collect();
            let irow: Vec<f64> = inv[col * m..(col + 1) * m].iter().map(|v| v / p).collect();
            let bnz: Vec<usize> = (0..m).filter(|&k| brow[k] != 0.0).collect();
            let inz: Vec<usize> = (0..m).filter(|&k| irow[k] != 0.0).collect();
            for r in 0..m {
                if r == col {
                    continue;
                }
                let f = b[r * m + col];
                if f == 0.0 {
                    continue;
                }
                for &k in &bnz {
                    b[r * m + k] -= f * brow[k];
                }
                for &k in &inz {
                    inv[r * m + k] -= f * irow[k];
                }
            }
            b[col * m..(col + 1) * m].copy_from_slice(&brow);
            inv[col * m..(col + 1) * m].copy_from_slice(&irow);
        }
        // the row operations that reduced B to I, applied to I, give B^-1
        self.binv = inv;
        self.since_refactor = 0;
        self.recompute_basics();
    }
}

enum ColumnRef<'a> {
    Sparse(&'a [(usize, f64)]),
    Unit(usize, f64),
}

enum Step {
    Flip(f64),
    Pivot(usize, f64),
}
