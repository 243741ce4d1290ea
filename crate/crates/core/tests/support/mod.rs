//! Independent oracles and instance generators shared by the integration tests.
#![allow(dead_code)]

use hems_core::milp::{MilpModel, Sense, VarId, VarKind};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Dense LP: `min c'x  s.t.  rows, lower <= x <= upper`, all bounds finite.
#[derive(Clone, Debug)]
pub struct DenseLp {
    pub cost: Vec<f64>,
    pub rows: Vec<(Vec<f64>, Sense, f64)>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl DenseLp {
    pub fn to_model(&self) -> MilpModel {
        let mut m = MilpModel::new();
        let ids: Vec<VarId> = (0..self.cost.len())
            .map(|j| {
                m.add_variable(VarKind::Continuous, self.lower[j], self.upper[j], format!("x{j}"))
                    .unwrap()
            })
            .collect();
        for (j, &c) in self.cost.iter().enumerate() {
            m.add_objective_term(ids[j], c).unwrap();
        }
        for (i, (a, sense, b)) in self.rows.iter().enumerate() {
            let terms = a
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(j, &v)| (ids[j], v))
                .collect();
            m.add_constraint(terms, *sense, *b, format!("r[{i}]")).unwrap();
        }
        m
    }

    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        for j in 0..x.len() {
            if x[j] < self.lower[j] - tol || x[j] > self.upper[j] + tol {
                return false;
            }
        }
        self.rows.iter().all(|(a, sense, b)| {
            let lhs: f64 = a.iter().zip(x).map(|(a, x)| a * x).sum();
            let t = tol * (1.0 + b.abs());
            match sense {
                Sense::Le => lhs <= b + t,
                Sense::Ge => lhs >= b - t,
                Sense::Eq => (lhs - b).abs() <= t,
            }
        })
    }
}

pub fn random_lp(rng: &mut ChaCha8Rng, max_vars: usize, max_rows: usize) -> DenseLp {
    let n = rng.gen_range(1..=max_vars);
    let m = rng.gen_range(1..=max_rows);
    let integer = rng.gen_bool(0.5);
    let coef = |rng: &mut ChaCha8Rng| -> f64 {
        if rng.gen_bool(0.3) {
            0.0
        } else if integer {
            rng.gen_range(-3..=3) as f64
        } else {
            rng.gen_range(-5.0..5.0)
        }
    };
    let lower: Vec<f64> = (0..n).map(|_| rng.gen_range(-2..=0) as f64).collect();
    let upper: Vec<f64> = lower
        .iter()
        .map(|l| l + rng.gen_range(0..=4) as f64)
        .collect();
    // a point inside the box; rows are built around it so most instances are feasible
    let anchor: Vec<f64> = lower
        .iter()
        .zip(&upper)
        .map(|(l, u)| if integer { rng.gen_range(*l as i64..=*u as i64) as f64 } else { rng.gen_range(*l..=*u) })
        .collect();
    let rows = (0..m)
        .map(|_| {
            let a: Vec<f64> = (0..n).map(|_| coef(rng)).collect();
            let at: f64 = a.iter().zip(&anchor).map(|(a, x)| a * x).sum();
            let sense = match rng.gen_range(0..5) {
                0 => Sense::Eq,
                1 | 2 => Sense::Le,
                _ => Sense::Ge,
            };
            let shift = if rng.gen_bool(0.1) {
                rng.gen_range(-6..=6) as f64
            } else {
                rng.gen_range(0..=2) as f64
            };
            let b = match sense {
                Sense::Le => at + shift,
                Sense::Ge => at - shift,
                Sense::Eq => at,
            };
            (a, sense, b)
        })
        .collect();
    let cost = (0..n).map(|_| coef(rng)).collect();
    DenseLp {
        cost,
        rows,
        lower,
        upper,
    }
}

/// Minimum over all basic solutions: choose the free variables and as many
/// active rows, pin the rest of the variables to a bound, and solve.
/// Returns `None` when no vertex is feasible.
pub fn vertex_enumeration(lp: &DenseLp) -> Option<f64> {
    let n = lp.cost.len();
    let m = lp.rows.len();
    let mut best: Option<f64> = None;

    for free_mask in 0u32..(1 << n) {
        let free: Vec<usize> = (0..n).filter(|j| free_mask >> j & 1 == 1).collect();
        let k = free.len();
        if k > m {
            continue;
        }
        let pinned: Vec<usize> = (0..n).filter(|j| free_mask >> j & 1 == 0).collect();
        for rows in combinations(m, k) {
            let mat: Vec<Vec<f64>> = rows
                .iter()
                .map(|&i| free.iter().map(|&j| lp.rows[i].0[j]).collect())
                .collect();
            let Some(lu) = Lu::factor(mat) else { continue };
            for bounds_mask in 0u32..(1 << pinned.len()) {
                let mut x = vec![0.0; n];
                for (p, &j) in pinned.iter().enumerate() {
                    x[j] = if bounds_mask >> p & 1 == 1 { lp.upper[j] } else { lp.lower[j] };
                }
                let rhs: Vec<f64> = rows
                    .iter()
                    .map(|&i| {
                        let (a, _, b) = &lp.rows[i];
                        b - pinned.iter().map(|&j| a[j] * x[j]).sum::<f64>()
                    })
                    .collect();
                let sol = lu.solve(rhs);
                for (f, &j) in free.iter().enumerate() {
                    x[j] = sol[f];
                }
                if lp.is_feasible(&x, 1e-9) {
                    let obj: f64 = lp.cost.iter().zip(&x).map(|(c, x)| c * x).sum();
                    if best.map_or(true, |b| obj < b) {
                        best = Some(obj);
                    }
                }
            }
        }
    }
    best
}

pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Small dense LU with partial pivoting.
struct Lu {
    a: Vec<Vec<f64>>,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(mut a: Vec<Vec<f64>>) -> Option<Self> {
        let k = a.len();
        let mut perm: Vec<usize> = (0..k).collect();
        for c in 0..k {
            let p = (c..k).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))?;
            if a[p][c].abs() < 1e-10 {
                return None;
            }
            a.swap(c, p);
            perm.swap(c, p);
            for r in c + 1..k {
                let f = a[r][c] / a[c][c];
                a[r][c] = f;
                for cc in c + 1..k {
                    a[r][cc] -= f * a[c][cc];
                }
            }
        }
        Some(Self { a, perm })
    }

    fn solve(&self, b: Vec<f64>) -> Vec<f64> {
        let k = self.a.len();
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 0..k {
            for c in 0..r {
                y[r] -= self.a[r][c] * y[c];
            }
        }
        for r in (0..k).rev() {
            for c in r + 1..k {
                y[r] -= self.a[r][c] * y[c];
            }
            y[r] /= self.a[r][r];
        }
        y
    }
}

/// Random MILP with `binaries` binaries and a few continuous variables.
pub fn random_milp(rng: &mut ChaCha8Rng, binaries: usize) -> MilpModel {
    let mut m = MilpModel::new();
    let mut vars = Vec::new();
    for j in 0..binaries {
        vars.push(m.add_variable(VarKind::Binary, 0.0, 1.0, format!("u{j}")).unwrap());
    }
    let continuous = rng.gen_range(0..=4);
    for j in 0..continuous {
        let ub = rng.gen_range(1..=5) as f64;
        vars.push(m.add_variable(VarKind::Continuous, 0.0, ub, format!("x{j}")).unwrap());
    }
    for &v in &vars {
        m.add_objective_term(v, rng.gen_range(-10.0..10.0)).unwrap();
    }
    let rows = rng.gen_range(1..=5);
    for i in 0..rows {
        let mut terms: Vec<(VarId, f64)> = Vec::new();
        for &v in &vars {
            if rng.gen_bool(0.6) {
                let a = rng.gen_range(-4..=6) as f64;
                if a != 0.0 {
                    terms.push((v, a));
                }
            }
        }
        if terms.is_empty() {
            continue;
        }
        let sense = if rng.gen_bool(0.75) { Sense::Le } else { Sense::Ge };
        let rhs = match sense {
            Sense::Le => rng.gen_range(0..=8) as f64 + 0.5,
            _ => rng.gen_range(-3..=3) as f64 + 0.5,
        };
        m.add_constraint(terms, sense, rhs, format!("r[{i}]")).unwrap();
    }
    m
}

/// Exhaustive MILP oracle: pin every binary combination and solve the rest as an LP.
pub fn milp_by_enumeration(model: &MilpModel) -> Option<f64> {
    use hems_core::milp::{solve_lp, LpOptions, SolveStatus};
    let binaries: Vec<VarId> = model.binaries().collect();
    let mut best: Option<f64> = None;
    for mask in 0u64..(1 << binaries.len()) {
        let mut fixed = model.clone();
        for (k, &b) in binaries.iter().enumerate() {
            let v = (mask >> k & 1) as f64;
            fixed.set_bounds(b, v, v).unwrap();
        }
        let s = solve_lp(&fixed, &LpOptions::default());
        if s.status == SolveStatus::Optimal && best.map_or(true, |b| s.objective < b) {
            best = Some(s.objective);
        }
    }
    best
}
