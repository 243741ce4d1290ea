//! Branch-and-bound over binary variables.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::simplex::{LpOutcome, StandardForm};
use super::{BranchRule, MilpModel, MilpOptions, MilpSolution, NodeOrder, SolveStatus, VarKind};

/// Besides every node without an incumbent, the rounding heuristic runs on
/// nodes whose depth is a multiple of this.
const HEURISTIC_DEPTH_STRIDE: usize = 8;

struct Node {
    bound: f64,
    depth: usize,
    seq: usize,
    /// `(variable index, fixed value)` for every branching decision on the path.
    fixings: Vec<(usize, f64)>,
    values: Vec<f64>,
    order: NodeOrder,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap pops the greatest element.
    fn cmp(&self, other: &Self) -> Ordering {
        let primary = match self.order {
            NodeOrder::BestBound => other
                .bound
                .total_cmp(&self.bound)
                .then(self.depth.cmp(&other.depth)),
            NodeOrder::DepthFirst => self.depth.cmp(&other.depth),
        };
        primary.then(other.seq.cmp(&self.seq))
    }
}

/// Solves `model` to proven optimality over its binaries.
///
/// Infeasible and unbounded relaxations at the root are reported as such.
/// Exhausting `node_limit` returns the best incumbent found (if any) with
/// status [`SolveStatus::IterationLimit`].
pub fn solve_milp(model: &MilpModel, options: &MilpOptions) -> MilpSolution {
    let form = StandardForm::new(model);
    let base_lower: Vec<f64> = model.variables().iter().map(|v| v.lower).collect();
    let base_upper: Vec<f64> = model.variables().iter().map(|v| v.upper).collect();
    let binaries: Vec<usize> = model
        .variables()
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .map(|v| v.id.0)
        .collect();

    let mut lp_iterations = 0;
    let mut nodes = 0;
    let solve_node = |fixings: &[(usize, f64)], iters: &mut usize, nodes: &mut usize| -> LpOutcome {
        let mut lower = base_lower.clone();
        let mut upper = base_upper.clone();
        for &(j, v) in fixings {
            lower[j] = v;
            upper[j] = v;
        }
        let out = form.solve(&lower, &upper, &options.lp);
        *iters += out.iterations;
        *nodes += 1;
        out
    };

    let root = solve_node(&[], &mut lp_iterations, &mut nodes);
    match root.status {
        SolveStatus::Optimal => {}
        status => return MilpSolution::without_point(status, nodes, lp_iterations),
    }

    let mut heap = BinaryHeap::new();
    let mut seq = 0;
    heap.push(Node {
        bound: root.objective,
        depth: 0,
        seq,
        fixings: Vec::new(),
        values: root.values,
        order: options.node_order,
    });

    let mut incumbent: Option<(f64, Vec<f64>, Vec<(usize, f64)>)> = None;
    let mut hit_limit = false;

    while let Some(node) = heap.pop() {
        if let Some((best, _, _)) = &incumbent {
            if node.bound >= best - options.gap_tol {
                continue;
            }
        }
        let mut rounded = node.values.clone();
        let stuck = round_free(&form, &binaries, &mut rounded, options);
        let mut branch_var = pick_branch(&stuck, &node.values, options);
        if branch_var.is_none() {
            // every fractional binary rounds without breaking a row
            let objective = form.objective_value(&rounded);
            if incumbent.as_ref().map_or(true, |(best, _, _)| objective < *best) {
                let pins = binaries.iter().map(|&j| (j, rounded[j])).collect();
                incumbent = Some((objective, rounded, pins));
            }
            if objective <= node.bound + options.gap_tol {
                continue;
            }
            branch_var = pick_branch(&binaries, &node.values, options);
        }
        let Some(branch_var) = branch_var else {
            continue;
        };
        if incumbent.is_none() || node.depth % HEURISTIC_DEPTH_STRIDE == 0 {
            if let Some((objective, values)) =
                round_and_resolve(&form, &base_lower, &base_upper, &binaries, &node.values, options, &mut lp_iterations)
            {
                if incumbent.as_ref().map_or(true, |(best, _, _)| objective < *best) {
                    let pins = binaries.iter().map(|&j| (j, values[j])).collect();
                    incumbent = Some((objective, values, pins));
                    if node.bound >= objective - options.gap_tol {
                        continue;
                    }
                }
            }
        }
        if nodes >= options.node_limit {
            hit_limit = true;
            break;
        }
        for value in [0.0, 1.0] {
            let mut fixings = node.fixings.clone();
            fixings.push((branch_var, value));
            let child = solve_node(&fixings, &mut lp_iterations, &mut nodes);
            match child.status {
                SolveStatus::Optimal => {}
                SolveStatus::Infeasible => continue,
                // a bounded parent cannot have an unbounded child; treat any
                // other failure as exhausting the budget
                _ => {
                    hit_limit = true;
                    continue;
                }
            }
            if let Some((best, _, _)) = &incumbent {
                if child.objective >= best - options.gap_tol {
                    continue;
                }
            }
            seq += 1;
            heap.push(Node {
                bound: child.objective,
                depth: node.depth + 1,
                seq,
                fixings,
                values: child.values,
                order: options.node_order,
            });
        }
    }

    let status = if hit_limit {
        SolveStatus::IterationLimit
    } else {
        SolveStatus::Optimal
    };
    match incumbent {
        None if hit_limit => MilpSolution::without_point(status, nodes, lp_iterations),
        None => MilpSolution::without_point(SolveStatus::Infeasible, nodes, lp_iterations),
        Some((objective, values, fixings)) => {
            let (objective, values) = polish(
                &form,
                &base_lower,
                &base_upper,
                &binaries,
                &fixings,
                values,
                objective,
                options,
                &mut lp_iterations,
            );
            MilpSolution {
                status,
                values,
                objective,
                nodes_explored: nodes,
                lp_iterations,
            }
        }
    }
}

fn pick_branch(binaries: &[usize], values: &[f64], options: &MilpOptions) -> Option<usize> {
    let mut chosen = None;
    let mut best = f64::NEG_INFINITY;
    for &j in binaries {
        let v = values[j];
        let frac = (v - v.round()).abs();
        if frac <= options.integrality_tol {
            continue;
        }
        match options.branch_rule {
            BranchRule::FirstFractional => return Some(j),
            BranchRule::MostFractional => {
                // strict comparison keeps the lowest id on ties
                if frac > best {
                    best = frac;
                    chosen = Some(j);
                }
            }
        }
    }
    chosen
}

/// Re-solves the incumbent's LP with every binary pinned to its rounded value
/// so the returned point is exactly integral.
#[allow(clippy::too_many_arguments)]
fn polish(
    form: &StandardForm,
    base_lower: &[f64],
    base_upper: &[f64],
    binaries: &[usize],
    fixings: &[(usize, f64)],
    values: Vec<f64>,
    objective: f64,
    options: &MilpOptions,
    iterations: &mut usize,
) -> (f64, Vec<f64>) {
    let mut lower = base_lower.to_vec();
    let mut upper = base_upper.to_vec();
    for &j in binaries {
        let v = values[j].round().clamp(0.0, 1.0);
        lower[j] = v;
        upper[j] = v;
    }
    for &(j, v) in fixings {
        lower[j] = v;
        upper[j] = v;
    }
    let out = form.solve(&lower, &upper, &options.lp);
    *iterations += out.iterations;
    if out.status == SolveStatus::Optimal {
        (out.objective, out.values)
    } else {
        (objective, values)
    }
}

/// Rounds, in id order, every fractional binary whose rounding (nearest value
/// first) keeps all rows satisfied at `x`, updating `x` in place. Returns the
/// fractional binaries left over.
fn round_free(form: &StandardForm, binaries: &[usize], x: &mut [f64], options: &MilpOptions) -> Vec<usize> {
    let mut activity = form.activities(x);
    let tol = options.lp.feasibility_tol;
    let mut stuck = Vec::new();
    for &j in binaries {
        let v = x[j];
        if (v - v.round()).abs() <= options.integrality_tol {
            continue;
        }
        let nearest = v.round().clamp(0.0, 1.0);
        let fits = |target: f64| {
            let delta = target - v;
            form.column(j)
                .iter()
                .all(|&(i, a)| form.row_violation(i, activity[i] + a * delta) <= tol)
        };
        match [nearest, 1.0 - nearest].into_iter().find(|&t| fits(t)) {
            Some(target) => {
                for &(i, a) in form.column(j) {
                    activity[i] += a * (target - v);
                }
                x[j] = target;
            }
            None => stuck.push(j),
        }
    }
    stuck
}

/// Rounds the binaries of a relaxed point one at a time, each to the value
/// that adds the least row violation (nearest value on ties), then re-solves
/// the LP with every binary pinned. Returns the resulting feasible point.
fn round_and_resolve(
    form: &StandardForm,
    base_lower: &[f64],
    base_upper: &[f64],
    binaries: &[usize],
    relaxed: &[f64],
    options: &MilpOptions,
    iterations: &mut usize,
) -> Option<(f64, Vec<f64>)> {
    let mut x = relaxed.to_vec();
    let mut activity = form.activities(&x);
    let fractionality = |v: f64| (v - v.round()).abs();
    let mut order: Vec<usize> = binaries
        .iter()
        .copied()
        .filter(|&j| fractionality(x[j]) > options.integrality_tol)
        .collect();
    // settle the nearly integral ones first
    order.sort_by(|&a, &b| fractionality(x[a]).total_cmp(&fractionality(x[b])).then(a.cmp(&b)));
    for j in order {
        let nearest = x[j].round().clamp(0.0, 1.0);
        let added = |target: f64| -> f64 {
            let delta = target - x[j];
            form.column(j)
                .iter()
                .map(|&(i, a)| form.row_violation(i, activity[i] + a * delta) - form.row_violation(i, activity[i]))
                .sum()
        };
        let other = 1.0 - nearest;
        let target = if added(other) < added(nearest) - options.lp.feasibility_tol {
            other
        } else {
            nearest
        };
        let delta = target - x[j];
        for &(i, a) in form.column(j) {
            activity[i] += a * delta;
        }
        x[j] = target;
    }

    let mut lower = base_lower.to_vec();
    let mut upper = base_upper.to_vec();
    for &j in binaries {
        let v = x[j].round().clamp(0.0, 1.0);
        lower[j] = v;
        upper[j] = v;
    }
    let out = form.solve(&lower, &upper, &options.lp);
    *iterations += out.iterations;
    (out.status == SolveStatus::Optimal).then_some((out.objective, out.values))
}
