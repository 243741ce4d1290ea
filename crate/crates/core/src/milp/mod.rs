//! Mixed-integer linear programs over continuous and binary variables.
//!
//! Models are always minimizations. [`solve_lp`] drops integrality and runs a
//! bounded-variable revised simplex; [`solve_milp`] wraps it in a best-bound
//! branch-and-bound over the binary variables.

mod branch;
pub mod lp_format;
pub(crate) mod simplex;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use branch::solve_milp;
pub use simplex::solve_lp;

/// Index of a variable inside its [`MilpModel`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub id: VarId,
    pub kind: VarKind,
    pub lower: f64,
    /// May be `f64::INFINITY`; lower bounds are always finite.
    pub upper: f64,
    pub name: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearConstraint {
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    /// Free-form label, e.g. `balance[3]`. The part before `[` names the row family.
    pub tag: String,
}

impl LinearConstraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, a)| a * values[v.0]).sum()
    }

    /// Absolute amount by which `values` violates this row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }

    pub fn family(&self) -> &str {
        self.tag.split('[').next().unwrap_or(&self.tag)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("variable `{name}`: lower bound {lower} exceeds upper bound {upper}")]
    InvertedBounds { name: String, lower: f64, upper: f64 },
    #[error("variable `{name}`: bounds must be finite (upper may be +inf), got [{lower}, {upper}]")]
    NonFiniteBound { name: String, lower: f64, upper: f64 },
    #[error("binary variable `{name}`: bounds [{lower}, {upper}] leave [0, 1]")]
    BinaryOutOfRange { name: String, lower: f64, upper: f64 },
    #[error("`{context}` references unknown variable {id}")]
    UnknownVariable { context: String, id: VarId },
    #[error("constraint `{tag}` lists variable {id} more than once")]
    DuplicateTerm { tag: String, id: VarId },
    #[error("`{context}` has a non-finite coefficient or right-hand side")]
    NonFiniteCoefficient { context: String },
}

/// A minimization problem: `min c'x  s.t.  rows, lower <= x <= upper, x_b in {0,1}`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MilpModel {
    variables: Vec<Variable>,
    constraints: Vec<LinearConstraint>,
    objective: Vec<f64>,
}

impl MilpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(
        &mut self,
        kind: VarKind,
        lower: f64,
        upper: f64,
        name: impl Into<String>,
    ) -> Result<VarId, ModelError> {
        let name = name.into();
        check_bounds(&name, kind, lower, upper)?;
        let id = VarId(self.variables.len());
        self.variables.push(Variable {
            id,
            kind,
            lower,
            upper,
            name,
        });
        self.objective.push(0.0);
        Ok(id)
    }

    pub fn add_constraint(
        &mut self,
        terms: Vec<(VarId, f64)>,
        sense: Sense,
        rhs: f64,
        tag: impl Into<String>,
    ) -> Result<usize, ModelError> {
        let tag = tag.into();
        if !rhs.is_finite() {
            return Err(ModelError::NonFiniteCoefficient { context: tag });
        }
        let mut seen = std::collections::BTreeSet::new();
        for &(id, coef) in &terms {
            if id.0 >= self.variables.len() {
                return Err(ModelError::UnknownVariable { context: tag, id });
            }
            if !coef.is_finite() {
                return Err(ModelError::NonFiniteCoefficient { context: tag });
            }
            if !seen.insert(id) {
                return Err(ModelError::DuplicateTerm { tag, id });
            }
        }
        self.constraints.push(LinearConstraint {
            terms,
            sense,
            rhs,
            tag,
        });
        Ok(self.constraints.len() - 1)
    }

    /// Adds `coef` to the objective coefficient of `id`.
    pub fn add_objective_term(&mut self, id: VarId, coef: f64) -> Result<(), ModelError> {
        if id.0 >= self.variables.len() {
            return Err(ModelError::UnknownVariable {
                context: "objective".into(),
                id,
            });
        }
        if !coef.is_finite() {
            return Err(ModelError::NonFiniteCoefficient {
                context: "objective".into(),
            });
        }
        self.objective[id.0] += coef;
        Ok(())
    }

    /// Tightens or replaces the bounds of an existing variable.
    pub fn set_bounds(&mut self, id: VarId, lower: f64, upper: f64) -> Result<(), ModelError> {
        let var = self
            .variables
            .get_mut(id.0)
            .ok_or_else(|| ModelError::UnknownVariable {
                context: "set_bounds".into(),
                id,
            })?;
        check_bounds(&var.name, var.kind, lower, upper)?;
        var.lower = lower;
        var.upper = upper;
        Ok(())
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    /// Dense objective coefficients, one per variable.
    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn binaries(&self) -> impl Iterator<Item = VarId> + '_ {
        self.variables
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .map(|v| v.id)
    }

    pub fn num_binaries(&self) -> usize {
        self.binaries().count()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().zip(values).map(|(c, x)| c * x).sum()
    }

    /// Rows and bounds violated by more than `tol * (1 + |rhs|)`, as
    /// `(tag, absolute violation)`.
    pub fn violations(&self, values: &[f64], tol: f64) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        for var in &self.variables {
            let x = values[var.id.0];
            let (v, bound) = if x < var.lower {
                (var.lower - x, var.lower)
            } else if x > var.upper {
                (x - var.upper, var.upper)
            } else {
                (0.0, 0.0)
            };
            if v > tol * (1.0 + bound.abs()) {
                out.push((format!("bound:{}", var.name), v));
            }
        }
        for row in &self.constraints {
            let v = row.violation(values);
            if v > tol * (1.0 + row.rhs.abs()) {
                out.push((row.tag.clone(), v));
            }
        }
        out
    }
}

fn check_bounds(name: &str, kind: VarKind, lower: f64, upper: f64) -> Result<(), ModelError> {
    if !lower.is_finite() || upper.is_nan() || upper == f64::NEG_INFINITY {
        return Err(ModelError::NonFiniteBound {
            name: name.to_string(),
            lower,
            upper,
        });
    }
    if lower > upper {
        return Err(ModelError::InvertedBounds {
            name: name.to_string(),
            lower,
            upper,
        });
    }
    if kind == VarKind::Binary && (lower < 0.0 || upper > 1.0) {
        return Err(ModelError::BinaryOutOfRange {
            name: name.to_string(),
            lower,
            upper,
        });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::IterationLimit => "iteration-limit",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MilpSolution {
    pub status: SolveStatus,
    /// One value per model variable. Empty when no feasible point is known.
    pub values: Vec<f64>,
    pub objective: f64,
    pub nodes_explored: usize,
    pub lp_iterations: usize,
}

impl MilpSolution {
    pub fn value(&self, id: VarId) -> f64 {
        self.values[id.0]
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub(crate) fn without_point(status: SolveStatus, nodes: usize, iterations: usize) -> Self {
        Self {
            status,
            values: Vec::new(),
            objective: f64::NAN,
            nodes_explored: nodes,
            lp_iterations: iterations,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpOptions {
    pub iteration_limit: usize,
    /// Primal feasibility tolerance on row-scaled constraints and bounds.
    pub feasibility_tol: f64,
    /// Reduced-cost threshold below which a column is not considered improving.
    pub optimality_tol: f64,
    pub pivot_tol: f64,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub degenerate_stall_limit: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            iteration_limit: 50_000,
            feasibility_tol: 1e-7,
            optimality_tol: 1e-9,
            pivot_tol: 1e-9,
            degenerate_stall_limit: 100,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchRule {
    /// Binary whose relaxed value is closest to 1/2; ties go to the lowest id.
    MostFractional,
    /// Lowest-id fractional binary.
    FirstFractional,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeOrder {
    /// Lowest relaxation bound first; ties go to the deeper node.
    BestBound,
    DepthFirst,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MilpOptions {
    pub integrality_tol: f64,
    /// Absolute optimality gap.
    pub gap_tol: f64,
    pub node_limit: usize,
    pub branch_rule: BranchRule,
    pub node_order: NodeOrder,
    pub lp: LpOptions,
}

impl Default for MilpOptions {
    fn default() -> Self {
        Self {
            integrality_tol: 1e-6,
            gap_tol: 1e-9,
            node_limit: 1_000_000,
            branch_rule: BranchRule::MostFractional,
            node_order: NodeOrder::BestBound,
            lp: LpOptions::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_variable_gets_id_zero() {
        let mut m = MilpModel::new();
        let id = m
            .add_variable(VarKind::Continuous, 0.0, f64::INFINITY, "Pgrid_1")
            .unwrap();
        assert_eq!(id, VarId(0));
        assert_eq!(m.num_variables(), 1);
    }

    #[test]
    fn binary_variable_keeps_its_kind() {
        let mut m = MilpModel::new();
        m.add_variable(VarKind::Continuous, 0.0, 1.0, "x").unwrap();
        let id = m.add_variable(VarKind::Binary, 0.0, 1.0, "uESS_3").unwrap();
        assert_eq!(m.variable(id).kind, VarKind::Binary);
        assert_eq!(m.num_binaries(), 1);
    }

    #[test]
    fn inverted_bounds_rejected() {
        let mut m = MilpModel::new();
        let err = m.add_variable(VarKind::Continuous, 5.0, 2.0, "bad").unwrap_err();
        assert!(matches!(err, ModelError::InvertedBounds { .. }));
        assert_eq!(m.num_variables(), 0);
    }

    #[test]
    fn non_finite_bounds_rejected() {
        let mut m = MilpModel::new();
        for (lo, hi) in [
            (f64::NEG_INFINITY, 1.0),
            (f64::NAN, 1.0),
            (0.0, f64::NAN),
            (f64::INFINITY, f64::INFINITY),
        ] {
            assert!(matches!(
                m.add_variable(VarKind::Continuous, lo, hi, "x"),
                Err(ModelError::NonFiniteBound { .. })
            ));
        }
        assert!(matches!(
            m.add_variable(VarKind::Binary, 0.0, 2.0, "u"),
            Err(ModelError::BinaryOutOfRange { .. })
        ));
    }

    #[test]
    fn constraint_rejects_unknown_and_duplicate_ids() {
        let mut m = MilpModel::new();
        let x = m.add_variable(VarKind::Continuous, 0.0, 1.0, "x").unwrap();
        assert!(matches!(
            m.add_constraint(vec![(VarId(3), 1.0)], Sense::Le, 1.0, "r"),
            Err(ModelError::UnknownVariable { .. })
        ));
        assert!(matches!(
            m.add_constraint(vec![(x, 1.0), (x, 2.0)], Sense::Le, 1.0, "r"),
            Err(ModelError::DuplicateTerm { .. })
        ));
        assert!(matches!(
            m.add_constraint(vec![(x, f64::NAN)], Sense::Le, 1.0, "r"),
            Err(ModelError::NonFiniteCoefficient { .. })
        ));
        assert!(m.add_objective_term(VarId(9), 1.0).is_err());
    }

    #[test]
    fn violation_and_family() {
        let mut m = MilpModel::new();
        let x = m.add_variable(VarKind::Continuous, 0.0, 10.0, "x").unwrap();
        m.add_constraint(vec![(x, 2.0)], Sense::Le, 4.0, "cap[7]").unwrap();
        let row = &m.constraints()[0];
        assert_eq!(row.family(), "cap");
        assert_eq!(row.violation(&[3.0]), 2.0);
        assert_eq!(row.violation(&[1.0]), 0.0);
        assert_eq!(m.violations(&[3.0], 1e-6).len(), 1);
        assert_eq!(m.violations(&[11.0], 1e-6).len(), 2);
    }
}
