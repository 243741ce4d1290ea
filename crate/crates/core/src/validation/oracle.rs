//! Exhaustive enumeration of binary fixings for small scenarios.

use rayon::prelude::*;
use thiserror::Error;

use crate::formulation::{build_model, extract_schedule, FormulationError, Schedule};
use crate::milp::{LpOptions, MilpSolution, SolveStatus, VarKind};
use crate::milp::simplex::StandardForm;
use crate::scenario::Scenario;

/// Largest binary count the oracle accepts (2^14 LP solves).
pub const ORACLE_MAX_BINARIES: usize = 14;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("{binaries} binaries exceed the brute-force limit of {limit}")]
    TooLarge { binaries: usize, limit: usize },
    #[error("no binary assignment admits a feasible schedule")]
    Infeasible,
    #[error("a fixing left the LP {0}")]
    Lp(SolveStatus),
    #[error(transparent)]
    Formulation(#[from] FormulationError),
}

#[derive(Clone, Debug)]
pub struct BruteForce {
    pub objective: f64,
    pub schedule: Schedule,
    /// Winning value of every binary, in model variable order.
    pub assignment: Vec<bool>,
    /// Fixings whose LP was feasible.
    pub feasible_fixings: usize,
}

/// Solves `scenario` by fixing every combination of binaries and solving the
/// remaining LP. Among equal objectives the lexicographically smallest binary
/// vector wins, so the result does not depend on thread scheduling.
pub fn brute_force_optimum(scenario: &Scenario) -> Result<BruteForce, OracleError> {
    let (model, map) = build_model(scenario)?;
    let binaries: Vec<usize> = model
        .variables()
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .map(|v| v.id.0)
        .collect();
    let n = binaries.len();
    if n > ORACLE_MAX_BINARIES {
        return Err(OracleError::TooLarge {
            binaries: n,
            limit: ORACLE_MAX_BINARIES,
        });
    }

    let form = StandardForm::new(&model);
    let lower: Vec<f64> = model.variables().iter().map(|v| v.lower).collect();
    let upper: Vec<f64> = model.variables().iter().map(|v| v.upper).collect();
    let options = LpOptions::default();
    // bit n-1-k holds binary k, so mask order is lexicographic order
    let bit = |mask: u32, k: usize| mask >> (n - 1 - k) & 1 == 1;

    let outcomes: Vec<(u32, SolveStatus, f64, Vec<f64>)> = (0..1u32 << n)
        .into_par_iter()
        .filter_map(|mask| {
            let (mut lo, mut hi) = (lower.clone(), upper.clone());
            for (k, &j) in binaries.iter().enumerate() {
                let v = if bit(mask, k) { 1.0 } else { 0.0 };
                if v < lower[j] || v > upper[j] {
                    return None;
                }
                lo[j] = v;
                hi[j] = v;
            }
            let out = form.solve(&lo, &hi, &options);
            match out.status {
                SolveStatus::Infeasible => None,
                status => Some((mask, status, out.objective, out.values)),
            }
        })
        .collect();

    if let Some(o) = outcomes.iter().find(|o| o.1 != SolveStatus::Optimal) {
        return Err(OracleError::Lp(o.1));
    }
    let feasible_fixings = outcomes.len();
    let best = outcomes
        .into_iter()
        .min_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)))
        .ok_or(OracleError::Infeasible)?;

    let (mask, _, objective, values) = best;
    let solution = MilpSolution {
        status: SolveStatus::Optimal,
        values,
        objective,
        nodes_explored: 0,
        lp_iterations: 0,
    };
    let schedule = extract_schedule(scenario, &map, &solution)?;
    Ok(BruteForce {
        objective,
        schedule,
        assignment: (0..n).map(|k| bit(mask, k)).collect(),
        feasible_fixings,
    })
}
