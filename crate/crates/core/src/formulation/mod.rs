//! Compiles a [`Scenario`] into a [`MilpModel`] and maps solutions back to a
//! physical [`Schedule`].
//!
//! Row tags follow `family[index]`; the family prefixes are
//!
//! | prefix | rows |
//! |---|---|
//! | `balance` | power balance per interval |
//! | `ess_delivery`, `ess_charge_limit`, `ess_discharge_limit`, `ess_soe`, `ess_terminal` | stationary battery |
//! | `ev_delivery`, `ev_charge_limit`, `ev_discharge_limit`, `ev_soe`, `ev_departure` | EV, inside its window |
//! | `pv` | PV split into self-use and export |
//! | `export` | total export = PV + battery + EV export |
//! | `grid_buy_limit`, `grid_sell_limit` | buy/sell exclusivity |
//! | `shift_assign` | each deferrable block lands in exactly one interval |

mod schedule;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::milp::{
    solve_lp, solve_milp, LpOptions, MilpModel, MilpOptions, MilpSolution, ModelError, Sense,
    SolveStatus, VarId, VarKind,
};
use crate::scenario::{Scenario, StorageSpec};

pub use schedule::{
    assignment_values, compute_cost, extract_schedule, ApplianceShift, CostBreakdown, Schedule,
    ScheduleError, StorageTrace, SCHEDULE_HEADER,
};

/// Constraint groups shared by the model builder, the diagnosis and the auditor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Balance,
    Ess,
    Ev,
    Pv,
    Export,
    Exclusivity,
    Shifting,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::Balance,
        Family::Ess,
        Family::Ev,
        Family::Pv,
        Family::Export,
        Family::Exclusivity,
        Family::Shifting,
    ];

    /// Family of a model row, from its tag prefix.
    pub fn of_row(prefix: &str) -> Option<Family> {
        Some(match prefix {
            "balance" => Family::Balance,
            "pv" => Family::Pv,
            "export" => Family::Export,
            "grid_buy_limit" | "grid_sell_limit" => Family::Exclusivity,
            "shift_assign" => Family::Shifting,
            p if p.starts_with("ess_") => Family::Ess,
            p if p.starts_with("ev_") => Family::Ev,
            _ => return None,
        })
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Balance => "balance",
            Family::Ess => "ESS",
            Family::Ev => "EV",
            Family::Pv => "PV",
            Family::Export => "export",
            Family::Exclusivity => "exclusivity",
            Family::Shifting => "shifting",
        })
    }
}

/// Variable ids of one battery. Powers and `soe` are indexed by interval;
/// `mode` (1 = charging allowed) is `None` where the device is absent.
#[derive(Clone, Debug, PartialEq)]
pub struct StorageVars {
    pub charge: Vec<VarId>,
    pub discharge: Vec<VarId>,
    pub used: Vec<VarId>,
    pub sold: Vec<VarId>,
    pub soe: Vec<VarId>,
    pub mode: Vec<Option<VarId>>,
}

/// One deferrable block: the load normally drawn at `source` and the binaries
/// choosing where it runs.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftBlock {
    pub source: usize,
    pub load_kw: f64,
    /// `(destination interval, binary)`, destinations ascending from `source`.
    pub destinations: Vec<(usize, VarId)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ApplianceVars {
    pub adt_intervals: usize,
    /// Empty when the appliance cannot be delayed; its load is then constant.
    pub blocks: Vec<ShiftBlock>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VarMap {
    pub grid_buy: Vec<VarId>,
    pub grid_sell: Vec<VarId>,
    pub pv_used: Vec<VarId>,
    pub pv_sold: Vec<VarId>,
    pub u_grid: Vec<VarId>,
    pub ess: Option<StorageVars>,
    pub ev: Option<StorageVars>,
    pub appliances: Vec<ApplianceVars>,
    /// Total variable count of the model this map belongs to.
    pub num_variables: usize,
}

impl VarMap {
    pub fn intervals(&self) -> usize {
        self.grid_buy.len()
    }

    pub fn shift_binaries(&self) -> usize {
        self.appliances
            .iter()
            .flat_map(|a| &a.blocks)
            .map(|b| b.destinations.len())
            .sum()
    }
}

#[derive(Debug, Error)]
pub enum FormulationError {
    #[error("scenario: {0}")]
    Scenario(#[from] crate::scenario::ScenarioError),
    #[error("model construction: {0}")]
    Model(#[from] ModelError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("solution status is {0}, not optimal")]
    NotOptimal(SolveStatus),
}

struct Builder {
    model: MilpModel,
}

impl Builder {
    fn var(&mut self, kind: VarKind, lower: f64, upper: f64, name: String) -> Result<VarId, ModelError> {
        self.model.add_variable(kind, lower, upper, name)
    }

    fn power(&mut self, name: &str, t: usize, upper: f64) -> Result<VarId, ModelError> {
        self.var(VarKind::Continuous, 0.0, upper, format!("{name}[{t}]"))
    }

    fn row(&mut self, terms: Vec<(VarId, f64)>, sense: Sense, rhs: f64, tag: String) -> Result<(), ModelError> {
        self.model.add_constraint(terms, sense, rhs, tag).map(drop)
    }
}

/// Builds the scheduling MILP for a validated scenario.
pub fn build_model(scenario: &Scenario) -> Result<(MilpModel, VarMap), FormulationError> {
    scenario.validate()?;
    let t_len = scenario.intervals();
    let dt = scenario.dt();
    let mut b = Builder {
        model: MilpModel::new(),
    };
    let inf = f64::INFINITY;

    let mut map = VarMap {
        grid_buy: Vec::with_capacity(t_len),
        grid_sell: Vec::with_capacity(t_len),
        pv_used: Vec::with_capacity(t_len),
        pv_sold: Vec::with_capacity(t_len),
        u_grid: Vec::with_capacity(t_len),
        ess: None,
        ev: None,
        appliances: Vec::with_capacity(scenario.appliances.len()),
        num_variables: 0,
    };
    for t in 0..t_len {
        map.grid_buy.push(b.power("p_grid", t, inf)?);
        map.grid_sell.push(b.power("p_sold", t, inf)?);
        map.pv_used.push(b.power("pv_used", t, inf)?);
        map.pv_sold.push(b.power("pv_sold", t, inf)?);
        map.u_grid.push(b.var(VarKind::Binary, 0.0, 1.0, format!("u_grid[{t}]"))?);
    }
    if let Some(ess) = &scenario.ess {
        map.ess = Some(storage_vars(&mut b, "ess", ess, t_len, |_| true)?);
    }
    if let Some(ev) = &scenario.ev {
        map.ev = Some(storage_vars(&mut b, "ev", &ev.storage, t_len, |t| ev.is_present(t))?);
    }
    for (a, spec) in scenario.appliances.iter().enumerate() {
        let adt = scenario.adt_intervals(a);
        let mut blocks = Vec::new();
        if adt > 0 {
            for (s, &load) in spec.profile.iter().enumerate() {
                if load <= 0.0 {
                    continue;
                }
                let last = (s + adt).min(t_len - 1);
                let destinations = (s..=last)
                    .map(|d| {
                        b.var(VarKind::Binary, 0.0, 1.0, format!("u[{},{s},{d}]", spec.name))
                            .map(|id| (d, id))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                blocks.push(ShiftBlock {
                    source: s,
                    load_kw: load,
                    destinations,
                });
            }
        }
        map.appliances.push(ApplianceVars {
            adt_intervals: adt,
            blocks,
        });
    }

    // objective
    for t in 0..t_len {
        b.model.add_objective_term(map.grid_buy[t], scenario.tariff.buy[t] * dt)?;
        b.model.add_objective_term(map.grid_sell[t], -scenario.tariff.sell[t] * dt)?;
        b.model.add_objective_term(map.pv_sold[t], scenario.penalties.pv * dt)?;
        if let Some(ess) = &map.ess {
            b.model.add_objective_term(ess.sold[t], scenario.penalties.ess * dt)?;
        }
        if let Some(ev) = &map.ev {
            b.model.add_objective_term(ev.sold[t], scenario.penalties.ev * dt)?;
        }
    }

    // power balance with the deferrable load expanded over its landing blocks
    let mut landing: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); t_len];
    for app in &map.appliances {
        for block in &app.blocks {
            for &(d, u) in &block.destinations {
                landing[d].push((u, block.load_kw));
            }
        }
    }
    for t in 0..t_len {
        let fixed_load: f64 = scenario.non_deferrable[t]
            + scenario
                .appliances
                .iter()
                .zip(&map.appliances)
                .filter(|(_, v)| v.adt_intervals == 0)
                .map(|(a, _)| a.profile[t])
                .sum::<f64>();
        let mut terms = vec![(map.grid_buy[t], 1.0), (map.pv_used[t], 1.0)];
        for vars in [&map.ess, &map.ev].into_iter().flatten() {
            if vars.mode[t].is_some() {
                terms.push((vars.used[t], 1.0));
                terms.push((vars.charge[t], -1.0));
            }
        }
        terms.extend(landing[t].iter().map(|&(u, load)| (u, -load)));
        b.row(terms, Sense::Eq, fixed_load, format!("balance[{t}]"))?;
    }

    if let (Some(spec), Some(vars)) = (&scenario.ess, &map.ess) {
        let window: Vec<usize> = (0..t_len).collect();
        storage_rows(&mut b, "ess", spec, vars, &window, dt)?;
        if scenario.ess_terminal_reserve {
            b.row(
                vec![(vars.soe[t_len - 1], 1.0)],
                Sense::Ge,
                spec.soe_init_kwh,
                "ess_terminal[0]".into(),
            )?;
        }
    }
    if let (Some(ev), Some(vars)) = (&scenario.ev, &map.ev) {
        let window: Vec<usize> = ev.window().collect();
        storage_rows(&mut b, "ev", &ev.storage, vars, &window, dt)?;
        if ev.require_full_at_departure {
            b.row(
                vec![(vars.soe[ev.departure], 1.0)],
                Sense::Eq,
                ev.storage.soe_max_kwh,
                format!("ev_departure[{}]", ev.departure),
            )?;
        }
    }

    for t in 0..t_len {
        b.row(
            vec![(map.pv_used[t], 1.0), (map.pv_sold[t], 1.0)],
            Sense::Eq,
            scenario.pv_gen[t],
            format!("pv[{t}]"),
        )?;
        let mut terms = vec![(map.grid_sell[t], 1.0), (map.pv_sold[t], -1.0)];
        for vars in [&map.ess, &map.ev].into_iter().flatten() {
            if vars.mode[t].is_some() {
                terms.push((vars.sold[t], -1.0));
            }
        }
        b.row(terms, Sense::Eq, 0.0, format!("export[{t}]"))?;
    }

    let n1 = scenario.import_limit();
    let n2 = scenario.export_limit();
    for t in 0..t_len {
        b.row(
            vec![(map.grid_buy[t], 1.0), (map.u_grid[t], -n1)],
            Sense::Le,
            0.0,
            format!("grid_buy_limit[{t}]"),
        )?;
        b.row(
            vec![(map.grid_sell[t], 1.0), (map.u_grid[t], n2)],
            Sense::Le,
            n2,
            format!("grid_sell_limit[{t}]"),
        )?;
    }

    for (spec, app) in scenario.appliances.iter().zip(&map.appliances) {
        for block in &app.blocks {
            b.row(
                block.destinations.iter().map(|&(_, u)| (u, 1.0)).collect(),
                Sense::Eq,
                1.0,
                format!("shift_assign[{},{}]", spec.name, block.source),
            )?;
        }
    }

    map.num_variables = b.model.num_variables();
    Ok((b.model, map))
}

fn storage_vars(
    b: &mut Builder,
    prefix: &str,
    spec: &StorageSpec,
    t_len: usize,
    present: impl Fn(usize) -> bool,
) -> Result<StorageVars, ModelError> {
    let mut vars = StorageVars {
        charge: Vec::with_capacity(t_len),
        discharge: Vec::with_capacity(t_len),
        used: Vec::with_capacity(t_len),
        sold: Vec::with_capacity(t_len),
        soe: Vec::with_capacity(t_len),
        mode: Vec::with_capacity(t_len),
    };
    for t in 0..t_len {
        // absent intervals keep their variables, pinned to zero
        let on = present(t);
        let cap = |x: f64| if on { x } else { 0.0 };
        vars.charge.push(b.power(&format!("{prefix}_ch"), t, cap(spec.charge_rate_kw))?);
        vars.discharge.push(b.power(&format!("{prefix}_dis"), t, cap(spec.discharge_rate_kw))?);
        vars.used.push(b.power(&format!("{prefix}_used"), t, cap(f64::INFINITY))?);
        vars.sold.push(b.power(&format!("{prefix}_sold"), t, cap(f64::INFINITY))?);
        let (lo, hi) = if on {
            (spec.soe_min_kwh, spec.soe_max_kwh)
        } else {
            (0.0, 0.0)
        };
        vars.soe.push(b.var(VarKind::Continuous, lo, hi, format!("{prefix}_soe[{t}]"))?);
        vars.mode.push(if on {
            Some(b.var(VarKind::Binary, 0.0, 1.0, format!("u_{prefix}[{t}]"))?)
        } else {
            None
        });
    }
    Ok(vars)
}

/// Delivery split, mode-exclusive rate limits and the energy recursion over
/// `window` (consecutive intervals), starting from the initial energy.
fn storage_rows(
    b: &mut Builder,
    prefix: &str,
    spec: &StorageSpec,
    vars: &StorageVars,
    window: &[usize],
    dt: f64,
) -> Result<(), ModelError> {
    for (k, &t) in window.iter().enumerate() {
        let mode = vars.mode[t].expect("storage present inside its window");
        b.row(
            vec![
                (vars.used[t], 1.0),
                (vars.sold[t], 1.0),
                (vars.discharge[t], -spec.discharge_eff),
            ],
            Sense::Eq,
            0.0,
            format!("{prefix}_delivery[{t}]"),
        )?;
        b.row(
            vec![(vars.charge[t], 1.0), (mode, -spec.charge_rate_kw)],
            Sense::Le,
            0.0,
            format!("{prefix}_charge_limit[{t}]"),
        )?;
        b.row(
            vec![(vars.discharge[t], 1.0), (mode, spec.discharge_rate_kw)],
            Sense::Le,
            spec.discharge_rate_kw,
            format!("{prefix}_discharge_limit[{t}]"),
        )?;
        let mut terms = vec![
            (vars.soe[t], 1.0),
            (vars.charge[t], -spec.charge_eff * dt),
            (vars.discharge[t], dt),
        ];
        let rhs = if k == 0 {
            spec.soe_init_kwh
        } else {
            terms.push((vars.soe[window[k - 1]], -1.0));
            0.0
        };
        b.row(terms, Sense::Eq, rhs, format!("{prefix}_soe[{t}]"))?;
    }
    Ok(())
}

/// Why a model has no feasible schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnosis {
    /// Whether the continuous relaxation is feasible; if so the conflict is
    /// purely combinatorial.
    pub relaxation_feasible: bool,
    /// Families whose removal alone makes the relaxation feasible.
    pub culprits: Vec<Family>,
}

impl fmt::Display for Diagnosis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.relaxation_feasible {
            return f.write_str("no integral schedule exists although the relaxation is feasible");
        }
        if self.culprits.is_empty() {
            return f.write_str("constraints conflict across several families");
        }
        let names: Vec<String> = self.culprits.iter().map(Family::to_string).collect();
        write!(f, "conflicting constraint families: {}", names.join(", "))
    }
}

/// Locates the constraint families responsible for an infeasible model by
/// dropping each family in turn and re-solving the relaxation.
pub fn diagnose(model: &MilpModel, options: &LpOptions) -> Diagnosis {
    if solve_lp(model, options).status != SolveStatus::Infeasible {
        return Diagnosis {
            relaxation_feasible: true,
            culprits: Vec::new(),
        };
    }
    let culprits = Family::ALL
        .into_iter()
        .filter(|&family| {
            let reduced = without_family(model, family);
            reduced.num_constraints() < model.num_constraints()
                && solve_lp(&reduced, options).status != SolveStatus::Infeasible
        })
        .collect();
    Diagnosis {
        relaxation_feasible: false,
        culprits,
    }
}

fn without_family(model: &MilpModel, family: Family) -> MilpModel {
    let mut out = MilpModel::new();
    for v in model.variables() {
        out.add_variable(v.kind, v.lower, v.upper, v.name.clone())
            .expect("copied variables are valid");
    }
    for (j, &c) in model.objective().iter().enumerate() {
        if c != 0.0 {
            out.add_objective_term(VarId(j), c).expect("copied objective is valid");
        }
    }
    for row in model.constraints() {
        if Family::of_row(row.family()) != Some(family) {
            out.add_constraint(row.terms.clone(), row.sense, row.rhs, row.tag.clone())
                .expect("copied rows are valid");
        }
    }
    out
}

/// Everything produced by one scheduling run.
#[derive(Clone, Debug)]
pub struct Solved {
    pub model: MilpModel,
    pub map: VarMap,
    pub solution: MilpSolution,
    pub schedule: Schedule,
    pub cost: CostBreakdown,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error("infeasible: {0}")]
    Infeasible(Diagnosis),
    #[error("the model is unbounded")]
    Unbounded,
    #[error("solver limit reached after {nodes} nodes")]
    Limit { nodes: usize },
}

/// Builds, solves and decodes a scenario.
pub fn solve_scenario(scenario: &Scenario, options: &MilpOptions) -> Result<Solved, SolveError> {
    let (model, map) = build_model(scenario)?;
    let solution = solve_milp(&model, options);
    match solution.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => return Err(SolveError::Infeasible(diagnose(&model, &options.lp))),
        SolveStatus::Unbounded => return Err(SolveError::Unbounded),
        SolveStatus::IterationLimit => {
            return Err(SolveError::Limit {
                nodes: solution.nodes_explored,
            })
        }
    }
    let schedule = extract_schedule(scenario, &map, &solution)?;
    let cost = compute_cost(&schedule, &scenario.tariff, &scenario.penalties, scenario.dt())
        .map_err(FormulationError::from)?;
    Ok(Solved {
        model,
        map,
        solution,
        schedule,
        cost,
    })
}

#[cfg(test)]
mod tests;
