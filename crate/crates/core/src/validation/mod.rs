//! Independent checks of a schedule against the household physics.
//!
//! [`audit`] re-evaluates every constraint family from the scenario and the
//! schedule alone, without consulting the MILP model, so a bug in the model
//! builder cannot hide itself. [`brute_force_optimum`] is the matching
//! optimality oracle for small instances.

mod oracle;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::formulation::{Family, Schedule, ScheduleError, StorageTrace};
use crate::scenario::{Scenario, StorageSpec};

pub use oracle::{brute_force_optimum, BruteForce, OracleError, ORACLE_MAX_BINARIES};

/// Relative tolerance of the audit: a row passes when its residual is at most
/// `AUDIT_TOL * (1 + |rhs|)`.
pub const AUDIT_TOL: f64 = 1e-6;

/// One violated relation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Short name of the relation, e.g. `soe_recursion`.
    pub check: String,
    /// Interval and, where relevant, appliance, e.g. `t=5` or `dishwasher@t=3`.
    pub location: String,
    /// Absolute residual.
    pub residual: f64,
    /// Largest residual that would have passed.
    pub allowed: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyReport {
    pub family: Family,
    pub pass: bool,
    /// Largest absolute residual over the family, violating or not.
    pub worst: f64,
    /// Location of `worst`, if any row was checked.
    pub worst_at: Option<String>,
    pub violations: Vec<Violation>,
}

/// Audit outcome, one entry per family in [`Family::ALL`] order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub tolerance: f64,
    pub families: Vec<FamilyReport>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.families.iter().all(|f| f.pass)
    }

    pub fn family(&self, family: Family) -> &FamilyReport {
        self.families
            .iter()
            .find(|f| f.family == family)
            .expect("report covers every family")
    }

    pub fn failed_families(&self) -> Vec<Family> {
        self.families.iter().filter(|f| !f.pass).map(|f| f.family).collect()
    }

    pub fn violation_count(&self) -> usize {
        self.families.iter().map(|f| f.violations.len()).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for fam in &self.families {
            let verdict = if fam.pass { "pass" } else { "FAIL" };
            write!(f, "{:<12} {verdict}  worst {:.3e}", fam.family.to_string(), fam.worst)?;
            if let Some(at) = &fam.worst_at {
                write!(f, " at {at}")?;
            }
            writeln!(f)?;
            for v in &fam.violations {
                writeln!(f, "    {} at {}: {:.6e} > {:.1e}", v.check, v.location, v.residual, v.allowed)?;
            }
        }
        Ok(())
    }
}

struct Auditor {
    tol: f64,
    families: Vec<FamilyReport>,
}

impl Auditor {
    fn new(tol: f64) -> Self {
        let families = Family::ALL
            .into_iter()
            .map(|family| FamilyReport {
                family,
                pass: true,
                worst: 0.0,
                worst_at: None,
                violations: Vec::new(),
            })
            .collect();
        Auditor { tol, families }
    }

    /// Records a residual against a row whose right-hand side is `rhs`.
    fn residual(&mut self, family: Family, check: &str, location: impl Fn() -> String, residual: f64, rhs: f64) {
        let allowed = self.tol * (1.0 + rhs.abs());
        let residual = if residual.is_nan() { f64::INFINITY } else { residual };
        let fam = &mut self.families[Family::ALL.iter().position(|&f| f == family).unwrap()];
        if fam.worst_at.is_none() || residual > fam.worst {
            fam.worst = residual;
            fam.worst_at = Some(location());
        }
        if residual > allowed {
            fam.pass = false;
            fam.violations.push(Violation {
                check: check.to_string(),
                location: location(),
                residual,
                allowed,
            });
        }
    }

    fn equal(&mut self, family: Family, check: &str, location: impl Fn() -> String, lhs: f64, rhs: f64) {
        self.residual(family, check, location, (lhs - rhs).abs(), rhs);
    }

    fn at_most(&mut self, family: Family, check: &str, location: impl Fn() -> String, lhs: f64, rhs: f64) {
        self.residual(family, check, location, (lhs - rhs).max(0.0), rhs);
    }

    fn at_least(&mut self, family: Family, check: &str, location: impl Fn() -> String, lhs: f64, rhs: f64) {
        self.residual(family, check, location, (rhs - lhs).max(0.0), rhs);
    }
}

fn at(t: usize) -> impl Fn() -> String {
    move || format!("t={t}")
}

/// Audits `schedule` at the default tolerance.
pub fn audit(scenario: &Scenario, schedule: &Schedule) -> Result<AuditReport, ScheduleError> {
    audit_with_tolerance(scenario, schedule, AUDIT_TOL)
}

/// Re-checks every constraint family. Fails only when the schedule does not
/// have the scenario's shape; constraint violations are reported as data.
pub fn audit_with_tolerance(scenario: &Scenario, schedule: &Schedule, tol: f64) -> Result<AuditReport, ScheduleError> {
    schedule.check_shape(scenario)?;
    let mut a = Auditor::new(tol);
    let t_len = scenario.intervals();
    let dt = scenario.dt();
    let zero = StorageTrace::zeros(t_len);
    let ess = schedule.ess.as_ref().unwrap_or(&zero);
    let ev = schedule.ev.as_ref().unwrap_or(&zero);

    for t in 0..t_len {
        // power balance, with the load the schedule claims to serve
        let net_supply = schedule.grid_buy[t] + schedule.pv_used[t] + ess.used[t] + ev.used[t]
            - ess.charge[t]
            - ev.charge[t];
        a.equal(Family::Balance, "power_balance", at(t), net_supply, schedule.served_load[t]);
        for (name, v) in [("grid_buy", schedule.grid_buy[t]), ("grid_sell", schedule.grid_sell[t])] {
            a.at_least(Family::Balance, &format!("{name}_nonnegative"), at(t), v, 0.0);
        }

        a.equal(Family::Pv, "pv_split", at(t), schedule.pv_used[t] + schedule.pv_sold[t], scenario.pv_gen[t]);
        a.at_least(Family::Pv, "pv_used_nonnegative", at(t), schedule.pv_used[t], 0.0);
        a.at_least(Family::Pv, "pv_sold_nonnegative", at(t), schedule.pv_sold[t], 0.0);

        a.equal(
            Family::Export,
            "export_total",
            at(t),
            schedule.grid_sell[t] - schedule.pv_sold[t] - ess.sold[t] - ev.sold[t],
            0.0,
        );

        let simultaneous = |x: f64, y: f64| x.min(y).max(0.0);
        a.at_most(Family::Exclusivity, "buy_and_sell", at(t), simultaneous(schedule.grid_buy[t], schedule.grid_sell[t]), 0.0);
        a.at_most(Family::Exclusivity, "import_limit", at(t), schedule.grid_buy[t], scenario.import_limit());
        a.at_most(Family::Exclusivity, "export_limit", at(t), schedule.grid_sell[t], scenario.export_limit());
        if schedule.ess.is_some() {
            a.at_most(Family::Exclusivity, "ess_charge_and_discharge", at(t), simultaneous(ess.charge[t], ess.discharge[t]), 0.0);
        }
        if schedule.ev.is_some() {
            a.at_most(Family::Exclusivity, "ev_charge_and_discharge", at(t), simultaneous(ev.charge[t], ev.discharge[t]), 0.0);
        }
    }

    if let (Some(spec), Some(trace)) = (&scenario.ess, &schedule.ess) {
        let window: Vec<usize> = (0..t_len).collect();
        storage(&mut a, Family::Ess, spec, trace, &window, dt);
        if scenario.ess_terminal_reserve {
            a.at_least(Family::Ess, "terminal_reserve", at(t_len - 1), trace.soe[t_len - 1], spec.soe_init_kwh);
        }
    }
    if let (Some(spec), Some(trace)) = (&scenario.ev, &schedule.ev) {
        let window: Vec<usize> = spec.window().collect();
        storage(&mut a, Family::Ev, &spec.storage, trace, &window, dt);
        for t in (0..t_len).filter(|&t| !spec.is_present(t)) {
            for (name, series) in StorageTrace::COLUMNS.iter().zip(trace.columns()) {
                a.equal(Family::Ev, &format!("absent_{name}"), at(t), series[t], 0.0);
            }
        }
        if spec.require_full_at_departure {
            a.equal(
                Family::Ev,
                "full_at_departure",
                at(spec.departure),
                trace.soe[spec.departure],
                spec.storage.soe_max_kwh,
            );
        }
    }

    shifting(&mut a, scenario, schedule);

    Ok(AuditReport {
        tolerance: tol,
        families: a.families,
    })
}

fn storage(a: &mut Auditor, family: Family, spec: &StorageSpec, trace: &StorageTrace, window: &[usize], dt: f64) {
    let mut prev = spec.soe_init_kwh;
    for &t in window {
        a.equal(family, "delivery_split", at(t), trace.used[t] + trace.sold[t], trace.discharge[t] * spec.discharge_eff);
        a.at_most(family, "charge_rate", at(t), trace.charge[t], spec.charge_rate_kw);
        a.at_most(family, "discharge_rate", at(t), trace.discharge[t], spec.discharge_rate_kw);
        for (name, series) in StorageTrace::COLUMNS.iter().zip(trace.columns()) {
            a.at_least(family, &format!("{name}_nonnegative"), at(t), series[t], 0.0);
        }
        let expected = prev + (trace.charge[t] * spec.charge_eff - trace.discharge[t]) * dt;
        a.equal(family, "soe_recursion", at(t), trace.soe[t], expected);
        a.at_least(family, "soe_min", at(t), trace.soe[t], spec.soe_min_kwh);
        a.at_most(family, "soe_max", at(t), trace.soe[t], spec.soe_max_kwh);
        prev = trace.soe[t];
    }
}

fn shifting(a: &mut Auditor, scenario: &Scenario, schedule: &Schedule) {
    let t_len = scenario.intervals();
    let mut landed = vec![0.0; t_len];
    for (idx, (spec, shift)) in scenario.appliances.iter().zip(&schedule.shifts).enumerate() {
        let adt = scenario.adt_intervals(idx);
        let mut served = vec![0.0; t_len];
        for s in 0..t_len {
            let load = spec.profile[s];
            let here = || format!("{}@t={s}", spec.name);
            match shift.destination[s] {
                None => a.equal(Family::Shifting, "block_unassigned", here, load, 0.0),
                Some(d) => {
                    a.at_least(Family::Shifting, "no_early_shift", here, d as f64, s as f64);
                    let last = (s + adt).min(t_len - 1);
                    a.at_most(Family::Shifting, "delay_within_adt", here, d as f64, last as f64);
                    if d < t_len {
                        served[d] += load;
                    }
                }
            }
        }
        // the deferrable load present at t must come from the last adt intervals
        for t in 0..t_len {
            let reachable: f64 = (t.saturating_sub(adt)..=t).map(|s| spec.profile[s]).sum();
            let here = || format!("{}@t={t}", spec.name);
            a.at_most(Family::Shifting, "delayed_load_box", here, served[t], reachable);
            landed[t] += served[t];
        }
        let total: f64 = spec.profile.iter().sum();
        let moved: f64 = served.iter().sum();
        a.equal(Family::Shifting, "energy_conserved", || spec.name.clone(), moved, total);
    }
    for t in 0..t_len {
        a.equal(Family::Shifting, "served_load", at(t), schedule.served_load[t], scenario.non_deferrable[t] + landed[t]);
    }
}
