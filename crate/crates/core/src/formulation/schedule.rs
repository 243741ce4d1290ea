//! Physical schedules, their CSV form, and cost accounting.
//!
//! Schedule CSV, version 1: the first line is exactly [`SCHEDULE_HEADER`];
//! then a header row and one row per interval. Columns, in order:
//!
//! - `interval`
//! - `grid_buy`, `grid_sell`, `pv_used`, `pv_sold` (kW)
//! - `ess_charge`, `ess_discharge`, `ess_used`, `ess_sold` (kW), `ess_soe` (kWh), only when a battery is present
//! - `ev_charge` ... `ev_soe`, same layout, only when an EV is present (zeros outside its window)
//! - `served_load` (kW, fixed plus deferrable load after shifting)
//! - `shift:<appliance>`: interval the block normally drawn in this row's
//!   interval actually runs in; empty where the appliance draws nothing

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{FormulationError, VarMap};
use crate::milp::{MilpSolution, SolveStatus, VarId};
use crate::scenario::{Penalties, Scenario, Tariff};

pub const SCHEDULE_HEADER: &str = "# hems-schedule v1";

/// Values closer to zero than this are reported as exactly zero.
const CLAMP: f64 = 1e-9;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StorageTrace {
    pub charge: Vec<f64>,
    pub discharge: Vec<f64>,
    pub used: Vec<f64>,
    pub sold: Vec<f64>,
    /// Energy at the end of each interval, kWh.
    pub soe: Vec<f64>,
}

impl StorageTrace {
    /// Column names, in [`StorageTrace::columns`] order.
    pub const COLUMNS: [&'static str; 5] = ["charge", "discharge", "used", "sold", "soe"];

    pub fn zeros(intervals: usize) -> Self {
        let z = vec![0.0; intervals];
        StorageTrace {
            charge: z.clone(),
            discharge: z.clone(),
            used: z.clone(),
            sold: z.clone(),
            soe: z,
        }
    }

    fn columns_mut(&mut self) -> [&mut Vec<f64>; 5] {
        [
            &mut self.charge,
            &mut self.discharge,
            &mut self.used,
            &mut self.sold,
            &mut self.soe,
        ]
    }

    pub fn columns(&self) -> [&Vec<f64>; 5] {
        [&self.charge, &self.discharge, &self.used, &self.sold, &self.soe]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ApplianceShift {
    pub name: String,
    /// Destination per source interval; `None` where the appliance draws nothing.
    pub destination: Vec<Option<usize>>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Schedule {
    pub grid_buy: Vec<f64>,
    pub grid_sell: Vec<f64>,
    pub pv_used: Vec<f64>,
    pub pv_sold: Vec<f64>,
    pub ess: Option<StorageTrace>,
    pub ev: Option<StorageTrace>,
    pub served_load: Vec<f64>,
    pub shifts: Vec<ApplianceShift>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("schedule CSV, line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("schedule shape: {0}")]
    Shape(String),
}

fn csv_err(line: u64, message: impl Into<String>) -> ScheduleError {
    ScheduleError::Csv {
        line,
        message: message.into(),
    }
}

impl Schedule {
    pub fn intervals(&self) -> usize {
        self.grid_buy.len()
    }

    pub fn imported_kwh(&self, dt: f64) -> f64 {
        self.grid_buy.iter().sum::<f64>() * dt
    }

    pub fn exported_kwh(&self, dt: f64) -> f64 {
        self.grid_sell.iter().sum::<f64>() * dt
    }

    /// Checks that lengths, devices and appliance names match `scenario`.
    pub fn check_shape(&self, scenario: &Scenario) -> Result<(), ScheduleError> {
        let t = scenario.intervals();
        if self.intervals() != t {
            return Err(ScheduleError::Shape(format!(
                "schedule has {} intervals, scenario has {t}",
                self.intervals()
            )));
        }
        for (device, present, trace) in [
            ("battery", scenario.ess.is_some(), &self.ess),
            ("EV", scenario.ev.is_some(), &self.ev),
        ] {
            if present != trace.is_some() {
                let (s, h) = if present { ("has", "lacks") } else { ("lacks", "has") };
                return Err(ScheduleError::Shape(format!(
                    "scenario {s} a {device} but the schedule {h} its columns"
                )));
            }
        }
        let names: Vec<&str> = self.shifts.iter().map(|s| s.name.as_str()).collect();
        let expected: Vec<&str> = scenario.appliances.iter().map(|a| a.name.as_str()).collect();
        if names != expected {
            return Err(ScheduleError::Shape(format!(
                "appliances {names:?} do not match scenario appliances {expected:?}"
            )));
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut header = vec!["interval".to_string()];
        header.extend(["grid_buy", "grid_sell", "pv_used", "pv_sold"].map(String::from));
        for (prefix, trace) in [("ess", &self.ess), ("ev", &self.ev)] {
            if trace.is_some() {
                header.extend(StorageTrace::COLUMNS.map(|c| format!("{prefix}_{c}")));
            }
        }
        header.push("served_load".into());
        header.extend(self.shifts.iter().map(|s| format!("shift:{}", s.name)));

        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&header).expect("in-memory write");
        for t in 0..self.intervals() {
            let mut rec = vec![t.to_string()];
            for col in [&self.grid_buy, &self.grid_sell, &self.pv_used, &self.pv_sold] {
                rec.push(col[t].to_string());
            }
            for trace in [&self.ess, &self.ev].into_iter().flatten() {
                rec.extend(trace.columns().map(|c| c[t].to_string()));
            }
            rec.push(self.served_load[t].to_string());
            for s in &self.shifts {
                rec.push(s.destination[t].map_or(String::new(), |d| d.to_string()));
            }
            w.write_record(&rec).expect("in-memory write");
        }
        let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields");
        format!("{SCHEDULE_HEADER}\n{body}")
    }

    pub fn from_csv(text: &str) -> Result<Schedule, ScheduleError> {
        let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
        if first.trim_end() != SCHEDULE_HEADER {
            return Err(csv_err(1, format!("expected `{SCHEDULE_HEADER}` as the first line")));
        }
        // line numbers below are relative to `rest`, which starts on line 2
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(rest.as_bytes());
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| csv_err(2, e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let col = |name: &str| headers.iter().position(|h| h == name);
        for required in ["interval", "grid_buy", "grid_sell", "pv_used", "pv_sold", "served_load"] {
            if col(required).is_none() {
                return Err(csv_err(2, format!("missing column `{required}`")));
            }
        }
        let storage_cols = |prefix: &str| -> Result<Option<[usize; 5]>, ScheduleError> {
            let found: Vec<Option<usize>> = StorageTrace::COLUMNS
                .iter()
                .map(|c| col(&format!("{prefix}_{c}")))
                .collect();
            if found.iter().all(Option::is_none) {
                return Ok(None);
            }
            let mut out = [0; 5];
            for (k, f) in found.into_iter().enumerate() {
                out[k] = f.ok_or_else(|| {
                    csv_err(2, format!("missing column `{prefix}_{}`", StorageTrace::COLUMNS[k]))
                })?;
            }
            Ok(Some(out))
        };
        let ess_cols = storage_cols("ess")?;
        let ev_cols = storage_cols("ev")?;
        let shift_cols: Vec<(String, usize)> = headers
            .iter()
            .enumerate()
            .filter_map(|(k, h)| h.strip_prefix("shift:").map(|n| (n.to_string(), k)))
            .collect();

        let mut s = Schedule {
            ess: ess_cols.map(|_| StorageTrace::default()),
            ev: ev_cols.map(|_| StorageTrace::default()),
            shifts: shift_cols
                .iter()
                .map(|(n, _)| ApplianceShift {
                    name: n.clone(),
                    destination: Vec::new(),
                })
                .collect(),
            ..Schedule::default()
        };
        for record in reader.records() {
            let record = record.map_err(|e| {
                csv_err(e.position().map_or(0, |p| p.line() + 1), e.to_string())
            })?;
            let line = record.position().map_or(0, |p| p.line() + 1);
            let num = |k: usize| -> Result<f64, ScheduleError> {
                let field = &record[k];
                field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| csv_err(line, format!("column `{}`: `{field}` is not a number", headers[k])))
            };
            let t = s.grid_buy.len();
            let idx = &record[col("interval").unwrap()];
            if idx.parse::<usize>().ok() != Some(t) {
                return Err(csv_err(line, format!("expected interval {t}, found `{idx}`")));
            }
            s.grid_buy.push(num(col("grid_buy").unwrap())?);
            s.grid_sell.push(num(col("grid_sell").unwrap())?);
            s.pv_used.push(num(col("pv_used").unwrap())?);
            s.pv_sold.push(num(col("pv_sold").unwrap())?);
            s.served_load.push(num(col("served_load").unwrap())?);
            for (trace, cols) in [(&mut s.ess, ess_cols), (&mut s.ev, ev_cols)] {
                if let (Some(trace), Some(cols)) = (trace.as_mut(), cols) {
                    for (dst, k) in trace.columns_mut().into_iter().zip(cols) {
                        dst.push(num(k)?);
                    }
                }
            }
            for (shift, (_, k)) in s.shifts.iter_mut().zip(&shift_cols) {
                let field = &record[*k];
                let d = if field.is_empty() {
                    None
                } else {
                    Some(field.parse::<usize>().map_err(|_| {
                        csv_err(line, format!("column `{}`: `{field}` is not an interval", headers[*k]))
                    })?)
                };
                shift.destination.push(d);
            }
        }
        Ok(s)
    }
}

/// Cost of a schedule in cents. `bill` is what the household pays; `penalty`
/// is the export-priority term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub bill: f64,
    pub penalty: f64,
    pub objective: f64,
}

pub fn compute_cost(
    schedule: &Schedule,
    tariff: &Tariff,
    penalties: &Penalties,
    dt: f64,
) -> Result<CostBreakdown, ScheduleError> {
    let t = schedule.intervals();
    if tariff.buy.len() != t || tariff.sell.len() != t {
        return Err(ScheduleError::Shape(format!(
            "tariff covers {} intervals, schedule {t}",
            tariff.buy.len().min(tariff.sell.len())
        )));
    }
    let mut bill = 0.0;
    let mut penalty = 0.0;
    for k in 0..t {
        bill += (schedule.grid_buy[k] * tariff.buy[k] - schedule.grid_sell[k] * tariff.sell[k]) * dt;
        let ess = schedule.ess.as_ref().map_or(0.0, |s| s.sold[k]);
        let ev = schedule.ev.as_ref().map_or(0.0, |s| s.sold[k]);
        penalty += (penalties.pv * schedule.pv_sold[k] + penalties.ess * ess + penalties.ev * ev) * dt;
    }
    Ok(CostBreakdown {
        bill,
        penalty,
        objective: bill + penalty,
    })
}

fn clamp(v: f64) -> f64 {
    if v.abs() < CLAMP {
        0.0
    } else {
        v
    }
}

/// Reads the physical schedule out of an optimal solution.
pub fn extract_schedule(
    scenario: &Scenario,
    map: &VarMap,
    solution: &MilpSolution,
) -> Result<Schedule, FormulationError> {
    if solution.status != SolveStatus::Optimal {
        return Err(FormulationError::NotOptimal(solution.status));
    }
    let t_len = map.intervals();
    let get = |ids: &[VarId]| -> Vec<f64> {
        ids.iter().map(|&id| clamp(solution.value(id))).collect()
    };
    let trace = |vars: &super::StorageVars| StorageTrace {
        charge: get(&vars.charge),
        discharge: get(&vars.discharge),
        used: get(&vars.used),
        sold: get(&vars.sold),
        soe: get(&vars.soe),
    };

    let mut served_load = scenario.non_deferrable.clone();
    let mut shifts = Vec::with_capacity(map.appliances.len());
    for (spec, vars) in scenario.appliances.iter().zip(&map.appliances) {
        let mut destination = vec![None; t_len];
        if vars.blocks.is_empty() {
            for (s, &load) in spec.profile.iter().enumerate() {
                if load > 0.0 {
                    destination[s] = Some(s);
                }
            }
        } else {
            for block in &vars.blocks {
                let &(d, _) = block
                    .destinations
                    .iter()
                    .max_by(|a, b| solution.value(a.1).total_cmp(&solution.value(b.1)).then(b.0.cmp(&a.0)))
                    .expect("every block has its own interval as a destination");
                destination[block.source] = Some(d);
            }
        }
        for (s, d) in destination.iter().enumerate() {
            if let Some(d) = d {
                served_load[*d] += spec.profile[s];
            }
        }
        shifts.push(ApplianceShift {
            name: spec.name.clone(),
            destination,
        });
    }

    Ok(Schedule {
        grid_buy: get(&map.grid_buy),
        grid_sell: get(&map.grid_sell),
        pv_used: get(&map.pv_used),
        pv_sold: get(&map.pv_sold),
        ess: map.ess.as_ref().map(trace),
        ev: map.ev.as_ref().map(trace),
        served_load,
        shifts,
    })
}

/// Model variable values reproducing `schedule`, with each mode binary set to
/// whichever side of its exclusivity pair is less violated. Shape must match.
pub fn assignment_values(scenario: &Scenario, map: &VarMap, schedule: &Schedule) -> Vec<f64> {
    let mut x = vec![0.0; map.num_variables];
    let t_len = map.intervals();
    let n1 = scenario.import_limit();
    let n2 = scenario.export_limit();
    for t in 0..t_len {
        x[map.grid_buy[t].0] = schedule.grid_buy[t];
        x[map.grid_sell[t].0] = schedule.grid_sell[t];
        x[map.pv_used[t].0] = schedule.pv_used[t];
        x[map.pv_sold[t].0] = schedule.pv_sold[t];
        // u = 1 leaves buy free and forces sell to 0
        x[map.u_grid[t].0] = if schedule.grid_buy[t] / n1 >= schedule.grid_sell[t] / n2 { 1.0 } else { 0.0 };
    }
    let devices = [
        (&map.ess, &schedule.ess, scenario.ess.as_ref()),
        (&map.ev, &schedule.ev, scenario.ev.as_ref().map(|e| &e.storage)),
    ];
    for (vars, trace, spec) in devices {
        let (Some(vars), Some(trace), Some(spec)) = (vars, trace, spec) else {
            continue;
        };
        for t in 0..t_len {
            x[vars.charge[t].0] = trace.charge[t];
            x[vars.discharge[t].0] = trace.discharge[t];
            x[vars.used[t].0] = trace.used[t];
            x[vars.sold[t].0] = trace.sold[t];
            x[vars.soe[t].0] = trace.soe[t];
            if let Some(u) = vars.mode[t] {
                let charging = trace.charge[t] / spec.charge_rate_kw >= trace.discharge[t] / spec.discharge_rate_kw;
                x[u.0] = if charging { 1.0 } else { 0.0 };
            }
        }
    }
    for (vars, shift) in map.appliances.iter().zip(&schedule.shifts) {
        for block in &vars.blocks {
            let chosen = shift.destination.get(block.source).copied().flatten();
            for &(d, u) in &block.destinations {
                x[u.0] = if chosen == Some(d) { 1.0 } else { 0.0 };
            }
        }
    }
    x
}
