//! Household scenario: time grid, tariffs, loads, devices and penalty weights.
//!
//! Scenarios are built from a TOML document (see [`document`]) and validated
//! once; afterwards they are plain immutable data.

mod cases;
pub mod document;

use thiserror::Error;

pub use cases::{synth_case, Case};
pub use document::{load_scenario, load_scenario_file, load_series_csv, SeriesTable};

/// Default export-priority weights in ¢/kWh for PV, stationary battery and EV.
pub const DEFAULT_PENALTIES: Penalties = Penalties {
    pv: 1e-4,
    ess: 2e-4,
    ev: 3e-4,
};

/// Fraction of capacity an EV holds when it arrives, unless stated otherwise.
pub const EV_ARRIVAL_FRACTION: f64 = 0.8;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot parse scenario document: {0}")]
    Parse(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("series CSV, line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("{field}: expected {expected} values, found {found}")]
    Length {
        field: String,
        expected: usize,
        found: usize,
    },
    #[error("{field}: {reason}")]
    Invalid { field: String, reason: String },
}

impl ScenarioError {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    pub intervals: usize,
    /// Interval length in hours.
    pub dt_hours: f64,
    /// Clock hour at which interval 0 starts.
    pub origin_hour: f64,
}

impl TimeGrid {
    pub fn span_hours(&self) -> f64 {
        self.intervals as f64 * self.dt_hours
    }

    /// Clock hour at the start of interval `t`, wrapped to [0, 24).
    pub fn clock_hour(&self, t: usize) -> f64 {
        (self.origin_hour + t as f64 * self.dt_hours).rem_euclid(24.0)
    }

    /// Number of whole intervals contained in `hours`, rounded down.
    pub fn whole_intervals(&self, hours: f64) -> usize {
        // the small slack keeps 1.5 h / 0.5 h from landing on 2.9999...
        ((hours / self.dt_hours) + 1e-9).floor().max(0.0) as usize
    }
}

/// Prices in ¢/kWh, one per interval.
#[derive(Clone, Debug, PartialEq)]
pub struct Tariff {
    pub buy: Vec<f64>,
    pub sell: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ApplianceSpec {
    pub name: String,
    /// Normally scheduled power draw in kW per interval.
    pub profile: Vec<f64>,
    /// Acceptable delay time in hours; 0 makes the appliance non-deferrable.
    pub adt_hours: f64,
}

impl ApplianceSpec {
    pub fn adt_intervals(&self, grid: &TimeGrid) -> usize {
        grid.whole_intervals(self.adt_hours)
    }

    pub fn energy_kwh(&self, dt_hours: f64) -> f64 {
        self.profile.iter().sum::<f64>() * dt_hours
    }
}

/// Battery parameters, shared by the stationary store and the EV.
#[derive(Clone, Debug, PartialEq)]
pub struct StorageSpec {
    pub charge_rate_kw: f64,
    pub discharge_rate_kw: f64,
    pub charge_eff: f64,
    pub discharge_eff: f64,
    pub soe_min_kwh: f64,
    pub soe_max_kwh: f64,
    pub soe_init_kwh: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvSpec {
    pub storage: StorageSpec,
    /// First interval the EV is plugged in.
    pub arrival: usize,
    /// Last interval the EV is plugged in (inclusive).
    pub departure: usize,
    pub require_full_at_departure: bool,
}

impl EvSpec {
    pub fn window(&self) -> std::ops::RangeInclusive<usize> {
        self.arrival..=self.departure
    }

    pub fn is_present(&self, t: usize) -> bool {
        self.window().contains(&t)
    }

    pub fn window_len(&self) -> usize {
        self.departure + 1 - self.arrival
    }
}

/// Export-priority weights (¢/kWh); the smallest weight marks the preferred source.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Penalties {
    pub pv: f64,
    pub ess: f64,
    pub ev: f64,
}

/// Big-M constants for the buy/sell exclusivity rows. `None` selects the
/// computed default.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BigM {
    pub import_kw: Option<f64>,
    pub export_kw: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub grid: TimeGrid,
    pub tariff: Tariff,
    pub non_deferrable: Vec<f64>,
    pub pv_gen: Vec<f64>,
    pub appliances: Vec<ApplianceSpec>,
    pub ess: Option<StorageSpec>,
    /// Require the stationary battery to end the day with at least its initial energy.
    pub ess_terminal_reserve: bool,
    pub ev: Option<EvSpec>,
    pub penalties: Penalties,
    pub big_m: BigM,
}

impl Scenario {
    pub fn intervals(&self) -> usize {
        self.grid.intervals
    }

    pub fn dt(&self) -> f64 {
        self.grid.dt_hours
    }

    pub fn adt_intervals(&self, appliance: usize) -> usize {
        self.appliances[appliance].adt_intervals(&self.grid)
    }

    /// Largest possible grid import: every deferrable block that could land in
    /// an interval, plus the fixed load and both chargers at full rate.
    pub fn default_import_limit(&self) -> f64 {
        let t_max = self.intervals();
        let chargers = self.ess.as_ref().map_or(0.0, |s| s.charge_rate_kw)
            + self.ev.as_ref().map_or(0.0, |e| e.storage.charge_rate_kw);
        let peak = (0..t_max)
            .map(|t| {
                let shifted: f64 = self
                    .appliances
                    .iter()
                    .map(|a| {
                        let adt = a.adt_intervals(&self.grid);
                        (t.saturating_sub(adt)..=t).map(|s| a.profile[s]).sum::<f64>()
                    })
                    .sum();
                self.non_deferrable[t] + shifted
            })
            .fold(0.0, f64::max);
        peak + chargers
    }

    /// Largest possible export: full PV plus both batteries discharging at rate.
    pub fn default_export_limit(&self) -> f64 {
        let pv = self.pv_gen.iter().copied().fold(0.0, f64::max);
        pv + self
            .ess
            .as_ref()
            .map_or(0.0, |s| s.discharge_rate_kw * s.discharge_eff)
            + self
                .ev
                .as_ref()
                .map_or(0.0, |e| e.storage.discharge_rate_kw * e.storage.discharge_eff)
    }

    pub fn import_limit(&self) -> f64 {
        // a zero limit would forbid buying outright
        self.big_m
            .import_kw
            .unwrap_or_else(|| self.default_import_limit().max(1.0))
    }

    pub fn export_limit(&self) -> f64 {
        self.big_m
            .export_kw
            .unwrap_or_else(|| self.default_export_limit().max(1.0))
    }

    /// Total fixed + deferrable demand per interval, before any shifting.
    pub fn base_demand(&self) -> Vec<f64> {
        (0..self.intervals())
            .map(|t| {
                self.non_deferrable[t] + self.appliances.iter().map(|a| a.profile[t]).sum::<f64>()
            })
            .collect()
    }

    /// Checks every invariant; returns the first violation found.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let t = self.grid.intervals;
        if t == 0 {
            return Err(ScenarioError::invalid("grid.intervals", "must be at least 1"));
        }
        if !(self.grid.dt_hours.is_finite() && self.grid.dt_hours > 0.0) {
            return Err(ScenarioError::invalid("grid.dt_hours", "must be positive"));
        }
        if !(0.0..24.0).contains(&self.grid.origin_hour) {
            return Err(ScenarioError::invalid("grid.origin_hour", "must lie in [0, 24)"));
        }
        check_series("tariff.buy", &self.tariff.buy, t)?;
        check_series("tariff.sell", &self.tariff.sell, t)?;
        check_series("loads.non_deferrable", &self.non_deferrable, t)?;
        check_series("pv.generation", &self.pv_gen, t)?;

        let mut names = std::collections::BTreeSet::new();
        for (i, a) in self.appliances.iter().enumerate() {
            let field = format!("appliances[{i}]");
            if a.name.trim().is_empty() {
                return Err(ScenarioError::invalid(format!("{field}.name"), "must not be empty"));
            }
            if !names.insert(a.name.as_str()) {
                return Err(ScenarioError::invalid(
                    format!("{field}.name"),
                    format!("duplicate appliance name `{}`", a.name),
                ));
            }
            check_series(&format!("{field}.profile"), &a.profile, t)?;
            if !(a.adt_hours.is_finite() && a.adt_hours >= 0.0) {
                return Err(ScenarioError::invalid(format!("{field}.adt_hours"), "must be >= 0"));
            }
        }

        if let Some(ess) = &self.ess {
            check_storage("ess", ess)?;
        }
        if let Some(ev) = &self.ev {
            check_storage("ev", &ev.storage)?;
            if ev.arrival > ev.departure {
                return Err(ScenarioError::invalid(
                    "ev.arrival",
                    format!("arrival {} is after departure {}", ev.arrival, ev.departure),
                ));
            }
            if ev.departure >= t {
                return Err(ScenarioError::invalid(
                    "ev.departure",
                    format!("interval {} is outside the {t}-interval horizon", ev.departure),
                ));
            }
        }

        let p = &self.penalties;
        if ![p.pv, p.ess, p.ev].iter().all(|e| e.is_finite() && *e >= 0.0) {
            return Err(ScenarioError::invalid("penalties", "weights must be finite and >= 0"));
        }
        if !(p.pv < p.ess && p.ess < p.ev) {
            return Err(ScenarioError::invalid("penalties", "ε1 < ε2 < ε3 violated"));
        }
        for (field, v) in [
            ("big_m.import_kw", self.big_m.import_kw),
            ("big_m.export_kw", self.big_m.export_kw),
        ] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(ScenarioError::invalid(field, "must be positive"));
                }
            }
        }
        Ok(())
    }
}

fn check_series(field: &str, values: &[f64], expected: usize) -> Result<(), ScenarioError> {
    if values.len() != expected {
        return Err(ScenarioError::Length {
            field: field.to_string(),
            expected,
            found: values.len(),
        });
    }
    if let Some((t, v)) = values
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
    {
        return Err(ScenarioError::invalid(
            field,
            format!("value {v} at interval {t} must be finite and >= 0"),
        ));
    }
    Ok(())
}

fn check_storage(prefix: &str, s: &StorageSpec) -> Result<(), ScenarioError> {
    for (name, v) in [
        ("charge_rate_kw", s.charge_rate_kw),
        ("discharge_rate_kw", s.discharge_rate_kw),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(ScenarioError::invalid(format!("{prefix}.{name}"), "must be positive"));
        }
    }
    for (name, v) in [("charge_eff", s.charge_eff), ("discharge_eff", s.discharge_eff)] {
        if !(v > 0.0 && v <= 1.0) {
            return Err(ScenarioError::invalid(format!("{prefix}.{name}"), "must lie in (0, 1]"));
        }
    }
    let ordered = 0.0 <= s.soe_min_kwh
        && s.soe_min_kwh <= s.soe_init_kwh
        && s.soe_init_kwh <= s.soe_max_kwh
        && s.soe_max_kwh.is_finite();
    if !ordered {
        return Err(ScenarioError::invalid(
            prefix,
            format!(
                "need 0 <= soe_min ({}) <= soe_init ({}) <= soe_max ({})",
                s.soe_min_kwh, s.soe_init_kwh, s.soe_max_kwh
            ),
        ));
    }
    Ok(())
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn fractional_adt_rounds_down() {
        let mut grid = TimeGrid {
            intervals: 24,
            dt_hours: 1.0,
            origin_hour: 0.0,
        };
        let a = ApplianceSpec {
            name: "dryer".into(),
            profile: vec![0.0; 24],
            adt_hours: 1.5,
        };
        assert_eq!(a.adt_intervals(&grid), 1);
        grid.dt_hours = 0.5;
        assert_eq!(a.adt_intervals(&grid), 3);
        grid.dt_hours = 0.25;
        assert_eq!(a.adt_intervals(&grid), 6);
    }

    #[test]
    fn penalties_must_increase() {
        let mut s = bare(vec![1.0; 2], vec![0.0; 2]);
        s.penalties = Penalties {
            pv: 0.0002,
            ess: 0.0001,
            ev: 0.0003,
        };
        let err = s.validate().unwrap_err().to_string();
        assert!(err.contains("ε1 < ε2 < ε3 violated"), "{err}");
    }

    #[test]
    fn length_mismatch_names_field() {
        let mut s = bare(vec![1.0; 3], vec![0.0; 3]);
        s.pv_gen.pop();
        let err = s.validate().unwrap_err();
        assert!(matches!(err, ScenarioError::Length { ref field, expected: 3, found: 2 } if field == "pv.generation"));
    }

    #[test]
    fn storage_ordering_checked() {
        let mut s = bare(vec![1.0; 3], vec![0.0; 3]);
        let mut ess = storage(4.0);
        ess.soe_init_kwh = 5.0;
        s.ess = Some(ess);
        assert!(s.validate().unwrap_err().to_string().starts_with("ess:"));
    }

    #[test]
    fn ev_window_must_fit() {
        let mut s = bare(vec![1.0; 3], vec![0.0; 3]);
        s.ev = Some(EvSpec {
            storage: storage(10.0),
            arrival: 1,
            departure: 3,
            require_full_at_departure: true,
        });
        assert!(s.validate().unwrap_err().to_string().starts_with("ev.departure"));
    }

    #[test]
    fn default_import_limit_covers_stacked_blocks() {
        let mut s = bare(vec![1.0; 4], vec![1.0, 0.0, 0.0, 0.0]);
        s.appliances.push(ApplianceSpec {
            name: "washer".into(),
            profile: vec![2.0, 2.0, 0.0, 0.0],
            adt_hours: 2.0,
        });
        // both washer blocks may land at t = 2
        assert_eq!(s.default_import_limit(), 4.0);
        s.ess = Some(storage(4.0));
        assert_eq!(s.default_import_limit(), 6.0);
    }
}
