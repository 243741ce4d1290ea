//! The four-case device matrix and horizon rotation.

use std::fmt;
use std::str::FromStr;

use super::{Scenario, ScenarioError};

/// Device configuration of a case study run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Case {
    /// Loads only.
    A,
    /// A plus rooftop PV.
    B,
    /// B plus a stationary battery.
    C,
    /// C plus an electric vehicle.
    D,
}

impl Case {
    pub const ALL: [Case; 4] = [Case::A, Case::B, Case::C, Case::D];

    pub fn has_pv(self) -> bool {
        self >= Case::B
    }

    pub fn has_ess(self) -> bool {
        self >= Case::C
    }

    pub fn has_ev(self) -> bool {
        self == Case::D
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Case::A => "A",
            Case::B => "B",
            Case::C => "C",
            Case::D => "D",
        };
        f.write_str(c)
    }
}

impl FromStr for Case {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Case::A),
            "B" => Ok(Case::B),
            "C" => Ok(Case::C),
            "D" => Ok(Case::D),
            other => Err(format!("unknown case `{other}` (expected A, B, C or D)")),
        }
    }
}

/// Derives a case study scenario from a fully equipped seed.
///
/// The seed supplies tariffs, loads, appliance profiles and whichever devices
/// the case needs; devices beyond the case are dropped and `dsm = false`
/// zeroes every acceptable delay.
pub fn synth_case(case: Case, dsm: bool, seed: &Scenario) -> Result<Scenario, ScenarioError> {
    let mut s = seed.clone();
    if !case.has_pv() {
        s.pv_gen = vec![0.0; s.intervals()];
    }
    if !case.has_ess() {
        s.ess = None;
    } else if s.ess.is_none() {
        return Err(ScenarioError::invalid("ess", format!("case {case} needs a battery")));
    }
    if !case.has_ev() {
        s.ev = None;
    } else if s.ev.is_none() {
        return Err(ScenarioError::invalid("ev", format!("case {case} needs an EV")));
    }
    if !dsm {
        for a in &mut s.appliances {
            a.adt_hours = 0.0;
        }
    }
    s.validate()?;
    Ok(s)
}

impl Scenario {
    /// Re-indexes a full-day scenario so interval 0 starts at `hour`.
    ///
    /// Requires `T·dt = 24` and a shift of whole intervals. Fails when the EV
    /// window would straddle the new day boundary.
    pub fn with_origin(&self, hour: f64) -> Result<Scenario, ScenarioError> {
        let t = self.intervals();
        if (self.grid.span_hours() - 24.0).abs() > 1e-9 {
            return Err(ScenarioError::invalid(
                "grid.origin_hour",
                format!("rotation needs a 24 h horizon, this one spans {} h", self.grid.span_hours()),
            ));
        }
        if !(0.0..24.0).contains(&hour) {
            return Err(ScenarioError::invalid("grid.origin_hour", "must lie in [0, 24)"));
        }
        let steps = (hour - self.grid.origin_hour).rem_euclid(24.0) / self.dt();
        if (steps - steps.round()).abs() > 1e-9 {
            return Err(ScenarioError::invalid(
                "grid.origin_hour",
                format!("{hour} is not on the {} h interval grid", self.dt()),
            ));
        }
        let k = steps.round() as usize % t;
        let rot = |v: &[f64]| -> Vec<f64> {
            let mut out = v.to_vec();
            out.rotate_left(k);
            out
        };

        let mut s = self.clone();
        s.grid.origin_hour = hour;
        s.tariff.buy = rot(&self.tariff.buy);
        s.tariff.sell = rot(&self.tariff.sell);
        s.non_deferrable = rot(&self.non_deferrable);
        s.pv_gen = rot(&self.pv_gen);
        for a in &mut s.appliances {
            a.profile = rot(&a.profile);
        }
        if let Some(ev) = &mut s.ev {
            let arrival = (ev.arrival + t - k) % t;
            let departure = (ev.departure + t - k) % t;
            if arrival > departure {
                return Err(ScenarioError::invalid(
                    "ev",
                    format!(
                        "window would wrap past the horizon end when the day starts at {hour}:00"
                    ),
                ));
            }
            ev.arrival = arrival;
            ev.departure = departure;
        }
        s.validate()?;
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::fixtures::{bare, storage};
    use crate::scenario::{ApplianceSpec, EvSpec};

    fn seed() -> Scenario {
        let mut s = bare(vec![4.0; 24], vec![0.3; 24]);
        s.pv_gen = (0..24).map(|t| if (10..16).contains(&t) { 2.0 } else { 0.0 }).collect();
        for (name, adt) in [("dishwasher", 4.0), ("clothes washer", 3.0), ("clothes dryer", 1.5), ("hvac", 1.5)] {
            let mut profile = vec![0.0; 24];
            profile[18] = 1.0;
            s.appliances.push(ApplianceSpec {
                name: name.into(),
                profile,
                adt_hours: adt,
            });
        }
        s.ess = Some(storage(8.0));
        s.ev = Some(EvSpec {
            storage: storage(20.0),
            arrival: 0,
            departure: 11,
            require_full_at_departure: true,
        });
        s
    }

    #[test]
    fn case_a_without_dsm_strips_everything() {
        let s = synth_case(Case::A, false, &seed()).unwrap();
        assert!(s.ess.is_none() && s.ev.is_none());
        assert!(s.pv_gen.iter().all(|&p| p == 0.0));
        assert!((0..s.appliances.len()).all(|a| s.adt_intervals(a) == 0));
    }

    #[test]
    fn case_d_keeps_devices_and_delays() {
        let s = synth_case(Case::D, true, &seed()).unwrap();
        assert!(s.ess.is_some() && s.ev.is_some());
        let adts: Vec<f64> = s.appliances.iter().map(|a| a.adt_hours).collect();
        assert_eq!(adts, vec![4.0, 3.0, 1.5, 1.5]);
    }

    #[test]
    fn device_cases_need_the_device() {
        let mut s = seed();
        s.ess = None;
        assert!(synth_case(Case::C, true, &s).is_err());
        assert!(synth_case(Case::B, true, &s).is_ok());
    }

    #[test]
    fn case_parsing() {
        assert_eq!("c".parse::<Case>().unwrap(), Case::C);
        assert!("E".parse::<Case>().is_err());
        assert_eq!(Case::ALL.map(|c| c.to_string()).concat(), "ABCD");
    }

    #[test]
    fn rotation_moves_series_and_window() {
        let mut s = seed();
        s.ev.as_mut().unwrap().arrival = 20;
        s.ev.as_mut().unwrap().departure = 23;
        s.tariff.buy = (0..24).map(f64::from).collect();
        let r = s.with_origin(20.0).unwrap();
        assert_eq!(r.tariff.buy[0], 20.0);
        assert_eq!(r.tariff.buy[4], 0.0);
        let ev = r.ev.unwrap();
        assert_eq!((ev.arrival, ev.departure), (0, 3));
        assert_eq!(r.grid.clock_hour(0), 20.0);
    }

    #[test]
    fn rotation_rejects_wrapping_window() {
        let s = seed();
        // window 0..=11 would straddle the boundary at 06:00
        assert!(s.with_origin(6.0).is_err());
        assert!(s.with_origin(5.5).is_err());
    }
}
