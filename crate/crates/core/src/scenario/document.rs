//! TOML scenario documents and CSV series import.
//!
//! Schema version 1:
//!
//! ```toml
//! schema_version = 1
//!
//! [grid]
//! intervals = 24
//! dt_hours = 1.0
//! origin_hour = 20.0          # optional, default 0
//!
//! [series]
//! csv = "prices_and_loads.csv" # optional, relative to the document
//!
//! [tariff]
//! buy = [5.0, 5.0, ...]       # array, or one number for a flat price
//! sell = 3.0
//!
//! [loads]
//! non_deferrable = [...]
//!
//! [pv]
//! generation = [...]          # optional table, zeros when absent
//!
//! [[appliances]]
//! name = "dishwasher"
//! adt_hours = 4.0
//! profile = [...]             # may come from the series CSV instead
//!
//! [ess]                       # optional
//! charge_rate_kw = 3.0
//! discharge_rate_kw = 3.0
//! charge_eff = 0.95
//! discharge_eff = 0.95
//! soe_min_kwh = 1.0
//! soe_max_kwh = 10.0
//! soe_init_kwh = 5.0
//! terminal_reserve = true     # optional, default true
//!
//! [ev]                        # optional; soe_init_kwh defaults to 80 % of soe_max_kwh
//! ...storage fields...
//! arrival = 0
//! departure = 23
//! require_full_at_departure = true
//!
//! [penalties]                 # optional, defaults 1e-4 / 2e-4 / 3e-4
//! pv = 1e-4
//! ess = 2e-4
//! ev = 3e-4
//!
//! [big_m]                     # optional, computed when absent
//! import_kw = 20.0
//! export_kw = 15.0
//! ```
//!
//! The series CSV has a header line and one row per interval. Recognised
//! columns are `buy`, `sell`, `non_deferrable`, `pv_generation` and one column
//! per appliance name; an optional `interval` column is ignored. A series may
//! be given inline or in the CSV, not both.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    ApplianceSpec, BigM, EvSpec, Penalties, Scenario, ScenarioError, StorageSpec, Tariff,
    TimeGrid, DEFAULT_PENALTIES, EV_ARRIVAL_FRACTION,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Series {
    Flat(f64),
    Values(Vec<f64>),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    schema_version: u32,
    grid: GridDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    series: Option<SeriesDoc>,
    #[serde(default)]
    tariff: TariffDoc,
    #[serde(default)]
    loads: LoadsDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pv: Option<PvDoc>,
    #[serde(default)]
    appliances: Vec<ApplianceDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ess: Option<EssDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ev: Option<EvDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    penalties: Option<PenaltiesDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    big_m: Option<BigMDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridDoc {
    intervals: usize,
    dt_hours: f64,
    #[serde(default)]
    origin_hour: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SeriesDoc {
    csv: String,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TariffDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    buy: Option<Series>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sell: Option<Series>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LoadsDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    non_deferrable: Option<Series>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PvDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    generation: Option<Series>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ApplianceDoc {
    name: String,
    adt_hours: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    profile: Option<Series>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StorageDoc {
    charge_rate_kw: f64,
    discharge_rate_kw: f64,
    charge_eff: f64,
    discharge_eff: f64,
    soe_min_kwh: f64,
    soe_max_kwh: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    soe_init_kwh: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EssDoc {
    #[serde(flatten)]
    storage: StorageDoc,
    #[serde(default = "yes")]
    terminal_reserve: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct EvDoc {
    #[serde(flatten)]
    storage: StorageDoc,
    arrival: usize,
    departure: usize,
    #[serde(default = "yes")]
    require_full_at_departure: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PenaltiesDoc {
    pv: f64,
    ess: f64,
    ev: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BigMDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    import_kw: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    export_kw: Option<f64>,
}

fn yes() -> bool {
    true
}

/// Named columns from a series CSV, each one value per interval.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SeriesTable {
    pub columns: BTreeMap<String, Vec<f64>>,
}

/// Parses a series CSV: header line, then one numeric row per interval.
pub fn load_series_csv(text: &str) -> Result<SeriesTable, ScenarioError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| ScenarioError::Csv {
            line: 1,
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
    for record in reader.records() {
        let record = record.map_err(|e| ScenarioError::Csv {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        for (k, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| ScenarioError::Csv {
                line,
                message: format!("column `{}`: `{field}` is not a number", headers[k]),
            })?;
            columns[k].push(v);
        }
    }
    let mut table = SeriesTable::default();
    for (name, values) in headers.into_iter().zip(columns) {
        if name == "interval" {
            continue;
        }
        if table.columns.insert(name.clone(), values).is_some() {
            return Err(ScenarioError::Csv {
                line: 1,
                message: format!("duplicate column `{name}`"),
            });
        }
    }
    Ok(table)
}

/// Parses and validates a scenario document. A `[series] csv` reference is
/// rejected here because there is no directory to resolve it against; use
/// [`load_scenario_file`] for that.
pub fn load_scenario(source: &str) -> Result<Scenario, ScenarioError> {
    let doc: Document = toml::from_str(source).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    if doc.series.is_some() {
        return Err(ScenarioError::invalid(
            "series.csv",
            "series files can only be resolved when loading from a path",
        ));
    }
    from_document(doc, None)
}

/// Reads a scenario document from disk, resolving `[series] csv` relative to it.
pub fn load_scenario_file(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = read(path)?;
    let doc: Document = toml::from_str(&text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    let table = match &doc.series {
        Some(series) => {
            let csv_path = path.parent().unwrap_or(Path::new(".")).join(&series.csv);
            Some(load_series_csv(&read(&csv_path)?)?)
        }
        None => None,
    };
    from_document(doc, table)
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn from_document(doc: Document, mut table: Option<SeriesTable>) -> Result<Scenario, ScenarioError> {
    if doc.schema_version != SCHEMA_VERSION {
        return Err(ScenarioError::invalid(
            "schema_version",
            format!("unsupported version {} (expected {SCHEMA_VERSION})", doc.schema_version),
        ));
    }
    let t = doc.grid.intervals;
    let mut resolve = |field: &str, column: &str, inline: Option<Series>, default: Option<f64>| {
        let from_csv = table.as_mut().and_then(|tb| tb.columns.remove(column));
        match (inline, from_csv) {
            (Some(_), Some(_)) => Err(ScenarioError::invalid(
                field,
                format!("given both inline and as CSV column `{column}`"),
            )),
            (Some(Series::Flat(v)), None) => Ok(vec![v; t]),
            (Some(Series::Values(v)), None) | (None, Some(v)) => Ok(v),
            (None, None) => match default {
                Some(v) => Ok(vec![v; t]),
                None => Err(ScenarioError::invalid(field, "missing")),
            },
        }
    };

    let buy = resolve("tariff.buy", "buy", doc.tariff.buy, None)?;
    let sell = resolve("tariff.sell", "sell", doc.tariff.sell, None)?;
    let non_deferrable = resolve(
        "loads.non_deferrable",
        "non_deferrable",
        doc.loads.non_deferrable,
        None,
    )?;
    let pv_gen = resolve(
        "pv.generation",
        "pv_generation",
        doc.pv.and_then(|p| p.generation),
        Some(0.0),
    )?;
    let mut appliances = Vec::with_capacity(doc.appliances.len());
    for (i, a) in doc.appliances.into_iter().enumerate() {
        let profile = resolve(&format!("appliances[{i}].profile"), &a.name, a.profile, None)?;
        appliances.push(ApplianceSpec {
            name: a.name,
            profile,
            adt_hours: a.adt_hours,
        });
    }
    if let Some(tb) = &table {
        if let Some(extra) = tb.columns.keys().next() {
            return Err(ScenarioError::Csv {
                line: 1,
                message: format!("column `{extra}` does not match any series"),
            });
        }
    }

    let (ess, ess_terminal_reserve) = match doc.ess {
        Some(e) => {
            let init = e.storage.soe_init_kwh.ok_or_else(|| {
                ScenarioError::invalid("ess.soe_init_kwh", "missing")
            })?;
            (Some(storage_from(e.storage, init)), e.terminal_reserve)
        }
        None => (None, true),
    };
    let ev = doc.ev.map(|e| {
        let init = e
            .storage
            .soe_init_kwh
            .unwrap_or(EV_ARRIVAL_FRACTION * e.storage.soe_max_kwh);
        EvSpec {
            storage: storage_from(e.storage, init),
            arrival: e.arrival,
            departure: e.departure,
            require_full_at_departure: e.require_full_at_departure,
        }
    });

    let scenario = Scenario {
        grid: TimeGrid {
            intervals: t,
            dt_hours: doc.grid.dt_hours,
            origin_hour: doc.grid.origin_hour,
        },
        tariff: Tariff { buy, sell },
        non_deferrable,
        pv_gen,
        appliances,
        ess,
        ess_terminal_reserve,
        ev,
        penalties: doc.penalties.map_or(DEFAULT_PENALTIES, |p| Penalties {
            pv: p.pv,
            ess: p.ess,
            ev: p.ev,
        }),
        big_m: doc.big_m.map_or(BigM::default(), |b| BigM {
            import_kw: b.import_kw,
            export_kw: b.export_kw,
        }),
    };
    scenario.validate()?;
    Ok(scenario)
}

fn storage_from(d: StorageDoc, init: f64) -> StorageSpec {
    StorageSpec {
        charge_rate_kw: d.charge_rate_kw,
        discharge_rate_kw: d.discharge_rate_kw,
        charge_eff: d.charge_eff,
        discharge_eff: d.discharge_eff,
        soe_min_kwh: d.soe_min_kwh,
        soe_max_kwh: d.soe_max_kwh,
        soe_init_kwh: init,
    }
}

fn storage_doc(s: &StorageSpec) -> StorageDoc {
    StorageDoc {
        charge_rate_kw: s.charge_rate_kw,
        discharge_rate_kw: s.discharge_rate_kw,
        charge_eff: s.charge_eff,
        discharge_eff: s.discharge_eff,
        soe_min_kwh: s.soe_min_kwh,
        soe_max_kwh: s.soe_max_kwh,
        soe_init_kwh: Some(s.soe_init_kwh),
    }
}

impl Scenario {
    /// Serializes to a self-contained document (all series inline).
    pub fn to_toml(&self) -> String {
        let doc = Document {
            schema_version: SCHEMA_VERSION,
            grid: GridDoc {
                intervals: self.grid.intervals,
                dt_hours: self.grid.dt_hours,
                origin_hour: self.grid.origin_hour,
            },
            series: None,
            tariff: TariffDoc {
                buy: Some(Series::Values(self.tariff.buy.clone())),
                sell: Some(Series::Values(self.tariff.sell.clone())),
            },
            loads: LoadsDoc {
                non_deferrable: Some(Series::Values(self.non_deferrable.clone())),
            },
            pv: Some(PvDoc {
                generation: Some(Series::Values(self.pv_gen.clone())),
            }),
            appliances: self
                .appliances
                .iter()
                .map(|a| ApplianceDoc {
                    name: a.name.clone(),
                    adt_hours: a.adt_hours,
                    profile: Some(Series::Values(a.profile.clone())),
                })
                .collect(),
            ess: self.ess.as_ref().map(|s| EssDoc {
                storage: storage_doc(s),
                terminal_reserve: self.ess_terminal_reserve,
            }),
            ev: self.ev.as_ref().map(|e| EvDoc {
                storage: storage_doc(&e.storage),
                arrival: e.arrival,
                departure: e.departure,
                require_full_at_departure: e.require_full_at_departure,
            }),
            penalties: Some(PenaltiesDoc {
                pv: self.penalties.pv,
                ess: self.penalties.ess,
                ev: self.penalties.ev,
            }),
            big_m: (self.big_m != BigM::default()).then_some(BigMDoc {
                import_kw: self.big_m.import_kw,
                export_kw: self.big_m.export_kw,
            }),
        };
        toml::to_string(&doc).expect("scenario documents always serialize")
    }
}
