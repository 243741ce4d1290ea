//! Output tables.
//!
//! `summary.csv` (version 1): a `# hems-summary v1` line, then the header
//! `case,dsm,status,bill_cents,penalty_cents,objective_cents,imported_kwh,exported_kwh,nodes,lp_iterations`
//! and one row per run in case order, DSM on before off. Numbers have six
//! decimals; failed runs leave them empty. Wall-clock times live in
//! `timing.csv` so the summary is reproducible byte for byte.
//!
//! `cost_<run>.txt` is a flat TOML document with the same quantities plus
//! model size and solve time.

use std::fmt::Write;

use hems_core::formulation::Solved;

pub const SUMMARY_HEADER: &str = "# hems-summary v1";
const SUMMARY_COLUMNS: &str =
    "case,dsm,status,bill_cents,penalty_cents,objective_cents,imported_kwh,exported_kwh,nodes,lp_iterations";

/// One solve, labelled by case (or `scenario`) and DSM setting.
pub struct Run {
    pub case: String,
    pub dsm: bool,
    pub seconds: f64,
    pub outcome: Result<Stats, (String, String)>,
}

impl Run {
    /// File-name stem, e.g. `D_dsm-on`.
    pub fn label(&self) -> String {
        label(&self.case, self.dsm)
    }
}

pub fn label(case: &str, dsm: bool) -> String {
    format!("{case}_dsm-{}", on_off(dsm))
}

fn on_off(dsm: bool) -> &'static str {
    if dsm {
        "on"
    } else {
        "off"
    }
}

pub struct Stats {
    pub bill: f64,
    pub penalty: f64,
    pub objective: f64,
    pub imported_kwh: f64,
    pub exported_kwh: f64,
    pub nodes: usize,
    pub lp_iterations: usize,
    pub binaries: usize,
    pub rows: usize,
    pub columns: usize,
}

impl Stats {
    pub fn of(solved: &Solved, dt: f64) -> Stats {
        Stats {
            bill: solved.cost.bill,
            penalty: solved.cost.penalty,
            objective: solved.cost.objective,
            imported_kwh: solved.schedule.imported_kwh(dt),
            exported_kwh: solved.schedule.exported_kwh(dt),
            nodes: solved.solution.nodes_explored,
            lp_iterations: solved.solution.lp_iterations,
            binaries: solved.model.num_binaries(),
            rows: solved.model.num_constraints(),
            columns: solved.model.num_variables(),
        }
    }
}

/// Six decimals, without a sign on values that round to zero.
fn num(v: f64) -> String {
    let s = format!("{v:.6}");
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

pub fn summary_csv<'a>(runs: impl IntoIterator<Item = &'a Run>) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n{SUMMARY_COLUMNS}\n");
    for r in runs {
        let dsm = on_off(r.dsm);
        match &r.outcome {
            Ok(s) => writeln!(
                out,
                "{},{dsm},optimal,{},{},{},{},{},{},{}",
                r.case,
                num(s.bill),
                num(s.penalty),
                num(s.objective),
                num(s.imported_kwh),
                num(s.exported_kwh),
                s.nodes,
                s.lp_iterations
            ),
            Err((status, _)) => writeln!(out, "{},{dsm},{status},,,,,,,", r.case),
        }
        .expect("writing to a String");
    }
    out
}

pub fn timing_csv<'a>(runs: impl IntoIterator<Item = &'a Run>) -> String {
    let mut out = String::from("case,dsm,seconds\n");
    for r in runs {
        writeln!(out, "{},{},{:.3}", r.case, on_off(r.dsm), r.seconds).expect("writing to a String");
    }
    out
}

pub fn cost_text(run: &Run, stats: &Stats) -> String {
    format!(
        "# hems-cost v1\n\
         case = \"{}\"\n\
         dsm = {}\n\
         status = \"optimal\"\n\
         bill_cents = {}\n\
         penalty_cents = {}\n\
         objective_cents = {}\n\
         imported_kwh = {}\n\
         exported_kwh = {}\n\
         nodes = {}\n\
         lp_iterations = {}\n\
         binaries = {}\n\
         rows = {}\n\
         columns = {}\n\
         solve_seconds = {:.3}\n",
        run.case,
        run.dsm,
        num(stats.bill),
        num(stats.penalty),
        num(stats.objective),
        num(stats.imported_kwh),
        num(stats.exported_kwh),
        stats.nodes,
        stats.lp_iterations,
        stats.binaries,
        stats.rows,
        stats.columns,
        run.seconds
    )
}

/// One human-readable line per run.
pub fn line(run: &Run) -> String {
    match &run.outcome {
        Ok(s) => format!(
            "{:<14} bill {:>10} ¢  penalty {:>9} ¢  objective {:>10} ¢  export {:>8} kWh  nodes {:>5}  {:.2} s",
            run.label(),
            format!("{:.3}", s.bill),
            format!("{:.6}", s.penalty),
            format!("{:.3}", s.objective),
            format!("{:.3}", s.exported_kwh),
            s.nodes,
            run.seconds
        ),
        Err((status, message)) => format!("{:<14} {status}: {message}", run.label()),
    }
}
