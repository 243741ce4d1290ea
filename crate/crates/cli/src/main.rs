//! `hems`: day-ahead household energy scheduling from the command line.
//!
//! Exit status is 0 when every requested run is optimal (or the audit passes),
//! 1 when a run is infeasible, hits a limit or fails the audit, and 2 for
//! usage, I/O and parse errors.

mod report;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hems_core::milp::{BranchRule, MilpOptions, NodeOrder};
use hems_core::scenario::Case;

#[derive(Parser, Debug)]
#[command(name = "hems", version, about = "Day-ahead home energy scheduler")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one scenario, optionally under several case/DSM settings.
    Solve(SolveArgs),
    /// Run the four-case study with and without DSM and tabulate the results.
    Sweep(SweepArgs),
    /// Audit a schedule CSV against its scenario.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CaseArg {
    #[value(name = "A")]
    A,
    #[value(name = "B")]
    B,
    #[value(name = "C")]
    C,
    #[value(name = "D")]
    D,
    All,
}

impl CaseArg {
    fn cases(self) -> Vec<Case> {
        match self {
            CaseArg::A => vec![Case::A],
            CaseArg::B => vec![Case::B],
            CaseArg::C => vec![Case::C],
            CaseArg::D => vec![Case::D],
            CaseArg::All => Case::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DsmArg {
    On,
    Off,
    Both,
}

impl DsmArg {
    fn settings(self) -> Vec<bool> {
        match self {
            DsmArg::On => vec![true],
            DsmArg::Off => vec![false],
            DsmArg::Both => vec![true, false],
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct ScenarioArgs {
    /// Scenario TOML file.
    #[arg(short, long)]
    scenario: PathBuf,
    /// Hour of day the horizon should start at (rotates a 24 h scenario).
    #[arg(long, value_name = "HOUR")]
    origin_hour: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum BranchArg {
    MostFractional,
    FirstFractional,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OrderArg {
    BestBound,
    DepthFirst,
}

#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    /// Branch-and-bound node budget.
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    node_limit: Option<u64>,
    /// Absolute optimality gap in cents, within [0, 1].
    #[arg(long, value_name = "CENTS")]
    gap_tol: Option<f64>,
    /// Integrality tolerance, within (0, 0.1].
    #[arg(long, value_name = "TOL")]
    integrality_tol: Option<f64>,
    /// Simplex iteration budget per LP.
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    lp_iteration_limit: Option<u64>,
    #[arg(long, value_enum)]
    branch_rule: Option<BranchArg>,
    #[arg(long, value_enum)]
    node_order: Option<OrderArg>,
}

impl SolverArgs {
    fn options(&self) -> Result<MilpOptions, String> {
        let mut o = MilpOptions::default();
        if let Some(n) = self.node_limit {
            o.node_limit = n as usize;
        }
        if let Some(g) = self.gap_tol {
            if !(0.0..=1.0).contains(&g) {
                return Err(format!("--gap-tol {g} is outside [0, 1]"));
            }
            o.gap_tol = g;
        }
        if let Some(t) = self.integrality_tol {
            if !(t > 0.0 && t <= 0.1) {
                return Err(format!("--integrality-tol {t} is outside (0, 0.1]"));
            }
            o.integrality_tol = t;
        }
        if let Some(n) = self.lp_iteration_limit {
            o.lp.iteration_limit = n as usize;
        }
        if let Some(b) = self.branch_rule {
            o.branch_rule = match b {
                BranchArg::MostFractional => BranchRule::MostFractional,
                BranchArg::FirstFractional => BranchRule::FirstFractional,
            };
        }
        if let Some(n) = self.node_order {
            o.node_order = match n {
                OrderArg::BestBound => NodeOrder::BestBound,
                OrderArg::DepthFirst => NodeOrder::DepthFirst,
            };
        }
        Ok(o)
    }
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Derive case-study runs from the scenario; without it the scenario is solved as written.
    #[arg(long, value_enum, ignore_case = true)]
    case: Option<CaseArg>,
    /// `off` disables every appliance delay.
    #[arg(long, value_enum, default_value = "on")]
    dsm: DsmArg,
    /// Directory for schedule, cost and model files.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Also write each model in LP format (needs --out).
    #[arg(long, requires = "out")]
    dump_lp: bool,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, value_enum, ignore_case = true, default_value = "all")]
    case: CaseArg,
    #[arg(long, value_enum, default_value = "both")]
    dsm: DsmArg,
    /// Directory for summary.csv, timing.csv and per-run schedules.
    #[arg(short, long)]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Schedule CSV to audit.
    #[arg(long)]
    schedule: PathBuf,
    /// Case the schedule was solved for, if any.
    #[arg(long, value_enum, ignore_case = true)]
    case: Option<CaseArg>,
    #[arg(long, value_enum, default_value = "on")]
    dsm: DsmArg,
    /// Write the audit report as JSON.
    #[arg(long, value_name = "FILE")]
    report: Option<PathBuf>,
}

/// How a command failed, which decides the exit status.
#[derive(Debug)]
pub enum Failure {
    /// Bad input: usage, I/O or parse errors.
    Input(anyhow::Error),
    /// The inputs were fine but a run was not optimal or an audit failed.
    Outcome(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(args) => run::solve(args),
        Command::Sweep(args) => run::sweep(args),
        Command::Validate(args) => run::validate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Outcome(msg)) => {
            eprintln!("hems: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(e)) => {
            eprintln!("hems: error: {e:#}");
            ExitCode::from(2)
        }
    }
}
