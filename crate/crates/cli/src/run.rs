use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use hems_core::formulation::{build_model, solve_scenario, Schedule, SolveError};
use hems_core::milp::lp_format::to_lp_string;
use hems_core::milp::MilpOptions;
use hems_core::scenario::{load_scenario_file, synth_case, Case, Scenario};
use hems_core::validation::audit;
use rayon::prelude::*;

use crate::report::{self, Run, Stats};
use crate::{CaseArg, DsmArg, Failure, ScenarioArgs, SolveArgs, SweepArgs, ValidateArgs};

struct Seed {
    scenario: Scenario,
    origin_hour: Option<f64>,
}

fn load(args: &ScenarioArgs) -> Result<Seed> {
    let scenario = load_scenario_file(&args.scenario)
        .with_context(|| format!("loading {}", args.scenario.display()))?;
    Ok(Seed {
        scenario,
        origin_hour: args.origin_hour,
    })
}

/// The scenario actually solved for one case/DSM combination. Rotation comes
/// last so devices the case drops cannot block it.
fn derive(seed: &Seed, case: Option<Case>, dsm: bool) -> Result<Scenario> {
    let s = match case {
        Some(case) => synth_case(case, dsm, &seed.scenario)?,
        None => {
            let mut s = seed.scenario.clone();
            if !dsm {
                for a in &mut s.appliances {
                    a.adt_hours = 0.0;
                }
            }
            s
        }
    };
    match seed.origin_hour {
        Some(h) => s.with_origin(h).context("rotating the horizon"),
        None => Ok(s),
    }
}

struct Job {
    case: Option<Case>,
    dsm: bool,
    scenario: Scenario,
}

impl Job {
    fn case_name(&self) -> String {
        self.case.map_or_else(|| "scenario".to_string(), |c| c.to_string())
    }
}

fn jobs(seed: &Seed, cases: Option<CaseArg>, dsm: DsmArg) -> Result<Vec<Job>> {
    let cases: Vec<Option<Case>> = match cases {
        Some(c) => c.cases().into_iter().map(Some).collect(),
        None => vec![None],
    };
    let mut out = Vec::new();
    for case in cases {
        for dsm in dsm.settings() {
            let scenario = derive(seed, case, dsm)
                .with_context(|| format!("case {}", case.map_or("scenario".into(), |c| c.to_string())))?;
            out.push(Job { case, dsm, scenario });
        }
    }
    Ok(out)
}

/// Solves every job (in parallel) and keeps the schedules of successful runs.
fn execute(jobs: &[Job], options: &MilpOptions) -> Vec<(Run, Option<Schedule>)> {
    jobs.par_iter()
        .map(|job| {
            let started = Instant::now();
            let result = solve_scenario(&job.scenario, options);
            let seconds = started.elapsed().as_secs_f64();
            let (outcome, schedule) = match result {
                Ok(solved) => (Ok(Stats::of(&solved, job.scenario.dt())), Some(solved.schedule)),
                Err(e) => {
                    let status = match &e {
                        SolveError::Infeasible(_) => "infeasible",
                        SolveError::Unbounded => "unbounded",
                        SolveError::Limit { .. } => "limit",
                        SolveError::Formulation(_) => "error",
                    };
                    (Err((status.to_string(), e.to_string())), None)
                }
            };
            let run = Run {
                case: job.case_name(),
                dsm: job.dsm,
                seconds,
                outcome,
            };
            (run, schedule)
        })
        .collect()
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn verdict(runs: &[(Run, Option<Schedule>)]) -> Result<(), Failure> {
    let failed = runs.iter().filter(|(r, _)| r.outcome.is_err()).count();
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::Outcome(format!("{failed} of {} runs did not reach an optimal schedule", runs.len())))
    }
}

pub fn solve(args: &SolveArgs) -> Result<(), Failure> {
    let options = args.solver.options().map_err(|e| Failure::Input(anyhow::anyhow!(e)))?;
    let seed = load(&args.scenario)?;
    let jobs = jobs(&seed, args.case, args.dsm)?;

    if let Some(dir) = &args.out {
        create_dir(dir)?;
        if args.dump_lp {
            for job in &jobs {
                let (model, _) = build_model(&job.scenario).map_err(anyhow::Error::from)?;
                let path = dir.join(format!("model_{}.lp", report::label(&job.case_name(), job.dsm)));
                write(&path, &to_lp_string(&model))?;
            }
        }
    }

    let runs = execute(&jobs, &options);
    for (run, schedule) in &runs {
        println!("{}", report::line(run));
        if let (Some(dir), Ok(stats), Some(schedule)) = (&args.out, &run.outcome, schedule) {
            write(&dir.join(format!("schedule_{}.csv", run.label())), &schedule.to_csv())?;
            write(&dir.join(format!("cost_{}.txt", run.label())), &report::cost_text(run, stats))?;
        }
    }
    verdict(&runs)
}

pub fn sweep(args: &SweepArgs) -> Result<(), Failure> {
    let options = args.solver.options().map_err(|e| Failure::Input(anyhow::anyhow!(e)))?;
    let seed = load(&args.scenario)?;
    let jobs = jobs(&seed, Some(args.case), args.dsm)?;
    create_dir(&args.out)?;

    let runs = execute(&jobs, &options);
    for (run, schedule) in &runs {
        println!("{}", report::line(run));
        if let Some(schedule) = schedule {
            write(&args.out.join(format!("schedule_{}.csv", run.label())), &schedule.to_csv())?;
        }
    }
    let table = || runs.iter().map(|(r, _)| r);
    write(&args.out.join("summary.csv"), &report::summary_csv(table()))?;
    write(&args.out.join("timing.csv"), &report::timing_csv(table()))?;
    verdict(&runs)
}

pub fn validate(args: &ValidateArgs) -> Result<(), Failure> {
    let seed = load(&args.scenario)?;
    let case = match args.case {
        None => None,
        Some(CaseArg::All) => {
            return Err(Failure::Input(anyhow::anyhow!("validate needs a single case, not `all`")))
        }
        Some(c) => c.cases().first().copied(),
    };
    let dsm = match args.dsm {
        DsmArg::On => true,
        DsmArg::Off => false,
        DsmArg::Both => return Err(Failure::Input(anyhow::anyhow!("validate needs --dsm on or off"))),
    };
    let scenario = derive(&seed, case, dsm)?;
    let text = fs::read_to_string(&args.schedule)
        .with_context(|| format!("reading {}", args.schedule.display()))?;
    let schedule = Schedule::from_csv(&text).with_context(|| format!("parsing {}", args.schedule.display()))?;
    let report = audit(&scenario, &schedule).context("schedule does not fit the scenario")?;

    print!("{report}");
    if let Some(path) = &args.report {
        write(path, &report.to_json())?;
    }
    if report.passed() {
        println!("audit passed");
        Ok(())
    } else {
        let families: Vec<String> = report.failed_families().iter().map(|f| f.to_string()).collect();
        Err(Failure::Outcome(format!(
            "audit failed: {} violation(s) in {}",
            report.violation_count(),
            families.join(", ")
        )))
    }
}
