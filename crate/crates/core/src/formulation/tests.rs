use proptest::prelude::*;

use super::*;
use crate::milp::MilpOptions;
use crate::scenario::fixtures::{bare, storage};
use crate::scenario::{synth_case, ApplianceSpec, Case, EvSpec, Tariff, DEFAULT_PENALTIES};

fn appliance(name: &str, t_len: usize, at: &[(usize, f64)], adt_hours: f64) -> ApplianceSpec {
    let mut profile = vec![0.0; t_len];
    for &(t, kw) in at {
        profile[t] = kw;
    }
    ApplianceSpec {
        name: name.into(),
        profile,
        adt_hours,
    }
}

/// 24 one-hour intervals with every device and four deferrable appliances.
fn day() -> Scenario {
    let buy = (0..24)
        .map(|t| match t {
            0..=5 => 5.0,
            17..=21 => 24.0,
            _ => 12.0,
        })
        .collect();
    let mut s = bare(buy, vec![0.4; 24]);
    s.pv_gen = (0..24).map(|t| if (9..16).contains(&t) { 2.5 } else { 0.0 }).collect();
    s.appliances = vec![
        appliance("dishwasher", 24, &[(19, 1.2), (20, 1.2)], 4.0),
        appliance("clothes washer", 24, &[(8, 0.5)], 3.0),
        appliance("clothes dryer", 24, &[(10, 2.0)], 1.5),
        appliance("hvac", 24, &[(22, 1.5), (23, 1.5)], 1.5),
    ];
    s.ess = Some(storage(8.0));
    s.ev = Some(EvSpec {
        storage: storage(16.0),
        arrival: 0,
        departure: 7,
        require_full_at_departure: true,
    });
    s
}

fn solve(s: &Scenario) -> Solved {
    solve_scenario(s, &MilpOptions::default()).expect("solvable scenario")
}

fn balance_rows(m: &MilpModel) -> usize {
    m.constraints().iter().filter(|r| r.family() == "balance").count()
}

#[test]
fn case_a_without_dsm_has_only_grid_binaries() {
    let s = synth_case(Case::A, false, &day()).unwrap();
    let (m, map) = build_model(&s).unwrap();
    assert_eq!(map.shift_binaries(), 0);
    assert_eq!(m.num_binaries(), 24);
    assert_eq!(balance_rows(&m), 24);
    assert!(map.ess.is_none() && map.ev.is_none());
}

#[test]
fn single_block_gets_three_destinations() {
    let mut s = bare(vec![10.0; 8], vec![0.0; 8]);
    s.appliances.push(appliance("dishwasher", 8, &[(3, 1.0)], 2.0));
    let (m, map) = build_model(&s).unwrap();
    let block = &map.appliances[0].blocks[0];
    assert_eq!(block.destinations.iter().map(|d| d.0).collect::<Vec<_>>(), vec![3, 4, 5]);
    assert_eq!(map.shift_binaries(), 3);
    let assign: Vec<_> = m.constraints().iter().filter(|r| r.family() == "shift_assign").collect();
    assert_eq!(assign.len(), 1);
    assert_eq!(assign[0].tag, "shift_assign[dishwasher,3]");
}

#[test]
fn destinations_stop_at_the_horizon() {
    let mut s = bare(vec![10.0; 6], vec![0.0; 6]);
    s.appliances.push(appliance("hvac", 6, &[(4, 1.0), (5, 1.0)], 3.0));
    let (_, map) = build_model(&s).unwrap();
    let sizes: Vec<usize> = map.appliances[0].blocks.iter().map(|b| b.destinations.len()).collect();
    assert_eq!(sizes, vec![2, 1]);
}

#[test]
fn case_d_binary_count_matches_index_sets() {
    let s = synth_case(Case::D, true, &day()).unwrap();
    let (m, _) = build_model(&s).unwrap();
    let t_len = 24;
    let window = s.ev.as_ref().unwrap().window_len();
    let mut shift = 0;
    for a in 0..s.appliances.len() {
        let adt = s.adt_intervals(a);
        for t in 0..t_len {
            if s.appliances[a].profile[t] > 0.0 {
                shift += adt.min(t_len - 1 - t) + 1;
            }
        }
    }
    // adt: 4, 3, 1, 1 intervals
    assert_eq!(shift, (5 + 4) + 4 + 2 + (2 + 1));
    assert_eq!(m.num_binaries(), 24 + 24 + window + shift);
}

fn pinned_solution(model: &MilpModel, ones: &[VarId]) -> MilpSolution {
    let mut values = vec![0.0; model.num_variables()];
    for v in ones {
        values[v.0] = 1.0;
    }
    MilpSolution {
        status: SolveStatus::Optimal,
        values,
        objective: 0.0,
        nodes_explored: 0,
        lp_iterations: 0,
    }
}

#[test]
fn decodes_shift_destination() {
    let mut s = bare(vec![10.0; 8], vec![0.1; 8]);
    s.appliances.push(appliance("dishwasher", 8, &[(3, 1.2)], 2.0));
    let (m, map) = build_model(&s).unwrap();
    let u35 = map.appliances[0].blocks[0].destinations[2];
    assert_eq!(u35.0, 5);
    assert_eq!(m.variable(u35.1).name, "u[dishwasher,3,5]");
    let sched = extract_schedule(&s, &map, &pinned_solution(&m, &[u35.1])).unwrap();
    assert_eq!(sched.shifts[0].destination[3], Some(5));
    assert_eq!(sched.served_load[5], 0.1 + 1.2);
    assert_eq!(sched.served_load[3], 0.1);
}

#[test]
fn identity_shift_serves_the_base_demand() {
    let s = synth_case(Case::A, true, &day()).unwrap();
    let (m, map) = build_model(&s).unwrap();
    let stay: Vec<VarId> = map
        .appliances
        .iter()
        .flat_map(|a| &a.blocks)
        .map(|b| b.destinations[0].1)
        .collect();
    let sched = extract_schedule(&s, &map, &pinned_solution(&m, &stay)).unwrap();
    for (a, b) in sched.served_load.iter().zip(s.base_demand()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn extraction_needs_an_optimal_solution() {
    let s = bare(vec![10.0; 2], vec![1.0; 2]);
    let (m, map) = build_model(&s).unwrap();
    let bad = MilpSolution::without_point(SolveStatus::IterationLimit, 1, 0);
    assert!(matches!(
        extract_schedule(&s, &map, &bad),
        Err(FormulationError::NotOptimal(SolveStatus::IterationLimit))
    ));
    assert_eq!(m.num_binaries(), 2);
}

#[test]
fn case_b_splits_pv_exactly() {
    let s = synth_case(Case::B, true, &day()).unwrap();
    let r = solve(&s);
    for t in 0..24 {
        let split = r.schedule.pv_used[t] + r.schedule.pv_sold[t];
        assert!((split - s.pv_gen[t]).abs() < 1e-6, "t={t}: {split} vs {}", s.pv_gen[t]);
    }
    assert!(r.schedule.exported_kwh(1.0) > 0.0);
}

fn one_interval(grid_buy: f64, pv_sold: f64) -> Schedule {
    Schedule {
        grid_buy: vec![grid_buy],
        grid_sell: vec![pv_sold],
        pv_used: vec![0.0],
        pv_sold: vec![pv_sold],
        ess: None,
        ev: None,
        served_load: vec![grid_buy],
        shifts: Vec::new(),
    }
}

#[test]
fn bill_of_a_single_purchase() {
    let tariff = Tariff {
        buy: vec![10.0],
        sell: vec![3.0],
    };
    let c = compute_cost(&one_interval(2.0, 0.0), &tariff, &DEFAULT_PENALTIES, 1.0).unwrap();
    assert_eq!(c.bill, 20.0);
    assert_eq!(c.penalty, 0.0);
}

#[test]
fn bill_of_a_single_pv_export() {
    let tariff = Tariff {
        buy: vec![10.0],
        sell: vec![3.0],
    };
    let eps = DEFAULT_PENALTIES;
    let c = compute_cost(&one_interval(0.0, 1.0), &tariff, &eps, 1.0).unwrap();
    assert_eq!(c.bill, -3.0);
    assert_eq!(c.penalty, eps.pv);
    assert_eq!(c.objective, c.bill + c.penalty);
}

#[test]
fn cost_rejects_short_tariff() {
    let tariff = Tariff {
        buy: vec![10.0, 10.0],
        sell: vec![3.0, 3.0],
    };
    assert!(compute_cost(&one_interval(1.0, 0.0), &tariff, &DEFAULT_PENALTIES, 1.0).is_err());
}

#[test]
fn case_c_cost_matches_solver_objective() {
    let s = synth_case(Case::C, true, &day()).unwrap();
    let r = solve(&s);
    assert!((r.cost.objective - r.solution.objective).abs() < 1e-6);
    assert!(r.cost.penalty >= 0.0);
}

#[test]
fn unreachable_departure_blames_the_ev() {
    let mut s = synth_case(Case::D, false, &day()).unwrap();
    let ev = s.ev.as_mut().unwrap();
    ev.storage.soe_init_kwh = 1.0;
    ev.departure = 0;
    match solve_scenario(&s, &MilpOptions::default()) {
        Err(SolveError::Infeasible(d)) => {
            assert!(!d.relaxation_feasible);
            assert_eq!(d.culprits, vec![Family::Ev]);
            assert_eq!(d.to_string(), "conflicting constraint families: EV");
        }
        Ok(r) => panic!("expected infeasibility, solved at {}", r.cost.objective),
        Err(e) => panic!("expected infeasibility, got {e}"),
    }
}

#[test]
fn terminal_reserve_is_optional() {
    let mut s = synth_case(Case::C, false, &day()).unwrap();
    let with = solve(&s).cost.objective;
    s.ess_terminal_reserve = false;
    let (m, _) = build_model(&s).unwrap();
    assert!(m.constraints().iter().all(|r| r.family() != "ess_terminal"));
    assert!(solve(&s).cost.objective <= with + 1e-9);
}

#[test]
fn schedule_csv_round_trip() {
    let s = synth_case(Case::D, true, &day()).unwrap();
    let sched = solve(&s).schedule;
    let text = sched.to_csv();
    assert!(text.starts_with(SCHEDULE_HEADER));
    let back = Schedule::from_csv(&text).unwrap();
    assert_eq!(back.shifts, sched.shifts);
    for (a, b) in back.grid_buy.iter().zip(&sched.grid_buy) {
        assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
    }
    assert_eq!(back.ev.as_ref().unwrap().soe.len(), 24);
    back.check_shape(&s).unwrap();
}

#[test]
fn schedule_csv_errors_carry_line_numbers() {
    let s = synth_case(Case::B, false, &day()).unwrap();
    let text = solve(&s).schedule.to_csv();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[5] = lines[5].replacen(',', ",oops,", 1);
    let err = Schedule::from_csv(&lines.join("\n")).unwrap_err();
    assert!(matches!(err, ScheduleError::Csv { line: 6, .. }), "{err}");
}

fn small_scenario(buy: Vec<f64>, load: Vec<f64>, pv: Vec<f64>, blocks: Vec<(usize, f64)>, with_ess: bool) -> Scenario {
    let t_len = buy.len();
    let mut s = bare(buy, load);
    s.pv_gen = pv;
    s.appliances.push(appliance("washer", t_len, &blocks, 2.0));
    if with_ess {
        s.ess = Some(storage(2.0));
    }
    s
}

fn arb_small() -> impl Strategy<Value = Scenario> {
    (
        prop::collection::vec(1.0..20.0f64, 5),
        prop::collection::vec(0.0..2.0f64, 5),
        prop::collection::vec(0.0..2.0f64, 5),
        prop::collection::vec((0..5usize, 0.2..1.5f64), 1..3),
        any::<bool>(),
    )
        .prop_map(|(buy, load, pv, blocks, ess)| small_scenario(buy, load, pv, blocks, ess))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn delay_never_costs_more(s in arb_small()) {
        let mut fixed = s.clone();
        fixed.appliances[0].adt_hours = 0.0;
        let flexible = solve(&s).cost.objective;
        let rigid = solve(&fixed).cost.objective;
        prop_assert!(flexible <= rigid + 1e-6, "{flexible} > {rigid}");
    }

    #[test]
    fn more_pv_never_costs_more(s in arb_small(), extra in prop::collection::vec(0.0..1.0f64, 5)) {
        let mut sunny = s.clone();
        for (p, e) in sunny.pv_gen.iter_mut().zip(&extra) {
            *p += e;
        }
        let base = solve(&s).cost.objective;
        let more = solve(&sunny).cost.objective;
        prop_assert!(more <= base + 1e-6, "{more} > {base}");
    }
}
