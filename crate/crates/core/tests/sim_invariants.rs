//! Properties of simulated days over random seeds and demand levels.

use std::collections::BTreeSet;

use coplan::config::{desk_scenario, Mode, ScenarioConfig};
use coplan::flight::path_length;
use coplan::milp::backend_from_env;
use coplan::sim::campaign::reference_scenario;
use coplan::sim::output::{write_run_dir, StoredRun};
use coplan::sim::{run_day, Campaign, DayRun};
use coplan::step3::spread;
use coplan::{AirspaceGrid, FlightId};
use proptest::prelude::*;

fn scenario(seed: u64, demand: f64) -> ScenarioConfig {
    let mut s = desk_scenario();
    s.seed = seed;
    s.demand_per_hub_per_hour = demand;
    s.days = 1;
    s.periods_per_day = 4;
    s
}

fn day(s: &ScenarioConfig) -> DayRun {
    let backend = backend_from_env().unwrap();
    let grid = AirspaceGrid::build(s.grid.clone()).unwrap();
    run_day(backend.as_ref(), &grid, s, 0, false).unwrap()
}

/// Every generated flight is served exactly once or still pending.
fn check_conservation(run: &DayRun) -> Result<(), TestCaseError> {
    let generated: BTreeSet<FlightId> = run.demand.iter().flatten().map(|r| r.id).collect();
    let served: Vec<FlightId> = run
        .periods
        .iter()
        .flat_map(|p| p.served.iter().map(|s| s.flight))
        .collect();
    let pending: BTreeSet<FlightId> = run.pending.iter().map(|r| r.id).collect();
    let served_set: BTreeSet<FlightId> = served.iter().copied().collect();
    prop_assert_eq!(served.len(), served_set.len(), "a flight was served twice");
    prop_assert!(served_set.is_disjoint(&pending));
    let accounted: BTreeSet<FlightId> = served_set.union(&pending).copied().collect();
    prop_assert_eq!(generated, accounted);
    Ok(())
}

/// Stored fairness is the spread of the recomputed path-length ratios.
fn check_fairness(run: &DayRun) -> Result<(), TestCaseError> {
    for p in &run.periods {
        let Some(d) = &p.deconfliction else { continue };
        prop_assert!(d.fairness >= 0.0);
        let mut ratios: Vec<f64> = d
            .flights
            .iter()
            .filter(|f| !d.dropped.contains(f))
            .map(|f| {
                let before = p.proposals.iter().find(|x| x.flight == *f).expect("proposal");
                let after = &p.served.iter().find(|s| s.flight == *f).expect("served").plan;
                f64::from(path_length(after)) / f64::from(path_length(before))
            })
            .collect();
        let mut stored = d.ratios.clone();
        ratios.sort_by(f64::total_cmp);
        stored.sort_by(f64::total_cmp);
        prop_assert_eq!(ratios.len(), stored.len());
        for (a, b) in ratios.iter().zip(&stored) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
        prop_assert!((spread(&ratios) - d.fairness).abs() <= 1e-6);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn days_conserve_flights_and_report_true_fairness(seed in 0..=i64::MAX as u64, demand in 5.0f64..40.0) {
        let run = day(&scenario(seed, demand));
        check_conservation(&run)?;
        check_fairness(&run)?;
    }

    #[test]
    fn paired_runs_agree_until_deconfliction(seed in 0..=i64::MAX as u64, demand in 10.0f64..40.0) {
        let s = scenario(seed, demand);
        let fair = day(&s);
        let plain = day(&reference_scenario(&s));
        prop_assert_eq!(&fair.demand, &plain.demand);
        for (a, b) in fair.periods.iter().zip(&plain.periods) {
            prop_assert_eq!(&a.requests, &b.requests);
            prop_assert_eq!(&a.choice_sets, &b.choice_sets);
            prop_assert_eq!(&a.proposals, &b.proposals);
            prop_assert_eq!(&a.conflicts, &b.conflicts);
            if a.deconfliction.is_some() || b.deconfliction.is_some() {
                break;
            }
            prop_assert_eq!(&a.served, &b.served);
        }
    }

    #[test]
    fn metrics_recompute_from_stored_records(seed in 0..=i64::MAX as u64, demand in 5.0f64..40.0) {
        let s = scenario(seed, demand);
        let campaign = Campaign::from_runs(s.clone(), vec![day(&s)], Some(vec![day(&reference_scenario(&s))]));
        let tmp = tempfile::tempdir().unwrap();
        write_run_dir(tmp.path(), &campaign, false).unwrap();
        let stored = StoredRun::load(tmp.path()).unwrap();
        prop_assert_eq!(stored.scenario.mode, Mode::FairCoplan);
        prop_assert_eq!(stored.metrics(None), campaign.metrics);
    }
}
