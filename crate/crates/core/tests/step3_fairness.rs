//! Two flights meet at one en-route gate. Each can detour around it at the
//! cost of two extra entries and two steps; hovering is ruled out by exact
//! time windows. With a large fairness weight the long flight detours.

use std::collections::BTreeSet;

use coplan::airspace::{Cell, Connectivity, GridConfig, VertiportKind, VertiportSpec};
use coplan::milp::{backend_from_env, SolveLimits};
use coplan::oracle::oracle_step3;
use coplan::step1::ChoiceSet;
use coplan::step2::solve_step2;
use coplan::step3::{detect_conflicts, fairness_value, solve_step3, ConflictingFlight, FairnessParams};
use coplan::{
    AirspaceGrid, DelayCostParams, FlightId, FlightPlan, FlightRequest, Horizon, OccupancySnapshot, ResourceId,
    Timestep,
};

fn hub(row: u32, col: u32) -> VertiportSpec {
    VertiportSpec {
        row,
        col,
        kind: VertiportKind::Hub,
        ops_capacity: 12,
    }
}

type Path = Vec<(u32, u32)>;

struct Setup {
    grid: AirspaceGrid,
    occupancy: OccupancySnapshot,
    horizon: Horizon,
    flights: Vec<(FlightRequest, ChoiceSet)>,
}

fn setup() -> Setup {
    let grid = AirspaceGrid::build(GridConfig {
        rows: 7,
        cols: 9,
        cell_size_km: 1.0,
        connectivity: Connectivity::Orthogonal4,
        horizon_steps: 11,
        step_minutes: 5.0,
        sector_capacity: 1,
        vertiport_adjacent_capacity: 3,
        vertiports: vec![hub(1, 3), hub(5, 3), hub(3, 0), hub(3, 8)],
        capacity_overrides: Vec::new(),
    })
    .unwrap();
    let horizon = Horizon::new(0, 11);
    let id = |(r, c): (u32, u32)| grid.id_at(Cell::new(r, c)).unwrap();
    // short flight: down the column through the gate at (3, 3)
    let short_direct: Path = vec![(1, 3), (2, 3), (3, 3), (4, 3), (5, 3)];
    let short_detour: Path = vec![(1, 3), (2, 3), (2, 2), (3, 2), (4, 2), (4, 3), (5, 3)];
    // long flight: along the row through the same gate at the same step
    let long_direct: Path = (0..=8).map(|c| (3, c)).collect();
    let mut long_detour: Path = vec![(3, 0), (3, 1), (3, 2), (4, 2), (4, 3), (4, 4)];
    long_detour.extend((4..=8).map(|c| (3, c)));
    let timed = |p: &Path, start: Timestep| -> Vec<(ResourceId, Timestep)> {
        p.iter()
            .enumerate()
            .map(|(i, &c)| (id(c), start + i as Timestep))
            .collect()
    };
    let short_cells: Vec<_> = [timed(&short_direct, 1), timed(&short_detour, 1)].concat();
    let long_cells: Vec<_> = [timed(&long_direct, 0), timed(&long_detour, 0)].concat();
    let allowed: BTreeSet<(ResourceId, Timestep)> = short_cells.iter().chain(&long_cells).copied().collect();

    let mut occupancy = OccupancySnapshot::new();
    for r in grid.resources() {
        if grid.is_en_route(r.id) {
            for t in horizon.steps() {
                if !allowed.contains(&(r.id, t)) {
                    occupancy.set(r.id, t, grid.capacity(r.id, t));
                }
            }
        }
    }
    let mk = |n: u64, path: &Path, dep: Timestep, cells: &[(ResourceId, Timestep)]| {
        let req = FlightRequest::new(
            FlightId(n),
            id(path[0]),
            id(*path.last().unwrap()),
            dep,
            dep + path.len() as Timestep - 1,
            2,
        );
        let managed = cells.iter().copied().filter(|&(r, _)| grid.is_managed(r));
        let choices = ChoiceSet::from_cells(&req, managed);
        (req, choices)
    };
    let flights = vec![
        mk(1, &short_direct, 1, &short_cells),
        mk(2, &long_direct, 0, &long_cells),
    ];
    Setup {
        grid,
        occupancy,
        horizon,
        flights,
    }
}

fn proposals(s: &Setup) -> Vec<ConflictingFlight> {
    let backend = backend_from_env().unwrap();
    let delay = DelayCostParams::new(0.3).unwrap();
    s.flights
        .iter()
        .map(|(req, ch)| {
            let out = solve_step2(
                backend.as_ref(),
                &s.grid,
                &s.occupancy,
                s.horizon,
                req,
                ch,
                delay,
                &SolveLimits::default(),
            )
            .unwrap();
            ConflictingFlight {
                request: req.clone(),
                choices: ch.clone(),
                proposal: out.plan.unwrap(),
            }
        })
        .collect()
}

#[test]
fn proposals_collide_at_the_gate() {
    let s = setup();
    let flights = proposals(&s);
    assert_eq!(flights[0].proposal.path_length, 5);
    assert_eq!(flights[1].proposal.path_length, 9);
    let plans: Vec<FlightPlan> = flights.iter().map(|f| f.proposal.clone()).collect();
    let report = detect_conflicts(&s.grid, &s.occupancy, &plans).unwrap();
    assert_eq!(report.overloaded.len(), 1);
    assert_eq!(s.grid.cell(report.overloaded[0].resource), Cell::new(3, 3));
    assert_eq!(report.conflicting, vec![FlightId(1), FlightId(2)]);
}

#[test]
fn large_gamma_sends_the_long_flight_around() {
    let s = setup();
    let flights = proposals(&s);
    let backend = backend_from_env().unwrap();
    let params = FairnessParams::new(5.0, 0.3).unwrap();
    let out = solve_step3(
        backend.as_ref(),
        &s.grid,
        &s.occupancy,
        s.horizon,
        &flights,
        params,
        &SolveLimits::default(),
    )
    .unwrap();
    let oracle = oracle_step3(&s.grid, &s.occupancy, s.horizon, &flights, params).unwrap();
    assert!(out.carried.is_empty());
    let lengths: Vec<u32> = out.plans.iter().map(|p| p.path_length).collect();
    assert_eq!(lengths, vec![5, 11]);
    let before: Vec<FlightPlan> = flights.iter().map(|f| f.proposal.clone()).collect();
    let f = fairness_value(&before, &out.plans).unwrap();
    assert!((f - 2.0 / 9.0).abs() < 1e-12);
    // two extra steps at alpha = 0.3, plus gamma F
    let expected = 0.6 + 5.0 * 2.0 / 9.0;
    assert!((oracle.objective - expected).abs() < 1e-9, "{}", oracle.objective);
    assert!((out.total_tdc + 5.0 * out.fairness - expected).abs() < 1e-9);
    assert!((out.objective - expected).abs() < 1e-6);
    assert_eq!(oracle.plans, out.plans);
}

#[test]
fn zero_gamma_only_counts_delay() {
    let s = setup();
    let flights = proposals(&s);
    let backend = backend_from_env().unwrap();
    let params = FairnessParams::new(0.0, 0.3).unwrap();
    let out = solve_step3(
        backend.as_ref(),
        &s.grid,
        &s.occupancy,
        s.horizon,
        &flights,
        params,
        &SolveLimits::default(),
    )
    .unwrap();
    let oracle = oracle_step3(&s.grid, &s.occupancy, s.horizon, &flights, params).unwrap();
    assert!((out.total_tdc - 0.6).abs() < 1e-9);
    assert!((oracle.objective - 0.6).abs() < 1e-9);
    // either detour is optimal; the fair one is no worse in fairness
    let before: Vec<FlightPlan> = flights.iter().map(|f| f.proposal.clone()).collect();
    assert!(fairness_value(&before, &out.plans).unwrap() >= 2.0 / 9.0 - 1e-12);
}
