//! Tiny instances with solver-versus-oracle checks for every model.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{deconfliction_objective, oracle_min_tdc, oracle_step1, oracle_step3, oracle_tfmp, OracleError, TIE_TOL};
use crate::airspace::{
    AirspaceGrid, CapacityOverride, Cell, Connectivity, GridConfig, Horizon, OccupancySnapshot, ResourceId, Timestep,
    VertiportKind, VertiportSpec,
};
use crate::baseline::{solve_tfmp, unserved_penalty};
use crate::flight::{tdc, DelayCostParams, DwellTimes, FlightId, FlightRequest};
use crate::milp::{Backend, SolveLimits};
use crate::routing::{fixed_route, min_travel_time};
use crate::step1::{check_choices, solve_step1, ChoiceProblem};
use crate::step2::solve_step2;
use crate::step3::{solve_step3, ConflictingFlight, FairnessParams};
use crate::trajectory::PlanRules;

/// Gammas every deconfliction fixture is solved at.
pub const FIXTURE_GAMMAS: [f64; 3] = [0.0, 1.0, 5.0];

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TinyInstance {
    pub name: String,
    pub grid: GridConfig,
    pub horizon: Horizon,
    /// Pre-existing occupancy `(resource, step, count)`.
    pub occupancy: Vec<(ResourceId, Timestep, u32)>,
    pub requests: Vec<FlightRequest>,
    pub alpha: f64,
}

impl TinyInstance {
    pub fn validate(&self) -> Result<AirspaceGrid, OracleError> {
        if self.grid.rows > 5 || self.grid.cols > 5 {
            return Err(OracleError::NotTiny(format!(
                "{}x{} grid",
                self.grid.rows, self.grid.cols
            )));
        }
        if self.horizon.len > 10 {
            return Err(OracleError::NotTiny(format!("horizon {}", self.horizon.len)));
        }
        if self.requests.len() > 3 {
            return Err(OracleError::NotTiny(format!("{} requests", self.requests.len())));
        }
        let grid = AirspaceGrid::build(self.grid.clone()).map_err(|e| OracleError::NotTiny(e.to_string()))?;
        for r in &self.requests {
            r.validate(&grid).map_err(|e| OracleError::NotTiny(e.to_string()))?;
        }
        Ok(grid)
    }

    pub fn snapshot(&self) -> OccupancySnapshot {
        let mut occ = OccupancySnapshot::new();
        for &(r, t, n) in &self.occupancy {
            occ.set(r, t, n);
        }
        occ
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub fixture: String,
    pub check: String,
    pub pass: bool,
    pub detail: String,
}

fn outcome(fixture: &str, check: impl Into<String>, pass: bool, detail: String) -> CheckOutcome {
    CheckOutcome {
        fixture: fixture.to_string(),
        check: check.into(),
        pass,
        detail,
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOL
}

/// Solves every model on `inst` with `backend` and compares against the
/// oracle: Step 1 objective, Step 2 delay cost per flight, Step 3 objective
/// at each fixture gamma, and baseline delay cost.
pub fn run_fixture(
    backend: &dyn Backend,
    inst: &TinyInstance,
    limits: &SolveLimits,
) -> Result<Vec<CheckOutcome>, OracleError> {
    let grid = inst.validate()?;
    let name = inst.name.as_str();
    let occ = inst.snapshot();
    let h = inst.horizon;
    let delay = DelayCostParams::new(inst.alpha).map_err(OracleError::NotTiny)?;
    let mut out = Vec::new();

    // Step 1
    let problem = ChoiceProblem::new(&grid, &occ, h, &inst.requests);
    let opt1 = oracle_step1(&problem)?;
    let sets = match solve_step1(backend, &grid, &occ, h, &inst.requests, limits) {
        Ok(res) => {
            let solved = res.objective.round() as usize;
            let violations = check_choices(&grid, &occ, h, &inst.requests, &res);
            out.push(outcome(
                name,
                "step1",
                solved == opt1.objective && (res.objective - solved as f64).abs() < 1e-6 && violations.is_empty(),
                format!(
                    "solver {} oracle {} violations {}",
                    res.objective,
                    opt1.objective,
                    violations.len()
                ),
            ));
            res.choice_sets
        }
        Err(e) => {
            out.push(outcome(name, "step1", false, e.to_string()));
            return Ok(out);
        }
    };

    // Step 2
    let mut flights = Vec::new();
    for (req, set) in inst.requests.iter().zip(&sets) {
        if !set.is_assigned() {
            continue;
        }
        let rules = PlanRules::negotiated(&grid, &occ, h, req, set);
        let oracle = oracle_min_tdc(&rules, delay)?;
        let check = format!("step2 {}", req.id);
        match solve_step2(backend, &grid, &occ, h, req, set, delay, limits) {
            Ok(res) => {
                let pass = match (&res.plan, &oracle) {
                    (None, None) => true,
                    (Some(p), Some((_, best))) => rules.check(p).is_empty() && close(tdc(p, req, delay), *best),
                    _ => false,
                };
                out.push(outcome(
                    name,
                    check,
                    pass,
                    format!("solver {:?} oracle {:?}", res.tdc, oracle.as_ref().map(|o| o.1)),
                ));
                if let Some(plan) = res.plan {
                    flights.push(ConflictingFlight {
                        request: req.clone(),
                        choices: set.clone(),
                        proposal: plan,
                    });
                }
            }
            Err(e) => out.push(outcome(name, check, false, e.to_string())),
        }
    }

    // Step 3 on all flights with a proposal
    if !flights.is_empty() {
        for gamma in FIXTURE_GAMMAS {
            let params = FairnessParams::new(gamma, inst.alpha).map_err(OracleError::NotTiny)?;
            let oracle = oracle_step3(&grid, &occ, h, &flights, params)?;
            let check = format!("step3 gamma={gamma}");
            match solve_step3(backend, &grid, &occ, h, &flights, params, limits) {
                Ok(res) => {
                    let kept: Vec<ConflictingFlight> = flights
                        .iter()
                        .filter(|f| !res.carried.contains(&f.request.id))
                        .cloned()
                        .collect();
                    let value = deconfliction_objective(&kept, &res.plans, params);
                    let feasible = kept.iter().zip(&res.plans).all(|(f, p)| {
                        PlanRules::negotiated(&grid, &occ, h, &f.request, &f.choices)
                            .check(p)
                            .is_empty()
                    }) && crate::airspace::overlay_audit(&grid, &occ, res.plans.iter()).is_empty();
                    let pass = res.carried == oracle.carried
                        && feasible
                        && close(value, oracle.objective)
                        && (res.plans.is_empty() || (res.objective - oracle.objective).abs() < 1e-6);
                    out.push(outcome(
                        name,
                        check,
                        pass,
                        format!(
                            "solver {value} (reported {}) oracle {} carried {:?}/{:?}",
                            res.objective, oracle.objective, res.carried, oracle.carried
                        ),
                    ));
                }
                Err(e) => out.push(outcome(name, check, false, e.to_string())),
            }
        }
    }

    // Baseline
    let routed: Vec<_> = inst
        .requests
        .iter()
        .filter_map(|r| fixed_route(&grid, r).ok().map(|route| (r.clone(), route)))
        .collect();
    if !routed.is_empty() {
        let oracle = oracle_tfmp(&grid, &occ, h, &routed, delay)?;
        match solve_tfmp(backend, &grid, &occ, h, &routed, delay, limits) {
            Ok(res) => {
                let penalty = unserved_penalty(routed.len(), h);
                let value = res.total_tdc + penalty * res.carried.len() as f64;
                let served = oracle.plans.iter().filter(|p| p.is_some()).count();
                let pass = res.plans.len() == served
                    && close(res.total_tdc, oracle.total_tdc)
                    && close(value, oracle.objective);
                out.push(outcome(
                    name,
                    "tfmp",
                    pass,
                    format!(
                        "solver tdc {} served {} oracle tdc {} served {served}",
                        res.total_tdc,
                        res.plans.len(),
                        oracle.total_tdc
                    ),
                ));
            }
            Err(e) => out.push(outcome(name, "tfmp", false, e.to_string())),
        }
    }
    Ok(out)
}

fn hub(row: u32, col: u32) -> VertiportSpec {
    VertiportSpec {
        row,
        col,
        kind: VertiportKind::Hub,
        ops_capacity: 12,
    }
}

fn base_grid(rows: u32, cols: u32, vertiports: Vec<VertiportSpec>) -> GridConfig {
    GridConfig {
        rows,
        cols,
        cell_size_km: 1.0,
        connectivity: Connectivity::Orthogonal4,
        horizon_steps: 10,
        step_minutes: 5.0,
        sector_capacity: 1,
        vertiport_adjacent_capacity: 3,
        vertiports,
        capacity_overrides: Vec::new(),
    }
}

fn hand_fixtures() -> Vec<TinyInstance> {
    let mut v = Vec::new();
    // vertiport - sector - vertiport
    let corridor = base_grid(1, 3, vec![hub(0, 0), hub(0, 2)]);
    v.push(TinyInstance {
        name: "corridor-single".into(),
        grid: corridor.clone(),
        horizon: Horizon::new(0, 4),
        occupancy: Vec::new(),
        requests: vec![FlightRequest::new(FlightId(1), ResourceId(0), ResourceId(2), 0, 2, 1)],
        alpha: 0.3,
    });
    // one en-route sector of capacity 1 between two approach sectors
    let long = base_grid(1, 4, vec![hub(0, 0), hub(0, 3)]);
    v.push(TinyInstance {
        name: "corridor-shared".into(),
        grid: long.clone(),
        horizon: Horizon::new(0, 8),
        occupancy: Vec::new(),
        requests: vec![
            FlightRequest::new(FlightId(1), ResourceId(0), ResourceId(3), 1, 4, 2),
            FlightRequest::new(FlightId(2), ResourceId(0), ResourceId(3), 1, 4, 2),
        ],
        alpha: 0.3,
    });
    // single-slot vertistop shared by two departures
    let mut stop = corridor.clone();
    stop.vertiports[0].kind = VertiportKind::Vertistop;
    stop.vertiports[0].ops_capacity = 1;
    v.push(TinyInstance {
        name: "vertistop-contention".into(),
        grid: stop,
        horizon: Horizon::new(0, 7),
        occupancy: Vec::new(),
        requests: vec![
            FlightRequest::new(FlightId(1), ResourceId(0), ResourceId(2), 0, 2, 2),
            FlightRequest::new(FlightId(2), ResourceId(0), ResourceId(2), 0, 2, 2),
        ],
        alpha: 0.3,
    });
    // head-on traffic across the middle of a 3x4 block
    let block = base_grid(3, 4, vec![hub(1, 0), hub(1, 3)]);
    let g = AirspaceGrid::build(block.clone()).expect("valid");
    let w = g.id_at(Cell::new(1, 0)).expect("cell");
    let e = g.id_at(Cell::new(1, 3)).expect("cell");
    v.push(TinyInstance {
        name: "head-on".into(),
        grid: block.clone(),
        horizon: Horizon::new(0, 8),
        occupancy: Vec::new(),
        requests: vec![
            FlightRequest::new(FlightId(1), w, e, 0, 3, 2),
            FlightRequest::new(FlightId(2), e, w, 0, 3, 2),
        ],
        alpha: 0.3,
    });
    // the only fixed route is blocked; a detour exists
    let wide = base_grid(2, 4, vec![hub(0, 0), hub(0, 3)]);
    let g = AirspaceGrid::build(wide.clone()).expect("valid");
    let s = g.id_at(Cell::new(0, 0)).expect("cell");
    let d = g.id_at(Cell::new(0, 3)).expect("cell");
    let blocked = g.id_at(Cell::new(0, 1)).expect("cell");
    v.push(TinyInstance {
        name: "route-closed".into(),
        grid: wide,
        horizon: Horizon::new(0, 9),
        occupancy: (0..9).map(|t| (blocked, t, 3)).collect(),
        requests: vec![FlightRequest::new(FlightId(1), s, d, 0, 3, 3)],
        alpha: 0.3,
    });
    // long dwell in the approach sector
    let mut dwell = FlightRequest::new(FlightId(1), ResourceId(0), ResourceId(3), 0, 5, 2);
    dwell.dwell = DwellTimes::default().with(ResourceId(1), 2).with(ResourceId(2), 2);
    let mut second = dwell.clone();
    second.id = FlightId(2);
    v.push(TinyInstance {
        name: "dwell-two".into(),
        grid: long,
        horizon: Horizon::new(0, 10),
        occupancy: Vec::new(),
        requests: vec![dwell, second],
        alpha: 0.3,
    });
    v.extend(crossing_fixtures());
    v
}

/// Corner-to-corner traffic forced through a partly closed en-route core
/// of a 4x4 grid.
fn crossing_fixtures() -> Vec<TinyInstance> {
    type Case = (&'static str, &'static [(u32, u32)], [(u32, u32); 4], [Timestep; 2], u32);
    let cases: [Case; 10] = [
        ("gate-same-pair", &[(2, 1)], [(0, 0), (3, 3), (0, 0), (3, 3)], [0, 0], 2),
        ("gate-offset", &[(2, 1)], [(0, 0), (3, 3), (0, 0), (3, 3)], [0, 1], 2),
        ("gate-crossing", &[(1, 2)], [(0, 0), (3, 3), (3, 3), (0, 0)], [0, 0], 2),
        ("gate-tight", &[(1, 2)], [(0, 0), (3, 3), (0, 0), (3, 3)], [0, 0], 1),
        (
            "two-lanes",
            &[(1, 1), (1, 2)],
            [(0, 0), (3, 3), (3, 0), (0, 3)],
            [0, 0],
            2,
        ),
        (
            "two-lanes-offset",
            &[(1, 1), (1, 2)],
            [(3, 0), (0, 3), (0, 0), (3, 3)],
            [0, 1],
            3,
        ),
        ("column", &[(1, 2), (2, 2)], [(0, 0), (3, 3), (0, 3), (3, 0)], [0, 0], 2),
        (
            "column-wide",
            &[(1, 2), (2, 2)],
            [(3, 0), (0, 3), (0, 0), (3, 3)],
            [0, 0],
            3,
        ),
        (
            "three-open",
            &[(1, 1), (1, 2), (2, 2)],
            [(0, 0), (3, 3), (3, 0), (0, 3)],
            [0, 0],
            2,
        ),
        (
            "three-open-late",
            &[(1, 1), (2, 1), (2, 2)],
            [(0, 3), (3, 0), (0, 0), (3, 3)],
            [1, 0],
            2,
        ),
    ];
    cases
        .iter()
        .map(|&(name, open, ends, deps, flex)| {
            let mut grid = base_grid(4, 4, vec![hub(0, 0), hub(0, 3), hub(3, 0), hub(3, 3)]);
            for (row, col) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
                if !open.contains(&(row, col)) {
                    grid.capacity_overrides.push(CapacityOverride {
                        row,
                        col,
                        from: 0,
                        until: 10,
                        capacity: 0,
                    });
                }
            }
            let g = AirspaceGrid::build(grid.clone()).expect("valid");
            let at = |(r, c): (u32, u32)| g.id_at(Cell::new(r, c)).expect("cell");
            let requests = (0..2)
                .map(|i| {
                    let (o, d) = (at(ends[2 * i]), at(ends[2 * i + 1]));
                    let travel = min_travel_time(&g, o, d, &DwellTimes::default()).expect("connected");
                    FlightRequest::new(FlightId(i as u64 + 1), o, d, deps[i], deps[i] + travel, flex)
                })
                .collect();
            TinyInstance {
                name: name.into(),
                grid,
                horizon: Horizon::new(0, 10),
                occupancy: Vec::new(),
                requests,
                alpha: 0.3,
            }
        })
        .collect()
}

/// Seeded random tiny instance; `None` when the draw cannot fit the limits.
fn random_fixture(index: usize) -> Option<TinyInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7a11 + index as u64);
    let shapes = [(1, 4), (2, 3), (2, 4), (3, 3), (3, 4), (4, 4)];
    let &(rows, cols) = shapes.choose(&mut rng)?;
    let mut cells: Vec<(u32, u32)> = (0..rows).flat_map(|r| (0..cols).map(move |c| (r, c))).collect();
    cells.shuffle(&mut rng);
    let diagonal = rows > 1 && rng.gen_bool(0.2);
    let apart = |a: (u32, u32), b: (u32, u32)| {
        let (dr, dc) = (a.0.abs_diff(b.0), a.1.abs_diff(b.1));
        if diagonal {
            dr.max(dc) >= 2
        } else {
            dr + dc >= 2
        }
    };
    let want = if rows * cols >= 12 && rng.gen_bool(0.3) { 3 } else { 2 };
    let mut picked: Vec<(u32, u32)> = Vec::new();
    for c in cells {
        if picked.len() < want && picked.iter().all(|&p| apart(p, c)) {
            picked.push(c);
        }
    }
    if picked.len() < 2 {
        return None;
    }
    let mut grid = base_grid(rows, cols, picked.iter().map(|&(r, c)| hub(r, c)).collect());
    if diagonal {
        grid.connectivity = Connectivity::Diagonal8;
    }
    if rng.gen_bool(0.3) {
        grid.vertiports[0].kind = VertiportKind::Vertistop;
        grid.vertiports[0].ops_capacity = 1;
    }
    if rng.gen_bool(0.3) {
        grid.vertiport_adjacent_capacity = 1;
    }
    let g = AirspaceGrid::build(grid.clone()).ok()?;
    let ports = g.vertiports().to_vec();
    let n = if rng.gen_bool(0.85) { 2 } else { 1 };
    let shared = rng.gen_bool(0.6);
    let mut requests = Vec::new();
    let (mut o, mut d) = (ports[0], ports[1]);
    for i in 0..n {
        if i == 0 || !shared {
            let mut pair = ports.clone();
            pair.shuffle(&mut rng);
            (o, d) = (pair[0], pair[1]);
        }
        let mut dwell = DwellTimes::default();
        for r in g.vertiport_adjacent_sectors() {
            if rng.gen_bool(0.25) {
                dwell = dwell.with(r, 2);
            }
        }
        let dep = rng.gen_range(0..=1);
        let travel = min_travel_time(&g, o, d, &dwell).ok()?;
        let flex = rng.gen_range(1..=2);
        let mut req = FlightRequest::new(FlightId(i as u64 + 1), o, d, dep, dep + travel, flex);
        req.dwell = dwell;
        requests.push(req);
    }
    let last = requests.iter().map(|r| r.arrival + r.flexibility).max()?;
    if last > 9 {
        return None;
    }
    let horizon = Horizon::new(0, (last + 1 + rng.gen_range(0..=1)).min(10));
    let mut occupancy = Vec::new();
    for r in g.resources() {
        if g.is_en_route(r.id) {
            for t in horizon.steps() {
                if rng.gen_bool(0.08) {
                    occupancy.push((r.id, t, 1));
                }
            }
        }
    }
    Some(TinyInstance {
        name: format!("random-{index:02}"),
        grid,
        horizon,
        occupancy,
        requests,
        alpha: 0.3,
    })
}

/// The shipped fixture suite: hand-built cases plus seeded random draws.
pub fn tiny_fixtures() -> Vec<TinyInstance> {
    let mut v = hand_fixtures();
    let mut i = 0;
    while v.len() < 40 {
        if let Some(f) = random_fixture(i) {
            v.push(f);
        }
        i += 1;
    }
    v
}
