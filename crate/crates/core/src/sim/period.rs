//! One planning round over the current horizon.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use web_time::Instant;

use crate::airspace::{AirspaceGrid, FlightPlanRecord, Horizon, OccupancyLedger, OccupancySnapshot, Timestep};
use crate::baseline::solve_tfmp;
use crate::config::{Mode, ScenarioConfig};
use crate::flight::{tdc, tdc_vs_original, FlightId, FlightPlan, FlightRequest, OperatorId};
use crate::milp::{Backend, SolveLimits, SolveStatus};
use crate::routing::fixed_route;
use crate::step1::{solve_step1, ChoiceSet};
use crate::step2::solve_all;
use crate::step3::{
    detect_conflicts, solve_step3, ConflictReport, ConflictingFlight, DeconflictionResult, FairnessParams,
};

use super::SimError;

/// Everything the planner carries from one period to the next.
#[derive(Clone, Debug, Default)]
pub struct PlannerState {
    pub ledger: OccupancyLedger,
    /// Resubmitted requests, already shifted to the next period.
    pub pending: Vec<FlightRequest>,
}

#[derive(Clone, Debug)]
pub struct PlannerSettings {
    pub mode: Mode,
    pub fairness: FairnessParams,
    /// Steps between periods; also the shift applied to carried flights.
    pub cadence: u32,
    pub limits: SolveLimits,
    /// Keep the inputs of every deconfliction solve in the outcome.
    pub keep_traces: bool,
}

impl PlannerSettings {
    pub fn new(scenario: &ScenarioConfig) -> Result<Self, SimError> {
        let fairness = FairnessParams::new(scenario.effective_gamma(), scenario.alpha)
            .map_err(|e| SimError::Layout(format!("bad fairness parameters: {e}")))?;
        Ok(Self {
            mode: scenario.mode,
            fairness,
            cadence: scenario.cadence,
            limits: SolveLimits {
                time_limit: scenario.time_limit,
                mip_gap: 0.0,
            },
            keep_traces: false,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServedFlight {
    pub flight: FlightId,
    pub operator: OperatorId,
    pub plan: FlightPlan,
    /// Delay cost against the request as submitted this period.
    pub tdc: f64,
    /// Delay cost against the first submission, including carryover shifts.
    pub tdc_original: f64,
}

/// Summary of a deconfliction solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Deconfliction {
    pub flights: Vec<FlightId>,
    pub fairness: f64,
    pub ratios: Vec<f64>,
    pub total_tdc: f64,
    pub objective: Option<f64>,
    pub dropped: Vec<FlightId>,
    pub status: SolveStatus,
    pub solves: u32,
}

/// Stored record of one period. Solve times are kept apart in
/// [`StepTimings`] so that records are reproducible.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodResult {
    pub day: u32,
    pub period: u32,
    pub horizon: Horizon,
    /// Carryovers first, then new requests.
    pub requests: Vec<FlightRequest>,
    /// How many leading entries of `requests` are carryovers.
    pub carryovers: usize,
    /// Empty in fixed-route mode.
    pub choice_sets: Vec<ChoiceSet>,
    pub proposals: Vec<FlightPlan>,
    pub conflicts: Option<ConflictReport>,
    pub deconfliction: Option<Deconfliction>,
    pub served: Vec<ServedFlight>,
    pub carried: Vec<FlightId>,
}

impl PeriodResult {
    pub fn new_requests(&self) -> usize {
        self.requests.len() - self.carryovers
    }

    pub fn fairness(&self) -> Option<f64> {
        self.deconfliction.as_ref().map(|d| d.fairness)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepTimings {
    pub step1: Option<Duration>,
    /// One entry per Step 2 solve.
    pub step2: Vec<Duration>,
    pub step3: Option<Duration>,
    pub tfmp: Option<Duration>,
    /// Wall time of the whole period, filing included.
    pub total: Duration,
}

/// Inputs and output of one deconfliction solve.
#[derive(Clone, Debug)]
pub struct Step3Trace {
    pub occupancy: OccupancySnapshot,
    pub horizon: Horizon,
    pub flights: Vec<ConflictingFlight>,
    pub result: DeconflictionResult,
}

#[derive(Clone, Debug)]
pub struct PeriodOutcome {
    pub result: PeriodResult,
    pub timings: StepTimings,
    pub step3: Option<Step3Trace>,
}

/// Horizon planned in `period`.
pub fn period_horizon(grid: &AirspaceGrid, cadence: u32, period: u32) -> Horizon {
    Horizon::new(period * cadence, grid.horizon_steps())
}

/// Plans carryovers and `new_requests` for one period, files every plan in
/// the ledger and queues unserved flights for the next period.
pub fn run_period(
    backend: &dyn Backend,
    grid: &AirspaceGrid,
    state: &mut PlannerState,
    new_requests: Vec<FlightRequest>,
    settings: &PlannerSettings,
    day: u32,
    period: u32,
) -> Result<PeriodOutcome, SimError> {
    let started = Instant::now();
    let horizon = period_horizon(grid, settings.cadence, period);
    let carryovers = state.pending.len();
    let mut requests = std::mem::take(&mut state.pending);
    requests.extend(new_requests);
    let mut result = PeriodResult {
        day,
        period,
        horizon,
        requests,
        carryovers,
        choice_sets: Vec::new(),
        proposals: Vec::new(),
        conflicts: None,
        deconfliction: None,
        served: Vec::new(),
        carried: Vec::new(),
    };
    let mut timings = StepTimings::default();
    let mut trace = None;
    if result.requests.is_empty() {
        timings.total = started.elapsed();
        return Ok(PeriodOutcome {
            result,
            timings,
            step3: None,
        });
    }
    let occupancy = state.ledger.snapshot();
    let plans = match settings.mode {
        Mode::Tfmp => plan_fixed_routes(backend, grid, &occupancy, horizon, settings, &mut result, &mut timings)?,
        Mode::FairCoplan | Mode::Coplan => {
            let (plans, t) = plan_negotiated(backend, grid, &occupancy, horizon, settings, &mut result, &mut timings)?;
            trace = t;
            plans
        }
    };

    let params = settings.fairness.delay();
    for plan in plans {
        let req = result
            .requests
            .iter()
            .find(|r| r.id == plan.flight)
            .expect("plans belong to requests");
        state.ledger.file_plan(
            grid,
            FlightPlanRecord {
                flight: req.id,
                operator: req.operator,
                plan: plan.clone(),
                filed_at: horizon.start,
            },
        )?;
        result.served.push(ServedFlight {
            flight: req.id,
            operator: req.operator,
            tdc: tdc(&plan, req, params),
            tdc_original: tdc_vs_original(&plan, req, params),
            plan,
        });
    }
    // keep the carry order aligned with request order
    let carried: Vec<FlightId> = result
        .requests
        .iter()
        .map(|r| r.id)
        .filter(|id| result.carried.contains(id))
        .collect();
    result.carried = carried;
    state.pending = result
        .requests
        .iter()
        .filter(|r| result.carried.contains(&r.id))
        .map(|r| r.carried_over(settings.cadence))
        .collect();
    timings.total = started.elapsed();
    Ok(PeriodOutcome {
        result,
        timings,
        step3: trace,
    })
}

/// Steps 1 to 3. Returns the plans to file, clean flights first.
fn plan_negotiated(
    backend: &dyn Backend,
    grid: &AirspaceGrid,
    occupancy: &OccupancySnapshot,
    horizon: Horizon,
    settings: &PlannerSettings,
    result: &mut PeriodResult,
    timings: &mut StepTimings,
) -> Result<(Vec<FlightPlan>, Option<Step3Trace>), SimError> {
    let step1 = solve_step1(backend, grid, occupancy, horizon, &result.requests, &settings.limits)?;
    timings.step1 = Some(step1.solve_time);
    result.carried.extend(step1.unassigned.iter().copied());
    let items: Vec<(FlightRequest, ChoiceSet)> = result
        .requests
        .iter()
        .zip(&step1.choice_sets)
        .filter(|(_, c)| c.is_assigned())
        .map(|(r, c)| (r.clone(), c.clone()))
        .collect();
    result.choice_sets = step1.choice_sets;

    let mut proposals = Vec::new();
    for outcome in solve_all(
        backend,
        grid,
        occupancy,
        horizon,
        &items,
        settings.fairness.delay(),
        &settings.limits,
    ) {
        let outcome = outcome?;
        timings.step2.push(outcome.solve_time);
        match outcome.plan {
            Some(p) => proposals.push(p),
            None => result.carried.push(outcome.flight),
        }
    }
    result.proposals = proposals.clone();

    let report = detect_conflicts(grid, occupancy, &proposals)?;
    let (clean, conflicting): (Vec<FlightPlan>, Vec<FlightPlan>) =
        proposals.into_iter().partition(|p| report.clean.contains(&p.flight));
    let mut trace = None;
    let mut plans = clean;
    if !conflicting.is_empty() {
        let base = occupancy.clone().with_plans(plans.iter());
        let flights: Vec<ConflictingFlight> = conflicting
            .into_iter()
            .map(|proposal| {
                let (request, choices) = items
                    .iter()
                    .find(|(r, _)| r.id == proposal.flight)
                    .cloned()
                    .expect("proposal of a known flight");
                ConflictingFlight {
                    request,
                    choices,
                    proposal,
                }
            })
            .collect();
        let out = solve_step3(
            backend,
            grid,
            &base,
            horizon,
            &flights,
            settings.fairness,
            &settings.limits,
        )?;
        timings.step3 = Some(out.solve_time);
        result.carried.extend(out.carried.iter().copied());
        result.deconfliction = Some(Deconfliction {
            flights: flights.iter().map(|f| f.request.id).collect(),
            fairness: out.fairness,
            ratios: out.ratios.clone(),
            total_tdc: out.total_tdc,
            objective: out.objective.is_finite().then_some(out.objective),
            dropped: out.carried.clone(),
            status: out.status.clone(),
            solves: out.solves,
        });
        plans.extend(out.plans.iter().cloned());
        if settings.keep_traces {
            trace = Some(Step3Trace {
                occupancy: base,
                horizon,
                flights,
                result: out,
            });
        }
    }
    result.conflicts = Some(report);
    Ok((plans, trace))
}

fn plan_fixed_routes(
    backend: &dyn Backend,
    grid: &AirspaceGrid,
    occupancy: &OccupancySnapshot,
    horizon: Horizon,
    settings: &PlannerSettings,
    result: &mut PeriodResult,
    timings: &mut StepTimings,
) -> Result<Vec<FlightPlan>, SimError> {
    let mut flights = Vec::with_capacity(result.requests.len());
    for req in &result.requests {
        let route = fixed_route(grid, req).map_err(|_| SimError::Unroutable(req.id))?;
        flights.push((req.clone(), route));
    }
    let out = solve_tfmp(
        backend,
        grid,
        occupancy,
        horizon,
        &flights,
        settings.fairness.delay(),
        &settings.limits,
    )?;
    timings.tfmp = Some(out.solve_time);
    result.carried.extend(out.carried.iter().copied());
    result.proposals = out.plans.clone();
    Ok(out.plans)
}

/// Last step any plan of `result` occupies.
pub fn last_step(result: &PeriodResult) -> Option<Timestep> {
    result
        .served
        .iter()
        .filter_map(|s| s.plan.steps.last().map(|c| c.1))
        .max()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::airspace::tests::config;
    use crate::airspace::{overlay_audit, Cell};
    use crate::config::desk_scenario;
    use crate::milp::backend_from_env;

    fn settings(mode: Mode) -> PlannerSettings {
        let mut s = desk_scenario();
        s.mode = mode;
        let mut p = PlannerSettings::new(&s).unwrap();
        p.keep_traces = true;
        p
    }

    #[test]
    fn nothing_to_plan_leaves_the_ledger_alone() {
        let g = AirspaceGrid::build(desk_scenario().grid).unwrap();
        let b = backend_from_env().unwrap();
        let mut state = PlannerState::default();
        for mode in Mode::ALL {
            let out = run_period(b.as_ref(), &g, &mut state, Vec::new(), &settings(mode), 0, 3).unwrap();
            assert!(out.result.requests.is_empty() && out.result.served.is_empty());
            assert!(state.ledger.is_empty());
        }
    }

    #[test]
    fn lone_request_is_served_on_time() {
        let g = AirspaceGrid::build(config(3, 5, &[(0, 0), (2, 4)])).unwrap();
        let s = g.id_at(Cell::new(0, 0)).unwrap();
        let e = g.id_at(Cell::new(2, 4)).unwrap();
        let b = backend_from_env().unwrap();
        for mode in Mode::ALL {
            let mut state = PlannerState::default();
            let req = FlightRequest::new(FlightId(1), s, e, 0, 6, 3);
            let out = run_period(b.as_ref(), &g, &mut state, vec![req], &settings(mode), 0, 0).unwrap();
            assert_eq!(out.result.served.len(), 1, "{mode}");
            assert_eq!(out.result.served[0].tdc, 0.0);
            assert!(out.result.deconfliction.is_none());
            assert_eq!(state.ledger.len(), 1);
        }
    }

    #[test]
    fn carried_flights_move_one_period() {
        // one sector between the two vertiports, shut at step 1
        let mut cfg = config(1, 3, &[(0, 0), (0, 2)]);
        cfg.horizon_steps = 8;
        cfg.capacity_overrides.push(crate::airspace::CapacityOverride {
            row: 0,
            col: 1,
            from: 1,
            until: 2,
            capacity: 0,
        });
        let g = AirspaceGrid::build(cfg).unwrap();
        let s = g.id_at(Cell::new(0, 0)).unwrap();
        let e = g.id_at(Cell::new(0, 2)).unwrap();
        let b = backend_from_env().unwrap();
        let mut state = PlannerState::default();
        // no slack: the only plan crosses the sector at step 1
        let req = FlightRequest::new(FlightId(4), s, e, 0, 2, 0);
        let first = run_period(b.as_ref(), &g, &mut state, vec![req], &settings(Mode::Coplan), 0, 0).unwrap();
        assert_eq!(first.result.carried, vec![FlightId(4)]);
        assert_eq!(state.pending[0].departure, 1);
        assert_eq!(state.pending[0].resubmissions, 1);
        let second = run_period(b.as_ref(), &g, &mut state, Vec::new(), &settings(Mode::Coplan), 0, 1).unwrap();
        assert_eq!(second.result.carryovers, 1);
        assert_eq!(second.result.served.len(), 1);
        let s = &second.result.served[0];
        assert_eq!(s.tdc, 0.0);
        assert!((s.tdc_original - 1.0).abs() < 1e-12);
        assert!(state.pending.is_empty());
    }

    #[test]
    fn shared_corridor_runs_deconfliction() {
        // a single row: both flights need the middle sector at the same step
        let mut cfg = config(1, 5, &[(0, 0), (0, 4)]);
        cfg.horizon_steps = 10;
        cfg.vertiport_adjacent_capacity = 2;
        let g = AirspaceGrid::build(cfg).unwrap();
        let s = g.id_at(Cell::new(0, 0)).unwrap();
        let e = g.id_at(Cell::new(0, 4)).unwrap();
        let b = backend_from_env().unwrap();
        let mut state = PlannerState::default();
        let reqs = vec![
            FlightRequest::new(FlightId(1), s, e, 0, 4, 3),
            FlightRequest::new(FlightId(2), s, e, 0, 4, 3),
        ];
        let out = run_period(b.as_ref(), &g, &mut state, reqs, &settings(Mode::FairCoplan), 0, 0).unwrap();
        assert!(out.result.deconfliction.is_some());
        assert!(out.step3.is_some());
        let plans: Vec<&FlightPlan> = out.result.served.iter().map(|s| &s.plan).collect();
        assert_eq!(plans.len(), 2);
        assert!(overlay_audit(&g, &OccupancySnapshot::new(), plans).is_empty());
        assert_eq!(last_step(&out.result), Some(5));
    }
}
