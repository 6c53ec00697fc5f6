//! Fair deconfliction: detect en-route overloads among proposed plans, then
//! re-plan the conflicting flights jointly, trading total delay cost against
//! the spread of their path-length ratios.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::airspace::{AirspaceGrid, Horizon, OccupancySnapshot, Overload, ResourceId, Timestep};
use crate::flight::{path_length, tdc, DelayCostParams, FlightId, FlightPlan, FlightRequest};
use crate::milp::{self, Backend, LinExpr, Model, Relation, Sense, SolveLimits, SolveStatus, VarId};
use crate::step1::ChoiceSet;
use crate::trajectory::{add_entry_indicators, add_presence, PlanRules, PresenceVars};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConflictReport {
    pub overloaded: Vec<Overload>,
    pub conflicting: Vec<FlightId>,
    pub clean: Vec<FlightId>,
}

impl ConflictReport {
    pub fn is_empty(&self) -> bool {
        self.overloaded.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FairnessParams {
    pub gamma: f64,
    pub alpha: f64,
}

impl FairnessParams {
    pub fn new(gamma: f64, alpha: f64) -> Result<Self, String> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(format!("gamma must be a finite value >= 0, got {gamma}"));
        }
        DelayCostParams::new(alpha)?;
        Ok(Self { gamma, alpha })
    }

    pub fn delay(&self) -> DelayCostParams {
        DelayCostParams { alpha: self.alpha }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum Step3Error {
    #[error("overload at managed cell {0:?}; choices should have prevented it")]
    ManagedOverload(Overload),
    #[error("fairness lists are not aligned by flight")]
    Misaligned,
    #[error("{0} has an empty proposed plan")]
    EmptyProposal(FlightId),
    #[error("no conflicting flights given")]
    NoFlights,
}

/// Overlays `proposals` on `occupancy` and lists every over-capacity cell.
///
/// Overloads can only arise en route; one at a vertiport or a
/// vertiport-adjacent sector is reported as an error.
pub fn detect_conflicts(
    grid: &AirspaceGrid,
    occupancy: &OccupancySnapshot,
    proposals: &[FlightPlan],
) -> Result<ConflictReport, Step3Error> {
    let overloaded = crate::airspace::overlay_audit(grid, occupancy, proposals.iter());
    if let Some(o) = overloaded.iter().find(|o| grid.is_managed(o.resource)) {
        return Err(Step3Error::ManagedOverload(*o));
    }
    let hot: BTreeSet<(ResourceId, Timestep)> = overloaded.iter().map(|o| (o.resource, o.t)).collect();
    let (mut conflicting, mut clean) = (Vec::new(), Vec::new());
    for p in proposals {
        if p.steps.iter().any(|c| hot.contains(c)) {
            conflicting.push(p.flight);
        } else {
            clean.push(p.flight);
        }
    }
    Ok(ConflictReport {
        overloaded,
        conflicting,
        clean,
    })
}

/// `max_f L(after_f)/L(before_f) - min_f L(after_f)/L(before_f)`.
pub fn fairness_value(before: &[FlightPlan], after: &[FlightPlan]) -> Result<f64, Step3Error> {
    let ratios = ratios(before, after)?;
    Ok(spread(&ratios))
}

pub fn ratios(before: &[FlightPlan], after: &[FlightPlan]) -> Result<Vec<f64>, Step3Error> {
    if before.len() != after.len() {
        return Err(Step3Error::Misaligned);
    }
    before
        .iter()
        .zip(after)
        .map(|(b, a)| {
            if a.flight != b.flight {
                return Err(Step3Error::Misaligned);
            }
            let lb = path_length(b);
            if lb == 0 {
                return Err(Step3Error::EmptyProposal(b.flight));
            }
            Ok(path_length(a) as f64 / lb as f64)
        })
        .collect()
}

/// Largest minus smallest ratio; 0 for an empty list.
pub fn spread(ratios: &[f64]) -> f64 {
    if ratios.is_empty() {
        return 0.0;
    }
    let max = ratios.iter().copied().fold(f64::MIN, f64::max);
    let min = ratios.iter().copied().fold(f64::MAX, f64::min);
    max - min
}

/// A flight under deconfliction.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConflictingFlight {
    pub request: FlightRequest,
    pub choices: ChoiceSet,
    pub proposal: FlightPlan,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeconflictionResult {
    /// Final plans in input order, for the flights that kept a plan.
    pub plans: Vec<FlightPlan>,
    /// `L(final) / L(proposal)` aligned with `plans`.
    pub ratios: Vec<f64>,
    pub fairness: f64,
    pub total_tdc: f64,
    pub objective: f64,
    /// Flights dropped because no joint plan existed, or left unplanned on
    /// solver failure.
    pub carried: Vec<FlightId>,
    pub status: SolveStatus,
    pub solve_time: Duration,
    /// Number of joint solves, including those that came back infeasible.
    pub solves: u32,
}

/// Joint deconfliction model for `flights` against `occupancy` (which
/// already holds the clean flights). Returns `Err(i)` when flight `i` has no
/// individually feasible plan.
pub fn build_model(
    grid: &AirspaceGrid,
    occupancy: &OccupancySnapshot,
    horizon: Horizon,
    flights: &[ConflictingFlight],
    params: FairnessParams,
) -> Result<(Model, Vec<PresenceVars>), usize> {
    let mut model = Model::for_horizon(Sense::Minimize, horizon.len);
    let mut all = Vec::with_capacity(flights.len());
    let mut objective = LinExpr::new();
    let mut cells: BTreeMap<(ResourceId, Timestep), Vec<VarId>> = BTreeMap::new();
    let fair = params.gamma > 0.0 && flights.len() > 1;
    let (f_max, f_min) = if fair {
        let hi = horizon.len as f64;
        (
            Some(model.add_continuous("F_max", 0.0, hi)),
            Some(model.add_continuous("F_min", 0.0, hi)),
        )
    } else {
        (None, None)
    };
    for (i, f) in flights.iter().enumerate() {
        let rules = PlanRules::negotiated(grid, occupancy, horizon, &f.request, &f.choices);
        let tag = f.request.id.to_string();
        let vars = add_presence(&mut model, &rules, &tag, false).ok_or(i)?;
        objective.extend(&vars.tdc_expr(params.alpha), 1.0);
        for (&(r, t), &v) in &vars.cells {
            if grid.is_en_route(r) {
                cells.entry((r, t)).or_default().push(v);
            }
        }
        if let (Some(hi), Some(lo)) = (f_max, f_min) {
            // rho = L(v) / L(u), linear because L(u) is fixed
            let length = add_entry_indicators(&mut model, &vars, &tag);
            let base = path_length(&f.proposal) as f64;
            let mut above = LinExpr::from(hi);
            above.extend(&length, -1.0 / base);
            model.add_constraint(format!("Fmax_{tag}"), above, Relation::Ge, 0.0);
            let mut below = LinExpr::from(lo);
            below.extend(&length, -1.0 / base);
            model.add_constraint(format!("Fmin_{tag}"), below, Relation::Le, 0.0);
        }
        all.push(vars);
    }
    for ((r, t), vars) in cells {
        let cap = occupancy.remaining(grid, r, t);
        if vars.len() as u32 > cap {
            model.add_constraint(format!("cap[{r},{t}]"), LinExpr::sum(vars), Relation::Le, cap as f64);
        }
    }
    if let (Some(hi), Some(lo)) = (f_max, f_min) {
        objective.add(hi, params.gamma);
        objective.add(lo, -params.gamma);
    }
    model.set_objective(objective);
    Ok((model, all))
}

/// Index of the flight to give up when no joint plan exists: the one with
/// the fewest resubmissions, the latest in input order among ties.
pub fn drop_candidate(flights: &[ConflictingFlight]) -> Option<usize> {
    flights
        .iter()
        .enumerate()
        .min_by_key(|(i, f)| (f.request.resubmissions, std::cmp::Reverse(*i)))
        .map(|(i, _)| i)
}

pub fn solve_step3(
    backend: &dyn Backend,
    grid: &AirspaceGrid,
    occupancy: &OccupancySnapshot,
    horizon: Horizon,
    flights: &[ConflictingFlight],
    params: FairnessParams,
    limits: &SolveLimits,
) -> Result<DeconflictionResult, Step3Error> {
    if flights.is_empty() {
        return Err(Step3Error::NoFlights);
    }
    for f in flights {
        if f.proposal.steps.is_empty() {
            return Err(Step3Error::EmptyProposal(f.request.id));
        }
    }
    let mut active: Vec<ConflictingFlight> = flights.to_vec();
    let mut carried = Vec::new();
    let mut solve_time = Duration::ZERO;
    let mut solves = 0;
    loop {
        if active.is_empty() {
            return Ok(DeconflictionResult {
                plans: Vec::new(),
                ratios: Vec::new(),
                fairness: 0.0,
                total_tdc: 0.0,
                objective: 0.0,
                carried,
                status: SolveStatus::Infeasible,
                solve_time,
                solves,
            });
        }
        let (model, vars) = match build_model(grid, occupancy, horizon, &active, params) {
            Ok(m) => m,
            Err(i) => {
                carried.push(active.remove(i).request.id);
                continue;
            }
        };
        let result = milp::solve(backend, &model, limits);
        solves += 1;
        solve_time += result.wall_time;
        match &result.status {
            SolveStatus::Optimal | SolveStatus::TimeLimitFeasible => {
                let mut plans = Vec::with_capacity(active.len());
                for v in &vars {
                    match v.extract_plan(&result) {
                        Some(p) => plans.push(p),
                        None => {
                            // A solution always places every flight; treat a
                            // malformed one as a solver failure.
                            carried.extend(active.iter().map(|f| f.request.id));
                            return Ok(failed(carried, result.status.clone(), solve_time, solves));
                        }
                    }
                }
                let before: Vec<FlightPlan> = active.iter().map(|f| f.proposal.clone()).collect();
                let ratios = ratios(&before, &plans)?;
                let total_tdc = active
                    .iter()
                    .zip(&plans)
                    .map(|(f, p)| tdc(p, &f.request, params.delay()))
                    .sum();
                return Ok(DeconflictionResult {
                    fairness: spread(&ratios),
                    ratios,
                    plans,
                    total_tdc,
                    objective: result.objective,
                    carried,
                    status: result.status,
                    solve_time,
                    solves,
                });
            }
            SolveStatus::Infeasible => {
                let i = drop_candidate(&active).expect("non-empty");
                carried.push(active.remove(i).request.id);
            }
            SolveStatus::NoSolution | SolveStatus::Error(_) => {
                carried.extend(active.iter().map(|f| f.request.id));
                return Ok(failed(carried, result.status, solve_time, solves));
            }
        }
    }
}

fn failed(carried: Vec<FlightId>, status: SolveStatus, solve_time: Duration, solves: u32) -> DeconflictionResult {
    DeconflictionResult {
        plans: Vec::new(),
        ratios: Vec::new(),
        fairness: 0.0,
        total_tdc: 0.0,
        objective: f64::NAN,
        carried,
        status,
        solve_time,
        solves,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flight::FlightId;

    fn straight(id: u64, len: u32) -> FlightPlan {
        FlightPlan::from_steps(FlightId(id), (0..len).map(|i| (ResourceId(i), i)).collect()).unwrap()
    }

    #[test]
    fn fairness_arithmetic() {
        let before = [straight(1, 4), straight(2, 8)];
        let after = [straight(1, 5), straight(2, 10)];
        assert_eq!(fairness_value(&before, &after).unwrap(), 0.0);
        assert_eq!(fairness_value(&before, &before).unwrap(), 0.0);
        let after = [straight(1, 4), straight(2, 12)];
        assert_eq!(fairness_value(&before, &after).unwrap(), 0.5);
        assert_eq!(fairness_value(&before[..1], &after[..1]).unwrap(), 0.0);
        assert_eq!(fairness_value(&before, &after[..1]), Err(Step3Error::Misaligned));
    }

    #[test]
    fn drop_prefers_fresh_late_flights() {
        let mk = |id: u64, resub: u32| {
            let mut request = FlightRequest::new(FlightId(id), ResourceId(0), ResourceId(2), 0, 2, 1);
            request.resubmissions = resub;
            ConflictingFlight {
                request,
                choices: ChoiceSet::empty(FlightId(id)),
                proposal: straight(id, 3),
            }
        };
        let fl = [mk(1, 2), mk(2, 0), mk(3, 0), mk(4, 1)];
        assert_eq!(drop_candidate(&fl), Some(2));
    }

    fn open_choices(grid: &AirspaceGrid, req: &FlightRequest, h: Horizon) -> ChoiceSet {
        let cells: Vec<(ResourceId, Timestep)> = h
            .steps()
            .flat_map(|t| {
                grid.resources()
                    .iter()
                    .filter(move |r| {
                        crate::step1::domain_window(grid, req, r.id).is_some_and(|(lo, hi)| lo <= t && t <= hi)
                    })
                    .map(move |r| (r.id, t))
            })
            .collect();
        ChoiceSet::from_cells(req, cells)
    }

    #[test]
    fn head_on_overload_is_resolved() {
        use crate::airspace::Cell;
        use crate::milp::backend_from_env;
        use crate::step2::solve_step2;
        let g = AirspaceGrid::build(crate::airspace::tests::config(3, 5, &[(1, 0), (1, 4)])).unwrap();
        let h = Horizon::new(0, 12);
        let s = g.id_at(Cell::new(1, 0)).unwrap();
        let e = g.id_at(Cell::new(1, 4)).unwrap();
        let b = backend_from_env().unwrap();
        let occ = OccupancySnapshot::new();
        let delay = DelayCostParams::new(0.3).unwrap();
        let limits = SolveLimits::default();
        let flights: Vec<ConflictingFlight> = (1..=2)
            .map(|id| {
                let request = FlightRequest::new(FlightId(id), s, e, 1, 5, 3);
                let choices = open_choices(&g, &request, h);
                let out = solve_step2(b.as_ref(), &g, &occ, h, &request, &choices, delay, &limits).unwrap();
                ConflictingFlight {
                    request,
                    choices,
                    proposal: out.plan.unwrap(),
                }
            })
            .collect();
        let proposals: Vec<FlightPlan> = flights.iter().map(|f| f.proposal.clone()).collect();
        let report = detect_conflicts(&g, &occ, &proposals).unwrap();
        assert!(!report.is_empty());
        assert_eq!(report.conflicting.len(), 2);
        for gamma in [0.0, 5.0] {
            let params = FairnessParams::new(gamma, 0.3).unwrap();
            let out = solve_step3(b.as_ref(), &g, &occ, h, &flights, params, &limits).unwrap();
            assert!(out.carried.is_empty());
            assert_eq!(out.plans.len(), 2);
            assert!(crate::airspace::overlay_audit(&g, &occ, out.plans.iter()).is_empty());
            for (f, p) in flights.iter().zip(&out.plans) {
                let rules = PlanRules::negotiated(&g, &occ, h, &f.request, &f.choices);
                assert!(rules.check(p).is_empty());
            }
            // one flight waits a step in an approach sector: no change in length
            assert!((out.total_tdc - 0.3).abs() < 1e-9, "{}", out.total_tdc);
            assert_eq!(out.fairness, 0.0);
        }
    }
}
