//! Fixed-route traffic flow management: each flight keeps its shortest
//! route and the provider schedules departures and holds centrally.
//!
//! Serving as many flights as possible comes first; among schedules that
//! serve the same number, total delay cost is minimized.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::airspace::{AirspaceGrid, Horizon, OccupancySnapshot, ResourceId, Timestep};
use crate::flight::{tdc, DelayCostParams, FlightId, FlightPlan, FlightRequest};
use crate::milp::{self, Backend, LinExpr, Model, Relation, Sense, SolveLimits, SolveStatus, VarId};
use crate::routing::FixedRoute;
use crate::trajectory::{add_presence, PlanRules, PlanViolation, PresenceVars};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TfmpResult {
    /// Scheduled plans of served flights, in request order.
    pub plans: Vec<FlightPlan>,
    pub carried: Vec<FlightId>,
    pub total_tdc: f64,
    pub objective: f64,
    pub status: SolveStatus,
    pub solve_time: Duration,
}

#[derive(Debug, Error)]
pub enum TfmpError {
    #[error("route of {0} does not match its request")]
    RouteMismatch(FlightId),
    #[error("fixed-route model solve failed: {0}")]
    Solver(String),
}

/// Penalty per unserved flight; exceeds any achievable delay-cost total.
pub fn unserved_penalty(flights: usize, horizon: Horizon) -> f64 {
    ((flights + 1) as f64) * (horizon.len as f64 + 1.0)
}

/// The joint model plus presence variables per flight (`None` for flights
/// that have no schedule at all).
pub fn build_model(
    grid: &AirspaceGrid,
    occupancy: &OccupancySnapshot,
    horizon: Horizon,
    flights: &[(FlightRequest, FixedRoute)],
    params: DelayCostParams,
) -> (Model, Vec<Option<PresenceVars>>) {
    let mut model = Model::for_horizon(Sense::Minimize, horizon.len);
    let penalty = unserved_penalty(flights.len(), horizon);
    let mut objective = LinExpr::new();
    let mut all = Vec::with_capacity(flights.len());
    let mut cells: BTreeMap<(ResourceId, Timestep), Vec<VarId>> = BTreeMap::new();
    for (req, route) in flights {
        let rules = PlanRules::fixed_route(grid, occupancy, horizon, req, &route.resources);
        let vars = add_presence(&mut model, &rules, &req.id.to_string(), true);
        objective.add_constant(penalty);
        if let Some(v) = &vars {
            objective.extend(&v.tdc_expr(params.alpha), 1.0);
            objective.add(v.served.expect("optional presence"), -penalty);
            for (&k, &var) in &v.cells {
                cells.entry(k).or_default().push(var);
            }
        }
        all.push(vars);
    }
    for ((r, t), vars) in cells {
        let cap = occupancy.remaining(grid, r, t);
        if vars.len() as u32 > cap {
            model.add_constraint(format!("cap[{r},{t}]"), LinExpr::sum(vars), Relation::Le, cap as f64);
        }
    }
    model.set_objective(objective);
    (model, all)
}

pub fn solve_tfmp(
    backend: &dyn Backend,
    grid: &AirspaceGrid,
    occupancy: &OccupancySnapshot,
    horizon: Horizon,
    flights: &[(FlightRequest, FixedRoute)],
    params: DelayCostParams,
    limits: &SolveLimits,
) -> Result<TfmpResult, TfmpError> {
    for (req, route) in flights {
        if route.flight != req.id
            || route.resources.first() != Some(&req.origin)
            || route.resources.last() != Some(&req.destination)
        {
            return Err(TfmpError::RouteMismatch(req.id));
        }
    }
    let (model, vars) = build_model(grid, occupancy, horizon, flights, params);
    let result = milp::solve(backend, &model, limits);
    match &result.status {
        SolveStatus::Optimal | SolveStatus::TimeLimitFeasible => {}
        SolveStatus::Infeasible => {
            return Err(TfmpError::Solver(
                "reported infeasible; serving nobody is always feasible".into(),
            ))
        }
        SolveStatus::NoSolution => return Err(TfmpError::Solver("no incumbent within the time limit".into())),
        SolveStatus::Error(e) => return Err(TfmpError::Solver(e.clone())),
    }
    let mut plans = Vec::new();
    let mut carried = Vec::new();
    let mut total_tdc = 0.0;
    for ((req, _), v) in flights.iter().zip(&vars) {
        match v.as_ref().and_then(|v| v.extract_plan(&result)) {
            Some(plan) => {
                total_tdc += tdc(&plan, req, params);
                plans.push(plan);
            }
            None => carried.push(req.id),
        }
    }
    Ok(TfmpResult {
        plans,
        carried,
        total_tdc,
        objective: result.objective,
        status: result.status,
        solve_time: result.wall_time,
    })
}

/// Route order, dwell and window rules for one scheduled plan.
pub fn check_schedule(
    grid: &AirspaceGrid,
    occupancy: &OccupancySnapshot,
    horizon: Horizon,
    request: &FlightRequest,
    route: &FixedRoute,
    plan: &FlightPlan,
) -> Vec<PlanViolation> {
    PlanRules::fixed_route(grid, occupancy, horizon, request, &route.resources).check(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::airspace::tests::config;
    use crate::airspace::{overlay_audit, Cell};
    use crate::milp::backend_from_env;
    use crate::routing::fixed_route;

    #[test]
    fn uncontended_flights_leave_on_time() {
        let g = AirspaceGrid::build(config(3, 5, &[(0, 0), (2, 4)])).unwrap();
        let h = Horizon::new(0, 14);
        let s = g.id_at(Cell::new(0, 0)).unwrap();
        let e = g.id_at(Cell::new(2, 4)).unwrap();
        let req = FlightRequest::new(FlightId(1), s, e, 1, 7, 3);
        let route = fixed_route(&g, &req).unwrap();
        let b = backend_from_env().unwrap();
        let occ = OccupancySnapshot::new();
        let out = solve_tfmp(
            b.as_ref(),
            &g,
            &occ,
            h,
            &[(req.clone(), route.clone())],
            DelayCostParams::new(0.3).unwrap(),
            &SolveLimits::default(),
        )
        .unwrap();
        assert_eq!(out.plans.len(), 1);
        assert_eq!(out.total_tdc, 0.0);
        assert!(check_schedule(&g, &occ, h, &req, &route, &out.plans[0]).is_empty());
    }

    #[test]
    fn shared_sector_holds_one_flight() {
        // both flights route along the single middle row
        let g = AirspaceGrid::build(config(1, 5, &[(0, 0), (0, 4)])).unwrap();
        let h = Horizon::new(0, 12);
        let s = g.id_at(Cell::new(0, 0)).unwrap();
        let e = g.id_at(Cell::new(0, 4)).unwrap();
        let reqs = [
            FlightRequest::new(FlightId(1), s, e, 1, 5, 3),
            FlightRequest::new(FlightId(2), s, e, 1, 5, 3),
        ];
        let flights: Vec<_> = reqs.iter().map(|r| (r.clone(), fixed_route(&g, r).unwrap())).collect();
        let b = backend_from_env().unwrap();
        let occ = OccupancySnapshot::new();
        let out = solve_tfmp(
            b.as_ref(),
            &g,
            &occ,
            h,
            &flights,
            DelayCostParams::new(0.3).unwrap(),
            &SolveLimits::default(),
        )
        .unwrap();
        assert_eq!(out.plans.len(), 2);
        // the middle sector has capacity 1: one flight holds a step in the
        // approach sector, which costs only arrival delay
        assert!((out.total_tdc - 0.3).abs() < 1e-9);
        assert!(overlay_audit(&g, &occ, out.plans.iter()).is_empty());
    }
}
