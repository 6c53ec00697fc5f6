//! Operator trajectory planning: each flight minimizes its own delay cost
//! inside the choices it was offered.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::airspace::{AirspaceGrid, Horizon, OccupancySnapshot};
use crate::flight::{tdc, DelayCostParams, FlightId, FlightPlan, FlightRequest};
use crate::milp::{self, Backend, Model, Sense, SolveLimits, SolveStatus};
use crate::step1::ChoiceSet;
use crate::trajectory::{add_presence, PlanRules, PlanViolation};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Step2Outcome {
    pub flight: FlightId,
    /// `None` when no feasible plan exists; the flight is carried over.
    pub plan: Option<FlightPlan>,
    pub tdc: Option<f64>,
    pub status: SolveStatus,
    pub solve_time: Duration,
}

#[derive(Debug, Error, PartialEq)]
pub enum Step2Error {
    #[error("{0}: empty choice set")]
    EmptyChoices(FlightId),
    #[error("{0}: choice set belongs to {1}")]
    Mismatch(FlightId, FlightId),
}

/// Builds the operator's minimum-delay model. `None` means no walk from
/// origin to destination exists inside the choices.
pub fn build_model(rules: &PlanRules, params: DelayCostParams) -> Option<(Model, crate::trajectory::PresenceVars)> {
    let mut model = Model::for_horizon(Sense::Minimize, rules.horizon.len);
    let tag = rules.request.id.to_string();
    let vars = add_presence(&mut model, rules, &tag, false)?;
    model.set_objective(vars.tdc_expr(params.alpha));
    Some((model, vars))
}

#[allow(clippy::too_many_arguments)]
pub fn solve_step2(
    backend: &dyn Backend,
    grid: &AirspaceGrid,
    occupancy: &OccupancySnapshot,
    horizon: Horizon,
    request: &FlightRequest,
    choices: &ChoiceSet,
    params: DelayCostParams,
    limits: &SolveLimits,
) -> Result<Step2Outcome, Step2Error> {
    if choices.flight != request.id {
        return Err(Step2Error::Mismatch(request.id, choices.flight));
    }
    if choices.is_empty() {
        return Err(Step2Error::EmptyChoices(request.id));
    }
    let rules = PlanRules::negotiated(grid, occupancy, horizon, request, choices);
    let Some((model, vars)) = build_model(&rules, params) else {
        return Ok(Step2Outcome {
            flight: request.id,
            plan: None,
            tdc: None,
            status: SolveStatus::Infeasible,
            solve_time: Duration::ZERO,
        });
    };
    let result = milp::solve(backend, &model, limits);
    let plan = vars.extract_plan(&result);
    Ok(Step2Outcome {
        flight: request.id,
        tdc: plan.as_ref().map(|p| tdc(p, request, params)),
        plan,
        status: result.status,
        solve_time: result.wall_time,
    })
}

/// Solves every `(request, choices)` pair against the same snapshot,
/// concurrently when the `parallel` feature is on. Output order follows input.
pub fn solve_all(
    backend: &dyn Backend,
    grid: &AirspaceGrid,
    occupancy: &OccupancySnapshot,
    horizon: Horizon,
    items: &[(FlightRequest, ChoiceSet)],
    params: DelayCostParams,
    limits: &SolveLimits,
) -> Vec<Result<Step2Outcome, Step2Error>> {
    let one = |(req, ch): &(FlightRequest, ChoiceSet)| {
        solve_step2(backend, grid, occupancy, horizon, req, ch, params, limits)
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(one).collect()
    }
}

/// Substitution check of a proposed plan against the operator's rules.
pub fn check_proposal(
    grid: &AirspaceGrid,
    occupancy: &OccupancySnapshot,
    horizon: Horizon,
    request: &FlightRequest,
    choices: &ChoiceSet,
    plan: &FlightPlan,
) -> Vec<PlanViolation> {
    PlanRules::negotiated(grid, occupancy, horizon, request, choices).check(plan)
}
