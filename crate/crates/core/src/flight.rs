//! Flight requests, plans and the delay-cost arithmetic shared by every step.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::airspace::{AirspaceGrid, Horizon, ResourceId, Timestep};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FlightId(pub u64);

impl fmt::Display for FlightId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OperatorId(pub u32);

/// Minimum number of steps a flight must stay in each resource it enters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DwellTimes {
    pub default: u32,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<ResourceId, u32>,
}

impl Default for DwellTimes {
    fn default() -> Self {
        Self {
            default: 1,
            overrides: BTreeMap::new(),
        }
    }
}

impl DwellTimes {
    pub fn get(&self, r: ResourceId) -> u32 {
        self.overrides.get(&r).copied().unwrap_or(self.default)
    }

    pub fn with(mut self, r: ResourceId, steps: u32) -> Self {
        self.overrides.insert(r, steps);
        self
    }

    pub fn max(&self) -> u32 {
        self.overrides.values().copied().fold(self.default, u32::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlightRequest {
    pub id: FlightId,
    pub operator: OperatorId,
    pub origin: ResourceId,
    pub destination: ResourceId,
    /// Requested departure step (shifted on every resubmission).
    pub departure: Timestep,
    /// Requested arrival step (shifted on every resubmission).
    pub arrival: Timestep,
    /// Flexibility window in steps.
    pub flexibility: u32,
    pub dwell: DwellTimes,
    #[serde(default)]
    pub resubmissions: u32,
    /// Departure asked for in the first submission.
    pub original_departure: Timestep,
    pub original_arrival: Timestep,
}

#[derive(Debug, Error, PartialEq)]
pub enum RequestError {
    #[error("{0}: origin equals destination")]
    SameEndpoints(FlightId),
    #[error("{0}: departure must precede arrival")]
    Order(FlightId),
    #[error("{0}: endpoint {1} is not a vertiport of the grid")]
    NotVertiport(FlightId, ResourceId),
    #[error("{0}: dwell times must be at least 1")]
    Dwell(FlightId),
}

impl FlightRequest {
    pub fn new(
        id: FlightId,
        origin: ResourceId,
        destination: ResourceId,
        departure: Timestep,
        arrival: Timestep,
        flexibility: u32,
    ) -> Self {
        Self {
            id,
            operator: OperatorId(0),
            origin,
            destination,
            departure,
            arrival,
            flexibility,
            dwell: DwellTimes::default(),
            resubmissions: 0,
            original_departure: departure,
            original_arrival: arrival,
        }
    }

    pub fn validate(&self, grid: &AirspaceGrid) -> Result<(), RequestError> {
        if self.origin == self.destination {
            return Err(RequestError::SameEndpoints(self.id));
        }
        if self.departure >= self.arrival {
            return Err(RequestError::Order(self.id));
        }
        for r in [self.origin, self.destination] {
            if !grid.contains(r) || !grid.is_vertiport(r) {
                return Err(RequestError::NotVertiport(self.id, r));
            }
        }
        if self.dwell.default == 0 || self.dwell.overrides.values().any(|&l| l == 0) {
            return Err(RequestError::Dwell(self.id));
        }
        Ok(())
    }

    pub fn departure_window(&self) -> RangeInclusive<Timestep> {
        self.departure..=self.departure + self.flexibility
    }

    pub fn arrival_window(&self) -> RangeInclusive<Timestep> {
        self.arrival..=self.arrival + self.flexibility
    }

    /// Steps in which the flight may be offered anything at all.
    pub fn operating_window(&self) -> RangeInclusive<Timestep> {
        self.departure..=self.arrival + self.flexibility
    }

    /// Whether the whole operating window lies inside `horizon`.
    pub fn fits(&self, horizon: &Horizon) -> bool {
        horizon.contains(self.departure) && horizon.contains(self.arrival + self.flexibility)
    }

    /// The resubmitted request after missing a planning period of `shift` steps.
    pub fn carried_over(&self, shift: u32) -> Self {
        Self {
            departure: self.departure + shift,
            arrival: self.arrival + shift,
            resubmissions: self.resubmissions + 1,
            ..self.clone()
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("plan has no presence")]
    Empty,
    #[error("presence is not one resource per consecutive step at step {0}")]
    NotContiguous(Timestep),
}

/// One resource per step over `[departure, arrival]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlightPlan {
    pub flight: FlightId,
    /// `(resource, step)` in step order.
    pub steps: Vec<(ResourceId, Timestep)>,
    pub departure: Timestep,
    pub arrival: Timestep,
    pub path_length: u32,
}

impl FlightPlan {
    pub fn from_steps(flight: FlightId, mut steps: Vec<(ResourceId, Timestep)>) -> Result<Self, PlanError> {
        steps.sort_by_key(|&(_, t)| t);
        let (&(_, departure), &(_, arrival)) = match (steps.first(), steps.last()) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(PlanError::Empty),
        };
        for (i, w) in steps.windows(2).enumerate() {
            if w[1].1 != w[0].1 + 1 {
                return Err(PlanError::NotContiguous(steps[i + 1].1));
            }
        }
        let path_length = count_entries(&steps);
        Ok(Self {
            flight,
            steps,
            departure,
            arrival,
            path_length,
        })
    }

    pub fn resource_at(&self, t: Timestep) -> Option<ResourceId> {
        if t < self.departure || t > self.arrival {
            return None;
        }
        self.steps.get((t - self.departure) as usize).map(|&(r, _)| r)
    }

    pub fn resources(&self) -> impl Iterator<Item = ResourceId> + '_ {
        self.steps.iter().map(|&(r, _)| r)
    }

    /// The maximal runs as `(resource, entry step, length)`.
    pub fn runs(&self) -> Vec<(ResourceId, Timestep, u32)> {
        let mut out: Vec<(ResourceId, Timestep, u32)> = Vec::new();
        for &(r, t) in &self.steps {
            match out.last_mut() {
                Some((last, _, len)) if *last == r => *len += 1,
                _ => out.push((r, t, 1)),
            }
        }
        out
    }
}

fn count_entries(steps: &[(ResourceId, Timestep)]) -> u32 {
    let mut n = 0;
    let mut prev = None;
    for &(r, _) in steps {
        if prev != Some(r) {
            n += 1;
        }
        prev = Some(r);
    }
    n
}

/// Number of resource entries (maximal runs) in `plan`; re-entering a
/// resource counts again.
pub fn path_length(plan: &FlightPlan) -> u32 {
    count_entries(&plan.steps)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayCostParams {
    /// Weight of arrival (airborne) delay; departure delay gets `1 - alpha`.
    pub alpha: f64,
}

impl DelayCostParams {
    pub fn new(alpha: f64) -> Result<Self, String> {
        if (0.0..=1.0).contains(&alpha) {
            Ok(Self { alpha })
        } else {
            Err(format!("alpha must lie in [0, 1], got {alpha}"))
        }
    }
}

/// `alpha * arrival_delay + (1 - alpha) * departure_delay`.
pub fn delay_cost(arrival_delay: i64, departure_delay: i64, params: DelayCostParams) -> f64 {
    params.alpha * arrival_delay as f64 + (1.0 - params.alpha) * departure_delay as f64
}

/// Total delay cost of `plan` against the request's current times.
pub fn tdc(plan: &FlightPlan, request: &FlightRequest, params: DelayCostParams) -> f64 {
    delay_cost(
        i64::from(plan.arrival) - i64::from(request.arrival),
        i64::from(plan.departure) - i64::from(request.departure),
        params,
    )
}

/// Delay cost measured against the first submission, so time lost to
/// carryovers is included.
pub fn tdc_vs_original(plan: &FlightPlan, request: &FlightRequest, params: DelayCostParams) -> f64 {
    delay_cost(
        i64::from(plan.arrival) - i64::from(request.original_arrival),
        i64::from(plan.departure) - i64::from(request.original_departure),
        params,
    )
}
