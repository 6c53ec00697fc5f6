//! Choice setting: the provider jointly decides, for every requesting
//! flight, which vertiport and vertiport-adjacent cells it may use and when.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::airspace::{AirspaceGrid, Horizon, OccupancySnapshot, ResourceId, Timestep};
use crate::flight::{FlightId, FlightRequest};
use crate::milp::{self, Backend, LinExpr, Model, Relation, Sense, SolveLimits, SolveStatus, VarId};

/// Cells a flight is offered, `c[r, t] = 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceSet {
    pub flight: FlightId,
    pub choices: BTreeSet<(ResourceId, Timestep)>,
    /// Offered steps at the origin vertiport.
    pub departure_slots: Vec<Timestep>,
    /// Offered steps at the destination vertiport.
    pub arrival_slots: Vec<Timestep>,
}

impl ChoiceSet {
    pub fn empty(flight: FlightId) -> Self {
        Self {
            flight,
            choices: BTreeSet::new(),
            departure_slots: Vec::new(),
            arrival_slots: Vec::new(),
        }
    }

    pub fn from_cells(request: &FlightRequest, cells: impl IntoIterator<Item = (ResourceId, Timestep)>) -> Self {
        let choices: BTreeSet<_> = cells.into_iter().collect();
        let slots = |v: ResourceId| choices.iter().filter(|&&(r, _)| r == v).map(|&(_, t)| t).collect();
        Self {
            flight: request.id,
            departure_slots: slots(request.origin),
            arrival_slots: slots(request.destination),
            choices,
        }
    }

    pub fn contains(&self, r: ResourceId, t: Timestep) -> bool {
        self.choices.contains(&(r, t))
    }

    pub fn len(&self) -> usize {
        self.choices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choices.is_empty()
    }

    /// A flight without a departure slot is unassigned this period.
    pub fn is_assigned(&self) -> bool {
        !self.departure_slots.is_empty()
    }
}

/// `(flight index, resource, step)`.
pub type ChoiceKey = (usize, ResourceId, Timestep);

/// One constraint instance of the choice model over permitted cells; cells
/// outside the permitted domain are fixed at zero and never listed.
#[derive(Clone, Debug, PartialEq)]
pub enum ChoiceRule {
    /// Joint capacity: at most `cap` of `cells` offered.
    Capacity {
        r: ResourceId,
        t: Timestep,
        cap: u32,
        cells: Vec<ChoiceKey>,
    },
    /// A departure slot needs some adjacent cell offered on the next step.
    Departure { slot: ChoiceKey, next: Vec<ChoiceKey> },
    /// An arrival slot needs some adjacent cell offered on the step before.
    Arrival { slot: ChoiceKey, prev: Vec<ChoiceKey> },
    /// Offered at `t - 1` for fewer than `l` of `[t - l, t - 1]` forces an
    /// offer at `t`; `cur` is `None` when `(r, t)` is outside the domain.
    Dwell {
        l: u32,
        window: Vec<ChoiceKey>,
        prev: ChoiceKey,
        cur: Option<ChoiceKey>,
    },
}

impl ChoiceRule {
    /// Evaluates the rule under an assignment of the permitted cells.
    pub fn holds(&self, on: impl Fn(&ChoiceKey) -> bool) -> bool {
        match self {
            Self::Capacity { cap, cells, .. } => cells.iter().filter(|k| on(k)).count() as u32 <= *cap,
            Self::Departure { slot, next } => !on(slot) || next.iter().any(&on),
            Self::Arrival { slot, prev } => !on(slot) || prev.iter().any(&on),
            Self::Dwell { l, window, prev, cur } => {
                let count = window.iter().filter(|k| on(k)).count() as u32;
                !(on(prev) && count < *l) || cur.as_ref().is_some_and(&on)
            }
        }
    }

    /// Cells the rule reads.
    pub fn scope(&self) -> Vec<ChoiceKey> {
        match self {
            Self::Capacity { cells, .. } => cells.clone(),
            Self::Departure { slot, next } => std::iter::once(*slot).chain(next.iter().copied()).collect(),
            Self::Arrival { slot, prev } => std::iter::once(*slot).chain(prev.iter().copied()).collect(),
            Self::Dwell { window, prev, cur, .. } => {
                let mut v = window.clone();
                v.push(*prev);
                v.extend(cur.iter().copied());
                v
            }
        }
    }
}

impl fmt::Display for ChoiceRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Capacity { r, t, cap, .. } => write!(f, "capacity {cap} of {r} at {t}"),
            Self::Departure { slot: (i, r, t), .. } => {
                write!(f, "departure of flight #{i} from {r} at {t} has no next cell")
            }
            Self::Arrival { slot: (i, r, t), .. } => {
                write!(f, "arrival of flight #{i} at {r} at {t} has no approach cell")
            }
            Self::Dwell { prev: (i, r, t), l, .. } => {
                write!(f, "flight #{i} offered {r} at {t} for less than {l} steps")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ChoiceViolation {
    Misaligned { index: usize },
    NotPermitted(ChoiceKey),
    Rule(ChoiceRule),
    UnassignedWithChoices(FlightId),
}

impl fmt::Display for ChoiceViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Misaligned { index } => write!(f, "choice set #{index} does not match its request"),
            Self::NotPermitted((i, r, t)) => write!(f, "flight #{i} offered {r} at {t} outside its domain"),
            Self::Rule(rule) => write!(f, "violated: {rule}"),
            Self::UnassignedWithChoices(id) => write!(f, "{id} unassigned but holds choices"),
        }
    }
}

/// The choice model's domain and constraint instances for one batch.
#[derive(Clone, Debug)]
pub struct ChoiceProblem<'a> {
    pub grid: &'a AirspaceGrid,
    pub requests: &'a [FlightRequest],
    pub horizon: Horizon,
    /// Permitted cells ordered by `(step, flight, resource)`.
    pub cells: Vec<ChoiceKey>,
    pub rules: Vec<ChoiceRule>,
    permitted: HashSet<ChoiceKey>,
}

impl<'a> ChoiceProblem<'a> {
    pub fn new(
        grid: &'a AirspaceGrid,
        occupancy: &OccupancySnapshot,
        horizon: Horizon,
        requests: &'a [FlightRequest],
    ) -> Self {
        let mut cells = Vec::new();
        for (i, req) in requests.iter().enumerate() {
            for t in horizon.steps() {
                for res in grid.resources() {
                    let r = res.id;
                    if domain_window(grid, req, r).is_some_and(|(lo, hi)| lo <= t && t <= hi)
                        && occupancy.remaining(grid, r, t) >= 1
                    {
                        cells.push((i, r, t));
                    }
                }
            }
        }
        cells.sort_by_key(|&(i, r, t)| (t, i, r));
        let permitted: HashSet<ChoiceKey> = cells.iter().copied().collect();
        let on = |k: ChoiceKey| permitted.contains(&k).then_some(k);

        let mut rules = Vec::new();
        let mut by_cell: HashMap<(ResourceId, Timestep), Vec<ChoiceKey>> = HashMap::new();
        for &k in &cells {
            by_cell.entry((k.1, k.2)).or_default().push(k);
        }
        let mut cell_keys: Vec<_> = by_cell.keys().copied().collect();
        cell_keys.sort_by_key(|&(r, t)| (t, r));
        for (r, t) in cell_keys {
            let list = &by_cell[&(r, t)];
            let cap = occupancy.remaining(grid, r, t);
            if list.len() as u32 > cap {
                rules.push(ChoiceRule::Capacity {
                    r,
                    t,
                    cap,
                    cells: list.clone(),
                });
            }
        }
        for (i, req) in requests.iter().enumerate() {
            for t in horizon.steps() {
                if let Some(slot) = on((i, req.origin, t)) {
                    let next = grid
                        .neighbors(req.origin)
                        .iter()
                        .filter_map(|&n| on((i, n, t + 1)))
                        .collect();
                    rules.push(ChoiceRule::Departure { slot, next });
                }
                if let Some(slot) = on((i, req.destination, t)) {
                    let prev = match t.checked_sub(1) {
                        Some(p) => grid
                            .neighbors(req.destination)
                            .iter()
                            .filter_map(|&n| on((i, n, p)))
                            .collect(),
                        None => Vec::new(),
                    };
                    rules.push(ChoiceRule::Arrival { slot, prev });
                }
            }
            for r in grid.vertiport_adjacent_sectors() {
                let l = req.dwell.get(r);
                if l < 2 {
                    continue;
                }
                for t in horizon.start + 1..=horizon.end() {
                    let Some(prev) = on((i, r, t - 1)) else { continue };
                    let from = t.saturating_sub(l).max(horizon.start);
                    let window = (from..t).filter_map(|s| on((i, r, s))).collect();
                    rules.push(ChoiceRule::Dwell {
                        l,
                        window,
                        prev,
                        cur: on((i, r, t)),
                    });
                }
            }
        }
        Self {
            grid,
            requests,
            horizon,
            cells,
            rules,
            permitted,
        }
    }

    pub fn permitted(&self, key: &ChoiceKey) -> bool {
        self.permitted.contains(key)
    }

    /// Re-checks choice sets (aligned with the requests) by substitution.
    pub fn check(&self, sets: &[ChoiceSet]) -> Vec<ChoiceViolation> {
        let mut out = Vec::new();
        if sets.len() != self.requests.len() {
            out.push(ChoiceViolation::Misaligned {
                index: sets.len().min(self.requests.len()),
            });
            return out;
        }
        for (i, (set, req)) in sets.iter().zip(self.requests).enumerate() {
            let expected = ChoiceSet::from_cells(req, set.choices.iter().copied());
            if set.flight != req.id || expected != *set {
                out.push(ChoiceViolation::Misaligned { index: i });
            }
            for &(r, t) in &set.choices {
                if !self.permitted(&(i, r, t)) {
                    out.push(ChoiceViolation::NotPermitted((i, r, t)));
                }
            }
        }
        let on = |k: &ChoiceKey| sets[k.0].contains(k.1, k.2);
        for rule in &self.rules {
            if !rule.holds(on) {
                out.push(ChoiceViolation::Rule(rule.clone()));
            }
        }
        out
    }

    /// Builds the maximize-choices model. Variables follow `self.cells`.
    pub fn build_model(&self) -> (Model, HashMap<ChoiceKey, VarId>) {
        let mut model = Model::for_horizon(Sense::Maximize, self.horizon.len);
        let m = model.big_m();
        let mut vars = HashMap::with_capacity(self.cells.len());
        for &(i, r, t) in &self.cells {
            vars.insert(
                (i, r, t),
                model.add_binary(format!("c_{}[{r},{t}]", self.requests[i].id)),
            );
        }
        model.set_objective(LinExpr::sum(self.cells.iter().map(|k| vars[k])));
        let sum = |keys: &[ChoiceKey]| LinExpr::sum(keys.iter().map(|k| vars[k]));
        let mut aux = 0usize;
        for rule in &self.rules {
            match rule {
                ChoiceRule::Capacity { r, t, cap, cells } => {
                    model.add_constraint(format!("cap[{r},{t}]"), sum(cells), Relation::Le, *cap as f64);
                }
                ChoiceRule::Departure { slot, next } => {
                    // M (1 - c[s, t]) >= 1 - sum c[r, t + 1]
                    let mut e = sum(next);
                    e.add(vars[slot], -m);
                    model.add_constraint(format!("dep[{}]", key_name(slot)), e, Relation::Ge, 1.0 - m);
                }
                ChoiceRule::Arrival { slot, prev } => {
                    let mut e = sum(prev);
                    e.add(vars[slot], -m);
                    model.add_constraint(format!("arr[{}]", key_name(slot)), e, Relation::Ge, 1.0 - m);
                }
                ChoiceRule::Dwell { l, window, prev, cur } => {
                    let a = model.add_binary(format!("A[{aux}]"));
                    let l = *l as f64;
                    // M A >= l - sum
                    model.add_constraint(format!("dwA1[{aux}]"), sum(window).with(a, m), Relation::Ge, l);
                    // M (1 - A) >= 1 - l + sum
                    model.add_constraint(
                        format!("dwA0[{aux}]"),
                        sum(window).with(a, m),
                        Relation::Le,
                        m + l - 1.0,
                    );
                    // c[r, t] >= c[r, t - 1] + A - 1
                    let mut e = LinExpr::new().with(vars[prev], -1.0).with(a, -1.0);
                    if let Some(c) = cur {
                        e.add(vars[c], 1.0);
                    }
                    model.add_constraint(format!("dwell[{aux}]"), e, Relation::Ge, -1.0);
                    aux += 1;
                }
            }
        }
        (model, vars)
    }
}

fn key_name(&(i, r, t): &ChoiceKey) -> String {
    format!("{i},{r},{t}")
}

/// Steps in which `r` may be offered to `req`, or `None` if never.
///
/// The origin is limited to the departure window, the destination to the
/// arrival window, vertiport-adjacent sectors to the operating window, and
/// every other resource is not managed by choices.
pub fn domain_window(grid: &AirspaceGrid, req: &FlightRequest, r: ResourceId) -> Option<(Timestep, Timestep)> {
    if r == req.origin {
        let w = req.departure_window();
        Some((*w.start(), *w.end()))
    } else if r == req.destination {
        let w = req.arrival_window();
        Some((*w.start(), *w.end()))
    } else if grid.is_vertiport_adjacent(r) {
        let w = req.operating_window();
        Some((*w.start(), *w.end()))
    } else {
        None
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Step1Result {
    /// One set per request, in request order.
    pub choice_sets: Vec<ChoiceSet>,
    pub unassigned: Vec<FlightId>,
    /// Model objective (total offered choices before clearing unassigned flights).
    pub objective: f64,
    pub status: SolveStatus,
    pub solve_time: Duration,
}

#[derive(Debug, Error)]
pub enum Step1Error {
    #[error("choice model reported infeasible; the empty offer is always feasible")]
    Infeasible,
    #[error("choice model solve failed: {0}")]
    Solver(String),
}

/// Solves the choice model for one batch of requests.
///
/// Flights left without a departure slot are reported unassigned and all
/// their other choices are cleared, which keeps every constraint satisfied.
pub fn solve_step1(
    backend: &dyn Backend,
    grid: &AirspaceGrid,
    occupancy: &OccupancySnapshot,
    horizon: Horizon,
    requests: &[FlightRequest],
    limits: &SolveLimits,
) -> Result<Step1Result, Step1Error> {
    let problem = ChoiceProblem::new(grid, occupancy, horizon, requests);
    let (model, vars) = problem.build_model();
    let result = milp::solve(backend, &model, limits);
    match &result.status {
        SolveStatus::Optimal | SolveStatus::TimeLimitFeasible => {}
        SolveStatus::Infeasible => return Err(Step1Error::Infeasible),
        SolveStatus::NoSolution => return Err(Step1Error::Solver("no incumbent within the time limit".into())),
        SolveStatus::Error(e) => return Err(Step1Error::Solver(e.clone())),
    }
    let mut choice_sets = Vec::with_capacity(requests.len());
    let mut unassigned = Vec::new();
    for (i, req) in requests.iter().enumerate() {
        let cells = problem
            .cells
            .iter()
            .filter(|k| k.0 == i && result.is_set(vars[*k]))
            .map(|&(_, r, t)| (r, t));
        let set = ChoiceSet::from_cells(req, cells);
        if set.is_assigned() {
            choice_sets.push(set);
        } else {
            unassigned.push(req.id);
            choice_sets.push(ChoiceSet::empty(req.id));
        }
    }
    Ok(Step1Result {
        choice_sets,
        unassigned,
        objective: result.objective,
        status: result.status,
        solve_time: result.wall_time,
    })
}

/// Substitution checker for a step-1 result, including the rule that
/// unassigned flights hold no choices.
pub fn check_choices(
    grid: &AirspaceGrid,
    occupancy: &OccupancySnapshot,
    horizon: Horizon,
    requests: &[FlightRequest],
    result: &Step1Result,
) -> Vec<ChoiceViolation> {
    let problem = ChoiceProblem::new(grid, occupancy, horizon, requests);
    let mut out = problem.check(&result.choice_sets);
    for set in &result.choice_sets {
        if !set.is_assigned() && !set.is_empty() {
            out.push(ChoiceViolation::UnassignedWithChoices(set.flight));
        }
    }
    out
}
