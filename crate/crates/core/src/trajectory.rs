//! Presence-variable trajectory models shared by operator planning, joint
//! deconfliction and the fixed-route baseline, plus the plan checker that
//! every solver output and every oracle candidate goes through.
//!
//! `u[r, t] = 1` means the flight is in resource `r` at absolute step `t`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::airspace::{AirspaceGrid, Horizon, Occupancy, OccupancySnapshot, ResourceId, Timestep};
use crate::flight::{FlightPlan, FlightRequest};
use crate::milp::{LinExpr, Model, Relation, SolveResult, VarId};
use crate::step1::ChoiceSet;

/// Which cells and moves a flight may use.
#[derive(Clone, Copy, Debug)]
pub enum RuleKind<'a> {
    /// Free movement on the grid, managed cells limited to the choice set.
    Negotiated { choices: &'a ChoiceSet },
    /// Ordered traversal of a fixed resource sequence with holding.
    FixedRoute { route: &'a [ResourceId] },
}

/// Per-flight feasibility rules against one occupancy snapshot.
#[derive(Clone, Copy, Debug)]
pub struct PlanRules<'a> {
    pub grid: &'a AirspaceGrid,
    pub occupancy: &'a OccupancySnapshot,
    pub horizon: Horizon,
    pub request: &'a FlightRequest,
    pub kind: RuleKind<'a>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum PlanViolation {
    WrongFlight,
    OutsideHorizon(Timestep),
    CellNotPermitted(ResourceId, Timestep),
    BadStart(ResourceId),
    BadEnd(ResourceId),
    EndpointRevisited(ResourceId),
    IllegalMove {
        from: ResourceId,
        to: ResourceId,
        t: Timestep,
    },
    Dwell {
        resource: ResourceId,
        t: Timestep,
        min: u32,
    },
}

impl fmt::Display for PlanViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::WrongFlight => write!(f, "plan belongs to another flight"),
            Self::OutsideHorizon(t) => write!(f, "step {t} outside the horizon"),
            Self::CellNotPermitted(r, t) => write!(f, "{r} at {t} not permitted"),
            Self::BadStart(r) => write!(f, "starts at {r} instead of the origin"),
            Self::BadEnd(r) => write!(f, "ends at {r} instead of the destination"),
            Self::EndpointRevisited(r) => write!(f, "endpoint {r} occupied more than one step"),
            Self::IllegalMove { from, to, t } => write!(f, "move {from} -> {to} at {t} not allowed"),
            Self::Dwell { resource, t, min } => {
                write!(f, "left {resource} at {t} before dwelling {min} steps")
            }
        }
    }
}

impl<'a> PlanRules<'a> {
    pub fn negotiated(
        grid: &'a AirspaceGrid,
        occupancy: &'a OccupancySnapshot,
        horizon: Horizon,
        request: &'a FlightRequest,
        choices: &'a ChoiceSet,
    ) -> Self {
        Self {
            grid,
            occupancy,
            horizon,
            request,
            kind: RuleKind::Negotiated { choices },
        }
    }

    pub fn fixed_route(
        grid: &'a AirspaceGrid,
        occupancy: &'a OccupancySnapshot,
        horizon: Horizon,
        request: &'a FlightRequest,
        route: &'a [ResourceId],
    ) -> Self {
        Self {
            grid,
            occupancy,
            horizon,
            request,
            kind: RuleKind::FixedRoute { route },
        }
    }

    fn origin(&self) -> ResourceId {
        self.request.origin
    }

    fn destination(&self) -> ResourceId {
        self.request.destination
    }

    /// Whether the flight may be in `r` at `t` at all.
    pub fn cell_ok(&self, r: ResourceId, t: Timestep) -> bool {
        if !self.horizon.contains(t) || !self.grid.contains(r) {
            return false;
        }
        if self.grid.is_vertiport(r) && r != self.origin() && r != self.destination() {
            return false;
        }
        match self.kind {
            RuleKind::Negotiated { choices } => {
                if self.grid.is_managed(r) {
                    choices.contains(r, t)
                } else {
                    self.occupancy.remaining(self.grid, r, t) >= 1
                }
            }
            RuleKind::FixedRoute { route } => {
                if !route.contains(&r) || self.occupancy.remaining(self.grid, r, t) == 0 {
                    return false;
                }
                if r == self.origin() {
                    self.request.departure_window().contains(&t)
                } else if r == self.destination() {
                    t <= self.request.arrival + self.request.flexibility
                } else {
                    true
                }
            }
        }
    }

    /// Whether a flight in `from` at one step may be in `to` at the next.
    pub fn transition_ok(&self, from: ResourceId, to: ResourceId) -> bool {
        if from == self.destination() || to == self.origin() {
            return false;
        }
        if from == to {
            return true;
        }
        match self.kind {
            RuleKind::Negotiated { .. } => self.grid.are_adjacent(from, to),
            RuleKind::FixedRoute { route } => route.windows(2).any(|w| w[0] == from && w[1] == to),
        }
    }

    /// Resources whose presence at `t - 1` can precede presence in `r` at `t`
    /// in the literal adjacency row.
    fn predecessors(&self, r: ResourceId) -> Vec<ResourceId> {
        match self.kind {
            RuleKind::Negotiated { .. } => {
                let mut v = self.grid.neighbors(r).to_vec();
                v.push(r);
                v
            }
            RuleKind::FixedRoute { route } => {
                let mut v = vec![r];
                if let Some(i) = route.iter().position(|&x| x == r) {
                    if i > 0 {
                        v.push(route[i - 1]);
                    }
                }
                v
            }
        }
    }

    fn candidate_resources(&self) -> Vec<ResourceId> {
        match self.kind {
            RuleKind::Negotiated { .. } => self.grid.resources().iter().map(|r| r.id).collect(),
            RuleKind::FixedRoute { route } => route.to_vec(),
        }
    }

    fn dwell(&self, r: ResourceId) -> u32 {
        if self.grid.is_vertiport(r) {
            1
        } else {
            self.request.dwell.get(r)
        }
    }

    /// Checks `plan` against every per-flight rule; empty means feasible.
    pub fn check(&self, plan: &FlightPlan) -> Vec<PlanViolation> {
        let mut out = Vec::new();
        if plan.flight != self.request.id {
            out.push(PlanViolation::WrongFlight);
        }
        for &(r, t) in &plan.steps {
            if !self.horizon.contains(t) {
                out.push(PlanViolation::OutsideHorizon(t));
            } else if !self.cell_ok(r, t) {
                out.push(PlanViolation::CellNotPermitted(r, t));
            }
        }
        let (first, last) = match (plan.steps.first(), plan.steps.last()) {
            (Some(&(a, _)), Some(&(b, _))) => (a, b),
            _ => return out,
        };
        if first != self.origin() {
            out.push(PlanViolation::BadStart(first));
        }
        if last != self.destination() {
            out.push(PlanViolation::BadEnd(last));
        }
        for endpoint in [self.origin(), self.destination()] {
            if plan.resources().filter(|&r| r == endpoint).count() > 1 {
                out.push(PlanViolation::EndpointRevisited(endpoint));
            }
        }
        for w in plan.steps.windows(2) {
            let ((a, _), (b, t)) = (w[0], w[1]);
            if !self.transition_ok(a, b) {
                out.push(PlanViolation::IllegalMove { from: a, to: b, t });
            }
        }
        out.extend(self.dwell_violations(plan));
        out
    }

    /// Literal minimum-dwell rule: a flight present in `r` at `t - 1` that
    /// has been there fewer than `l` of the steps `[t - l, t - 1]` must still
    /// be there at `t`.
    fn dwell_violations(&self, plan: &FlightPlan) -> Vec<PlanViolation> {
        let mut out = Vec::new();
        let at = |r: ResourceId, t: Timestep| plan.resource_at(t) == Some(r);
        let mut sectors: Vec<ResourceId> = plan.resources().filter(|&r| !self.grid.is_vertiport(r)).collect();
        sectors.sort();
        sectors.dedup();
        for r in sectors {
            let l = self.dwell(r);
            if l < 2 {
                continue;
            }
            for t in self.horizon.start + 1..=self.horizon.end() {
                if !at(r, t - 1) || at(r, t) {
                    continue;
                }
                let from = t.saturating_sub(l).max(self.horizon.start);
                let count = (from..t).filter(|&s| at(r, s)).count() as u32;
                if count < l {
                    out.push(PlanViolation::Dwell { resource: r, t, min: l });
                }
            }
        }
        out
    }

    /// Cells that lie on some start-to-finish walk under `cell_ok` and
    /// `transition_ok`. Dwell is not used for pruning.
    pub fn live_cells(&self) -> Vec<(ResourceId, Timestep)> {
        let (s, e) = (self.origin(), self.destination());
        let resources = self.candidate_resources();
        let steps: Vec<Timestep> = self.horizon.steps().collect();
        let mut reach: Vec<Vec<ResourceId>> = Vec::with_capacity(steps.len());
        for (i, &t) in steps.iter().enumerate() {
            let mut now = Vec::new();
            for &r in &resources {
                if !self.cell_ok(r, t) {
                    continue;
                }
                let ok = r == s || (i > 0 && reach[i - 1].iter().any(|&p| self.transition_ok(p, r)));
                if ok {
                    now.push(r);
                }
            }
            reach.push(now);
        }
        let mut live: Vec<Vec<ResourceId>> = vec![Vec::new(); steps.len()];
        for i in (0..steps.len()).rev() {
            let mut now = Vec::new();
            for &r in &reach[i] {
                let ok = r == e || (i + 1 < steps.len() && live[i + 1].iter().any(|&n| self.transition_ok(r, n)));
                if ok {
                    now.push(r);
                }
            }
            live[i] = now;
        }
        // Every live cell must also be forward-reachable from an origin slot
        // that itself leads somewhere; recompute forward over live cells.
        let mut out = Vec::new();
        let mut prev: Vec<ResourceId> = Vec::new();
        for (i, &t) in steps.iter().enumerate() {
            let now: Vec<ResourceId> = live[i]
                .iter()
                .copied()
                .filter(|&r| r == s || prev.iter().any(|&p| self.transition_ok(p, r)))
                .collect();
            out.extend(now.iter().map(|&r| (r, t)));
            prev = now;
        }
        out
    }
}

/// Presence variables of one flight inside a model.
#[derive(Clone, Debug)]
pub struct PresenceVars {
    pub request: FlightRequest,
    pub cells: BTreeMap<(ResourceId, Timestep), VarId>,
    /// Set when the flight may be left unserved.
    pub served: Option<VarId>,
}

impl PresenceVars {
    pub fn get(&self, r: ResourceId, t: Timestep) -> Option<VarId> {
        self.cells.get(&(r, t)).copied()
    }

    fn at_resource(&self, r: ResourceId) -> impl Iterator<Item = (Timestep, VarId)> + '_ {
        self.cells
            .range((r, Timestep::MIN)..=(r, Timestep::MAX))
            .map(|(&(_, t), &v)| (t, v))
    }

    /// `sum_t t * u[r, t]`.
    fn time_expr(&self, r: ResourceId) -> LinExpr {
        let mut e = LinExpr::new();
        for (t, v) in self.at_resource(r) {
            e.add(v, t as f64);
        }
        e
    }

    /// Delay cost `alpha (a_prop - a) + (1 - alpha)(d_prop - d)` as a linear
    /// expression; with a served indicator the constant scales with it.
    pub fn tdc_expr(&self, alpha: f64) -> LinExpr {
        let req = &self.request;
        let mut e = LinExpr::new();
        e.extend(&self.time_expr(req.destination), alpha);
        e.extend(&self.time_expr(req.origin), 1.0 - alpha);
        let offset = -(alpha * req.arrival as f64 + (1.0 - alpha) * req.departure as f64);
        match self.served {
            Some(z) => e.add(z, offset),
            None => e.add_constant(offset),
        }
        e
    }

    pub fn extract_plan(&self, result: &SolveResult) -> Option<FlightPlan> {
        if !result.has_solution() {
            return None;
        }
        let steps: Vec<(ResourceId, Timestep)> = self
            .cells
            .iter()
            .filter(|(_, &v)| result.is_set(v))
            .map(|(&(r, t), _)| (r, t))
            .collect();
        if steps.is_empty() {
            return None;
        }
        FlightPlan::from_steps(self.request.id, steps).ok()
    }
}

/// Adds presence variables and the per-flight rows (endpoint slots,
/// adjacency, one resource per step, landing, minimum dwell) to `model`.
///
/// Per-cell capacity and choice restrictions are applied by only creating
/// variables for permitted cells. Returns `None` when no start-to-finish
/// walk exists, in which case nothing is added.
pub fn add_presence(model: &mut Model, rules: &PlanRules, tag: &str, optional: bool) -> Option<PresenceVars> {
    let live = rules.live_cells();
    let (s, e) = (rules.request.origin, rules.request.destination);
    if !live.iter().any(|&(r, _)| r == s) || !live.iter().any(|&(r, _)| r == e) {
        return None;
    }
    let mut cells = BTreeMap::new();
    for &(r, t) in &live {
        cells.insert((r, t), model.add_binary(format!("u_{tag}[{r},{t}]")));
    }
    let served = optional.then(|| model.add_binary(format!("z_{tag}")));
    let vars = PresenceVars {
        request: rules.request.clone(),
        cells,
        served,
    };

    for (endpoint, label) in [(s, "orig"), (e, "dest")] {
        let mut expr = LinExpr::sum(vars.at_resource(endpoint).map(|(_, v)| v));
        let rhs = match served {
            Some(z) => {
                expr.add(z, -1.0);
                0.0
            }
            None => 1.0,
        };
        model.add_constraint(format!("{label}_{tag}"), expr, Relation::Eq, rhs);
    }

    // Adjacency in sequence for every resource but the origin.
    let mut by_step: HashMap<Timestep, Vec<(ResourceId, VarId)>> = HashMap::new();
    for (&(r, t), &v) in &vars.cells {
        by_step.entry(t).or_default().push((r, v));
    }
    for (&(r, t), &v) in &vars.cells {
        if r == s {
            continue;
        }
        let mut expr = LinExpr::from(v);
        if t > rules.horizon.start {
            for p in rules.predecessors(r) {
                if let Some(pv) = vars.get(p, t - 1) {
                    expr.add(pv, -1.0);
                }
            }
        }
        model.add_constraint(format!("adj_{tag}[{r},{t}]"), expr, Relation::Le, 0.0);
    }

    // At most one resource per step, and none once landed.
    let mut landed = LinExpr::new();
    for t in rules.horizon.steps() {
        let mut expr = LinExpr::new();
        if let Some(list) = by_step.get(&t) {
            for &(_, v) in list {
                expr.add(v, 1.0);
            }
        }
        if !expr.terms.is_empty() {
            expr.extend(&landed, 1.0);
            model.add_constraint(format!("one_{tag}[{t}]"), expr, Relation::Le, 1.0);
        }
        if let Some(v) = vars.get(e, t) {
            landed.add(v, 1.0);
        }
    }

    add_dwell_rows(model, rules, &vars, tag);
    Some(vars)
}

/// Minimum-dwell rows through auxiliary binaries `A[r, t]`, which equal 1
/// exactly when fewer than `l` of the steps `[t - l, t - 1]` were spent in
/// `r`. Rows are only built where `l >= 2`; with `l = 1` they cannot bind.
fn add_dwell_rows(model: &mut Model, rules: &PlanRules, vars: &PresenceVars, tag: &str) {
    let m = model.big_m();
    let mut rs: Vec<ResourceId> = vars.cells.keys().map(|&(r, _)| r).collect();
    rs.dedup();
    for r in rs {
        if rules.grid.is_vertiport(r) {
            continue;
        }
        let l = rules.request.dwell.get(r);
        if l < 2 {
            continue;
        }
        let times: Vec<Timestep> = vars.at_resource(r).map(|(t, _)| t).collect();
        for &prev_t in &times {
            let t = prev_t + 1;
            let a = model.add_binary(format!("A_{tag}[{r},{t}]"));
            let from = t.saturating_sub(l).max(rules.horizon.start);
            let window: Vec<VarId> = (from..t).filter_map(|s| vars.get(r, s)).collect();
            // M A + sum >= l
            let mut lo = LinExpr::sum(window.iter().copied());
            lo.add(a, m);
            model.add_constraint(format!("dwA1_{tag}[{r},{t}]"), lo, Relation::Ge, l as f64);
            // M (1 - A) >= 1 - l + sum
            let mut hi = LinExpr::sum(window.iter().copied());
            hi.add(a, m);
            model.add_constraint(format!("dwA0_{tag}[{r},{t}]"), hi, Relation::Le, m + l as f64 - 1.0);
            // u[r, t] >= u[r, t - 1] + A - 1
            let mut stay = LinExpr::new();
            if let Some(cur) = vars.get(r, t) {
                stay.add(cur, 1.0);
            }
            stay.add(vars.get(r, prev_t).expect("window var"), -1.0);
            stay.add(a, -1.0);
            model.add_constraint(format!("dwell_{tag}[{r},{t}]"), stay, Relation::Ge, -1.0);
        }
    }
}

/// Entry indicators `e[r, t] = max(u[r, t] - u[r, t - 1], 0)` as continuous
/// variables pinned by three rows each. Returns the path-length expression
/// `sum e`.
pub fn add_entry_indicators(model: &mut Model, vars: &PresenceVars, tag: &str) -> LinExpr {
    let mut length = LinExpr::new();
    for (&(r, t), &u) in &vars.cells {
        let e = model.add_continuous(format!("e_{tag}[{r},{t}]"), 0.0, 1.0);
        let prev = t.checked_sub(1).and_then(|p| vars.get(r, p));
        // e >= u - u_prev
        let mut ge = LinExpr::from(e);
        ge.add(u, -1.0);
        if let Some(p) = prev {
            ge.add(p, 1.0);
        }
        model.add_constraint(format!("ent1_{tag}[{r},{t}]"), ge, Relation::Ge, 0.0);
        // e <= u
        model.add_constraint(
            format!("ent2_{tag}[{r},{t}]"),
            LinExpr::from(e).with(u, -1.0),
            Relation::Le,
            0.0,
        );
        // e <= 1 - u_prev
        if let Some(p) = prev {
            model.add_constraint(
                format!("ent3_{tag}[{r},{t}]"),
                LinExpr::from(e).with(p, 1.0),
                Relation::Le,
                1.0,
            );
        }
        length.add(e, 1.0);
    }
    length
}

/// Occupancy of a set of plans, keyed by cell.
pub fn plan_occupancy<'a>(plans: impl IntoIterator<Item = &'a FlightPlan>) -> HashMap<(ResourceId, Timestep), u32> {
    let mut m = HashMap::new();
    for p in plans {
        for &(r, t) in &p.steps {
            *m.entry((r, t)).or_insert(0) += 1;
        }
    }
    m
}

/// Snapshot plus `plans`.
pub fn with_plans<'a>(base: &OccupancySnapshot, plans: impl IntoIterator<Item = &'a FlightPlan>) -> OccupancySnapshot {
    base.clone().with_plans(plans)
}

/// Remaining capacity of `r` at `t` given a snapshot.
pub fn remaining(grid: &AirspaceGrid, occ: &OccupancySnapshot, r: ResourceId, t: Timestep) -> u32 {
    grid.capacity(r, t).saturating_sub(occ.occupancy(r, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::airspace::tests::config;
    use crate::airspace::Cell;
    use crate::flight::FlightId;
    use crate::milp::{backend_from_env, solve, Sense, SolveLimits};

    fn corridor() -> AirspaceGrid {
        // v . . . v on one row; only the middle cell is en route
        AirspaceGrid::build(config(1, 5, &[(0, 0), (0, 4)])).unwrap()
    }

    fn open_choices(grid: &AirspaceGrid, req: &FlightRequest, horizon: Horizon) -> ChoiceSet {
        let mut cells = Vec::new();
        for t in horizon.steps() {
            for r in grid.resources() {
                if crate::step1::domain_window(grid, req, r.id).is_some_and(|(lo, hi)| lo <= t && t <= hi) {
                    cells.push((r.id, t));
                }
            }
        }
        ChoiceSet::from_cells(req, cells)
    }

    #[test]
    fn corridor_minimum_delay_plan() {
        let g = corridor();
        let h = Horizon::new(0, 8);
        let id = |c| g.id_at(Cell::new(0, c)).unwrap();
        let req = FlightRequest::new(FlightId(1), id(0), id(4), 1, 5, 1);
        let ch = open_choices(&g, &req, h);
        let occ = OccupancySnapshot::new();
        let rules = PlanRules::negotiated(&g, &occ, h, &req, &ch);
        let mut m = Model::for_horizon(Sense::Minimize, h.len);
        let vars = add_presence(&mut m, &rules, "f1", false).unwrap();
        m.set_objective(vars.tdc_expr(0.3));
        let res = solve(backend_from_env().unwrap().as_ref(), &m, &SolveLimits::default());
        assert!(res.is_optimal(), "{:?}", res.status);
        let plan = vars.extract_plan(&res).unwrap();
        assert_eq!(plan.departure, 1);
        assert_eq!(plan.arrival, 5);
        assert!(rules.check(&plan).is_empty());
        assert!(res.objective.abs() < 1e-9);
    }

    #[test]
    fn dwell_two_forces_stay() {
        let g = corridor();
        let h = Horizon::new(0, 8);
        let id = |c| g.id_at(Cell::new(0, c)).unwrap();
        let mut req = FlightRequest::new(FlightId(1), id(0), id(4), 1, 5, 2);
        req.dwell = req.dwell.clone().with(id(1), 2);
        let ch = open_choices(&g, &req, h);
        let occ = OccupancySnapshot::new();
        let rules = PlanRules::negotiated(&g, &occ, h, &req, &ch);
        let mut m = Model::for_horizon(Sense::Minimize, h.len);
        let vars = add_presence(&mut m, &rules, "f1", false).unwrap();
        m.set_objective(vars.tdc_expr(1.0));
        let res = solve(backend_from_env().unwrap().as_ref(), &m, &SolveLimits::default());
        let plan = vars.extract_plan(&res).unwrap();
        assert_eq!(plan.runs().iter().map(|r| r.2).collect::<Vec<_>>(), vec![1, 2, 1, 1, 1]);
        assert!(rules.check(&plan).is_empty());
        // a plan skipping the dwell is caught by the checker
        let bad = FlightPlan::from_steps(
            FlightId(1),
            vec![(id(0), 1), (id(1), 2), (id(2), 3), (id(3), 4), (id(4), 5)],
        )
        .unwrap();
        assert!(matches!(rules.check(&bad)[..], [PlanViolation::Dwell { t: 3, .. }]));
    }

    #[test]
    fn blocked_corridor_has_no_walk() {
        let g = corridor();
        let h = Horizon::new(0, 8);
        let id = |c| g.id_at(Cell::new(0, c)).unwrap();
        let req = FlightRequest::new(FlightId(1), id(0), id(4), 1, 5, 1);
        let ch = open_choices(&g, &req, h);
        let mut occ = OccupancySnapshot::new();
        for t in h.steps() {
            occ.set(id(2), t, 1);
        }
        let rules = PlanRules::negotiated(&g, &occ, h, &req, &ch);
        let mut m = Model::for_horizon(Sense::Minimize, h.len);
        assert!(add_presence(&mut m, &rules, "f1", false).is_none());
    }

    #[test]
    fn entry_indicators_count_runs() {
        let g = corridor();
        let h = Horizon::new(0, 8);
        let id = |c| g.id_at(Cell::new(0, c)).unwrap();
        let req = FlightRequest::new(FlightId(1), id(0), id(4), 1, 5, 2);
        let ch = open_choices(&g, &req, h);
        let occ = OccupancySnapshot::new();
        let rules = PlanRules::negotiated(&g, &occ, h, &req, &ch);
        let mut m = Model::for_horizon(Sense::Maximize, h.len);
        let vars = add_presence(&mut m, &rules, "f1", false).unwrap();
        let len = add_entry_indicators(&mut m, &vars, "f1");
        m.set_objective(len.clone());
        let res = solve(backend_from_env().unwrap().as_ref(), &m, &SolveLimits::default());
        let plan = vars.extract_plan(&res).unwrap();
        assert_eq!(len.evaluate(&res.values).round() as u32, plan.path_length);
        // departing at 1 and arriving at 7 leaves five sector steps; shuttling
        // makes every one of them a new entry
        assert_eq!(plan.path_length, 7);
    }
}
