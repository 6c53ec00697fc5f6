//! Brute-force ground truth for tiny instances.
//!
//! Per-flight plans are enumerated by depth-first search over single-step
//! moves and filtered by the same [`PlanRules::check`] used on solver
//! output, so a disagreement with a solver points at model construction.
//! Joint optima search the cross product with a delay-cost bound.

mod fixtures;

pub use fixtures::{run_fixture, tiny_fixtures, CheckOutcome, TinyInstance};

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

use crate::airspace::{AirspaceGrid, Horizon, OccupancySnapshot, ResourceId, Timestep};
use crate::baseline::unserved_penalty;
use crate::flight::{path_length, tdc, DelayCostParams, FlightId, FlightPlan, FlightRequest};
use crate::routing::FixedRoute;
use crate::step1::{ChoiceKey, ChoiceProblem, ChoiceSet};
use crate::step3::{drop_candidate, ConflictingFlight, FairnessParams};
use crate::trajectory::PlanRules;

/// Abort threshold on search nodes (partial plans or assignments).
pub const SEARCH_GUARD: u64 = 10_000_000;

/// Objective values closer than this are ties.
pub const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("search exceeded {SEARCH_GUARD} nodes")]
    TooLarge,
    #[error("instance is not tiny: {0}")]
    NotTiny(String),
}

/// Every plan satisfying the per-flight rules, each exactly once, sorted
/// by steps.
pub fn enumerate_feasible_plans(rules: &PlanRules) -> Result<Vec<FlightPlan>, OracleError> {
    let (s, e) = (rules.request.origin, rules.request.destination);
    let Some(latest) = rules.horizon.steps().filter(|&t| rules.cell_ok(e, t)).max() else {
        return Ok(Vec::new());
    };
    let dist = hops_to(rules.grid, e);
    let mut out = Vec::new();
    let mut nodes = 0u64;
    let mut path = Vec::new();
    for t in rules.horizon.steps() {
        if rules.cell_ok(s, t) {
            path.push((s, t));
            extend(rules, &dist, latest, &mut path, &mut out, &mut nodes)?;
            path.pop();
        }
    }
    out.sort_by(|a, b| a.steps.cmp(&b.steps));
    Ok(out)
}

fn extend(
    rules: &PlanRules,
    dist: &[u32],
    latest: Timestep,
    path: &mut Vec<(ResourceId, Timestep)>,
    out: &mut Vec<FlightPlan>,
    nodes: &mut u64,
) -> Result<(), OracleError> {
    *nodes += 1;
    if *nodes > SEARCH_GUARD {
        return Err(OracleError::TooLarge);
    }
    let (r, t) = *path.last().expect("non-empty");
    if r == rules.request.destination {
        let plan = FlightPlan::from_steps(rules.request.id, path.clone()).expect("contiguous");
        if rules.check(&plan).is_empty() {
            out.push(plan);
        }
        return Ok(());
    }
    if dist[r.index()] == u32::MAX || t + dist[r.index()] > latest {
        return Ok(());
    }
    let next = t + 1;
    let mut moves: Vec<ResourceId> = rules.grid.neighbors(r).to_vec();
    moves.push(r);
    moves.sort();
    for n in moves {
        if rules.transition_ok(r, n) && rules.cell_ok(n, next) {
            path.push((n, next));
            extend(rules, dist, latest, path, out, nodes)?;
            path.pop();
        }
    }
    Ok(())
}

/// Hop distance to `target` over the whole grid.
fn hops_to(grid: &AirspaceGrid, target: ResourceId) -> Vec<u32> {
    let mut dist = vec![u32::MAX; grid.len()];
    dist[target.index()] = 0;
    let mut queue = VecDeque::from([target]);
    while let Some(r) = queue.pop_front() {
        for &n in grid.neighbors(r) {
            if dist[n.index()] == u32::MAX {
                dist[n.index()] = dist[r.index()] + 1;
                queue.push_back(n);
            }
        }
    }
    dist
}

/// Minimum-delay plan among all feasible plans; ties go to the smallest
/// step sequence.
pub fn oracle_min_tdc(rules: &PlanRules, params: DelayCostParams) -> Result<Option<(FlightPlan, f64)>, OracleError> {
    let plans = enumerate_feasible_plans(rules)?;
    let mut best: Option<(FlightPlan, f64)> = None;
    for p in plans {
        let c = tdc(&p, rules.request, params);
        if best.as_ref().is_none_or(|(_, b)| c < b - TIE_TOL) {
            best = Some((p, c));
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Step1Optimum {
    pub objective: usize,
    pub sets: Vec<ChoiceSet>,
}

/// Maximum number of offered cells over all assignments that satisfy every
/// choice rule.
pub fn oracle_step1(problem: &ChoiceProblem) -> Result<Step1Optimum, OracleError> {
    let n = problem.cells.len();
    let index: HashMap<ChoiceKey, usize> = problem.cells.iter().enumerate().map(|(i, &k)| (k, i)).collect();
    let mut by_last: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut group = vec![None; n];
    let mut caps = Vec::new();
    for (j, rule) in problem.rules.iter().enumerate() {
        let scope: Vec<usize> = rule.scope().iter().map(|k| index[k]).collect();
        if let Some(&last) = scope.iter().max() {
            by_last[last].push(j);
        }
        if let crate::step1::ChoiceRule::Capacity { cap, .. } = rule {
            for &i in &scope {
                group[i] = Some(caps.len());
            }
            caps.push((*cap as usize, scope.len()));
        }
    }
    let mut search = Step1Search {
        problem,
        index,
        by_last,
        group,
        ones: vec![0; caps.len()],
        open: caps.iter().map(|&(_, size)| size).collect(),
        caps: caps.iter().map(|&(c, _)| c).collect(),
        open_free: 0,
        assign: vec![false; n],
        count: 0,
        best: None,
        nodes: 0,
    };
    search.open_free = search.group.iter().filter(|g| g.is_none()).count();
    search.dfs(0)?;
    let (objective, assign) = search.best.expect("all-off is always feasible");
    let sets = problem
        .requests
        .iter()
        .enumerate()
        .map(|(i, req)| {
            ChoiceSet::from_cells(
                req,
                problem
                    .cells
                    .iter()
                    .zip(&assign)
                    .filter(|&(k, &on)| on && k.0 == i)
                    .map(|(&(_, r, t), _)| (r, t)),
            )
        })
        .collect();
    Ok(Step1Optimum { objective, sets })
}

struct Step1Search<'p, 'a> {
    problem: &'p ChoiceProblem<'a>,
    index: HashMap<ChoiceKey, usize>,
    by_last: Vec<Vec<usize>>,
    group: Vec<Option<usize>>,
    caps: Vec<usize>,
    ones: Vec<usize>,
    open: Vec<usize>,
    open_free: usize,
    assign: Vec<bool>,
    count: usize,
    best: Option<(usize, Vec<bool>)>,
    nodes: u64,
}

impl Step1Search<'_, '_> {
    fn bound(&self) -> usize {
        let grouped: usize = (0..self.caps.len())
            .map(|g| self.open[g].min(self.caps[g].saturating_sub(self.ones[g])))
            .sum();
        self.count + self.open_free + grouped
    }

    fn rules_hold(&self, i: usize) -> bool {
        let on = |k: &ChoiceKey| self.assign[self.index[k]];
        self.by_last[i].iter().all(|&j| self.problem.rules[j].holds(on))
    }

    fn dfs(&mut self, i: usize) -> Result<(), OracleError> {
        self.nodes += 1;
        if self.nodes > SEARCH_GUARD {
            return Err(OracleError::TooLarge);
        }
        if i == self.assign.len() {
            if self.best.as_ref().is_none_or(|(b, _)| self.count > *b) {
                self.best = Some((self.count, self.assign.clone()));
            }
            return Ok(());
        }
        if self.best.as_ref().is_some_and(|(b, _)| self.bound() <= *b) {
            return Ok(());
        }
        match self.group[i] {
            Some(g) => self.open[g] -= 1,
            None => self.open_free -= 1,
        }
        for on in [true, false] {
            if on && self.group[i].is_some_and(|g| self.ones[g] >= self.caps[g]) {
                continue;
            }
            self.assign[i] = on;
            if on {
                self.count += 1;
                if let Some(g) = self.group[i] {
                    self.ones[g] += 1;
                }
            }
            if self.rules_hold(i) {
                self.dfs(i + 1)?;
            }
            if on {
                self.count -= 1;
                if let Some(g) = self.group[i] {
                    self.ones[g] -= 1;
                }
            }
            self.assign[i] = false;
        }
        match self.group[i] {
            Some(g) => self.open[g] += 1,
            None => self.open_free += 1,
        }
        Ok(())
    }
}

/// A joint assignment: one plan (or none, when unserved) per flight.
#[derive(Clone, Debug, PartialEq)]
pub struct JointOptimum {
    pub plans: Vec<Option<FlightPlan>>,
    pub objective: f64,
    pub total_tdc: f64,
}

/// Delay cost plus `gamma` times the spread of path-length ratios.
pub fn deconfliction_objective(flights: &[ConflictingFlight], plans: &[FlightPlan], params: FairnessParams) -> f64 {
    let total: f64 = flights
        .iter()
        .zip(plans)
        .map(|(f, p)| tdc(p, &f.request, params.delay()))
        .sum();
    total + params.gamma * spread(flights, plans)
}

fn spread(flights: &[ConflictingFlight], plans: &[FlightPlan]) -> f64 {
    let ratios: Vec<f64> = flights
        .iter()
        .zip(plans)
        .map(|(f, p)| path_length(p) as f64 / path_length(&f.proposal) as f64)
        .collect();
    if ratios.is_empty() {
        return 0.0;
    }
    let max = ratios.iter().copied().fold(f64::MIN, f64::max);
    let min = ratios.iter().copied().fold(f64::MAX, f64::min);
    max - min
}

/// Joint capacity check: `shared` cells may hold at most their remaining
/// capacity across all plans.
fn jointly_fits(
    grid: &AirspaceGrid,
    occupancy: &OccupancySnapshot,
    plans: &[&FlightPlan],
    shared: impl Fn(ResourceId) -> bool,
) -> bool {
    let mut count: HashMap<(ResourceId, Timestep), u32> = HashMap::new();
    for p in plans {
        for &(r, t) in &p.steps {
            if shared(r) {
                *count.entry((r, t)).or_insert(0) += 1;
            }
        }
    }
    count.iter().all(|(&(r, t), &n)| n <= occupancy.remaining(grid, r, t))
}

/// Exhaustive minimum of delay cost plus `gamma F` over every joint choice of
/// per-flight feasible plans that respects en-route capacity. `None` when
/// no joint choice exists. Ties go to the lexicographically smallest tuple
/// of plans.
pub fn oracle_joint_optimum(
    grid: &AirspaceGrid,
    occupancy: &OccupancySnapshot,
    horizon: Horizon,
    flights: &[ConflictingFlight],
    params: FairnessParams,
) -> Result<Option<JointOptimum>, OracleError> {
    let mut options = Vec::with_capacity(flights.len());
    for f in flights {
        let rules = PlanRules::negotiated(grid, occupancy, horizon, &f.request, &f.choices);
        let plans = enumerate_feasible_plans(&rules)?;
        let mut scored: Vec<(f64, FlightPlan)> = plans
            .into_iter()
            .map(|p| (tdc(&p, &f.request, params.delay()), p))
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.steps.cmp(&b.1.steps)));
        options.push(scored);
    }
    let mut best: Option<(f64, Vec<FlightPlan>)> = None;
    let mut pick: Vec<&FlightPlan> = Vec::new();
    let mut nodes = 0;
    joint_search(
        grid, occupancy, flights, params, &options, 0.0, &mut pick, &mut best, &mut nodes,
    )?;
    Ok(best.map(|(objective, plans)| JointOptimum {
        total_tdc: flights
            .iter()
            .zip(&plans)
            .map(|(f, p)| tdc(p, &f.request, params.delay()))
            .sum(),
        plans: plans.into_iter().map(Some).collect(),
        objective,
    }))
}

#[allow(clippy::too_many_arguments)]
fn joint_search<'o>(
    grid: &AirspaceGrid,
    occupancy: &OccupancySnapshot,
    flights: &[ConflictingFlight],
    params: FairnessParams,
    options: &'o [Vec<(f64, FlightPlan)>],
    partial: f64,
    pick: &mut Vec<&'o FlightPlan>,
    best: &mut Option<(f64, Vec<FlightPlan>)>,
    nodes: &mut u64,
) -> Result<(), OracleError> {
    *nodes += 1;
    if *nodes > SEARCH_GUARD {
        return Err(OracleError::TooLarge);
    }
    let i = pick.len();
    if i == flights.len() {
        let plans: Vec<FlightPlan> = pick.iter().map(|&p| p.clone()).collect();
        let value = deconfliction_objective(flights, &plans, params);
        let better = match best {
            None => true,
            Some((b, bp)) => value < *b - TIE_TOL || ((value - *b).abs() <= TIE_TOL && plans_lt(&plans, bp)),
        };
        if better {
            *best = Some((value, plans));
        }
        return Ok(());
    }
    // Remaining flights cost at least their cheapest plan; F >= 0.
    let rest: f64 = options[i + 1..].iter().map(|o| o.first().map_or(0.0, |x| x.0)).sum();
    for (cost, plan) in &options[i] {
        if let Some((b, _)) = best {
            if partial + cost + rest > *b + TIE_TOL {
                break;
            }
        }
        pick.push(plan);
        if jointly_fits(grid, occupancy, pick, |r| grid.is_en_route(r)) {
            joint_search(
                grid,
                occupancy,
                flights,
                params,
                options,
                partial + cost,
                pick,
                best,
                nodes,
            )?;
        }
        pick.pop();
    }
    Ok(())
}

fn plans_lt(a: &[FlightPlan], b: &[FlightPlan]) -> bool {
    a.iter().map(|p| &p.steps).lt(b.iter().map(|p| &p.steps))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Step3Optimum {
    /// Flights that kept a plan, in input order.
    pub flights: Vec<FlightId>,
    pub plans: Vec<FlightPlan>,
    pub carried: Vec<FlightId>,
    pub objective: f64,
    pub total_tdc: f64,
}

/// Deconfliction ground truth including the drop rule applied when no
/// joint plan exists.
pub fn oracle_step3(
    grid: &AirspaceGrid,
    occupancy: &OccupancySnapshot,
    horizon: Horizon,
    flights: &[ConflictingFlight],
    params: FairnessParams,
) -> Result<Step3Optimum, OracleError> {
    let mut active = flights.to_vec();
    let mut carried = Vec::new();
    loop {
        // a flight without any individual plan goes first
        let mut lonely = None;
        for (i, f) in active.iter().enumerate() {
            let rules = PlanRules::negotiated(grid, occupancy, horizon, &f.request, &f.choices);
            if enumerate_feasible_plans(&rules)?.is_empty() {
                lonely = Some(i);
                break;
            }
        }
        if let Some(i) = lonely {
            carried.push(active.remove(i).request.id);
            continue;
        }
        if active.is_empty() {
            return Ok(Step3Optimum {
                flights: Vec::new(),
                plans: Vec::new(),
                carried,
                objective: 0.0,
                total_tdc: 0.0,
            });
        }
        match oracle_joint_optimum(grid, occupancy, horizon, &active, params)? {
            Some(opt) => {
                return Ok(Step3Optimum {
                    flights: active.iter().map(|f| f.request.id).collect(),
                    plans: opt
                        .plans
                        .into_iter()
                        .map(|p| p.expect("negotiated flights are served"))
                        .collect(),
                    carried,
                    objective: opt.objective,
                    total_tdc: opt.total_tdc,
                })
            }
            None => {
                let i = drop_candidate(&active).expect("non-empty");
                carried.push(active.remove(i).request.id);
            }
        }
    }
}

/// Fixed-route ground truth: every flight is scheduled along its route or
/// left unserved at the penalty used by the baseline model.
pub fn oracle_tfmp(
    grid: &AirspaceGrid,
    occupancy: &OccupancySnapshot,
    horizon: Horizon,
    flights: &[(FlightRequest, FixedRoute)],
    params: DelayCostParams,
) -> Result<JointOptimum, OracleError> {
    let penalty = unserved_penalty(flights.len(), horizon);
    let mut options: Vec<Vec<(f64, Option<FlightPlan>)>> = Vec::with_capacity(flights.len());
    for (req, route) in flights {
        let rules = PlanRules::fixed_route(grid, occupancy, horizon, req, &route.resources);
        let mut scored: Vec<(f64, Option<FlightPlan>)> = enumerate_feasible_plans(&rules)?
            .into_iter()
            .map(|p| (tdc(&p, req, params), Some(p)))
            .collect();
        scored.push((penalty, None));
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| step_key(&a.1).cmp(&step_key(&b.1))));
        options.push(scored);
    }
    let mut best: Option<(f64, Vec<Option<FlightPlan>>)> = None;
    let mut pick = Vec::new();
    let mut nodes = 0;
    tfmp_search(grid, occupancy, &options, 0.0, &mut pick, &mut best, &mut nodes)?;
    let (objective, plans) = best.expect("serving nobody is always feasible");
    let total_tdc = flights
        .iter()
        .zip(&plans)
        .filter_map(|((req, _), p)| p.as_ref().map(|p| tdc(p, req, params)))
        .sum();
    Ok(JointOptimum {
        plans,
        objective,
        total_tdc,
    })
}

fn step_key(p: &Option<FlightPlan>) -> Option<&Vec<(ResourceId, Timestep)>> {
    p.as_ref().map(|p| &p.steps)
}

fn tfmp_search<'o>(
    grid: &AirspaceGrid,
    occupancy: &OccupancySnapshot,
    options: &'o [Vec<(f64, Option<FlightPlan>)>],
    partial: f64,
    pick: &mut Vec<(f64, &'o Option<FlightPlan>)>,
    best: &mut Option<(f64, Vec<Option<FlightPlan>>)>,
    nodes: &mut u64,
) -> Result<(), OracleError> {
    *nodes += 1;
    if *nodes > SEARCH_GUARD {
        return Err(OracleError::TooLarge);
    }
    let i = pick.len();
    if i == options.len() {
        let value: f64 = pick.iter().map(|x| x.0).sum();
        if best.as_ref().is_none_or(|(b, _)| value < *b - TIE_TOL) {
            *best = Some((value, pick.iter().map(|x| x.1.clone()).collect()));
        }
        return Ok(());
    }
    let rest: f64 = options[i + 1..].iter().map(|o| o[0].0).sum();
    for (cost, plan) in &options[i] {
        if let Some((b, _)) = best {
            if partial + cost + rest > *b + TIE_TOL {
                break;
            }
        }
        pick.push((*cost, plan));
        let served: Vec<&FlightPlan> = pick.iter().filter_map(|x| x.1.as_ref()).collect();
        if jointly_fits(grid, occupancy, &served, |_| true) {
            tfmp_search(grid, occupancy, options, partial + cost, pick, best, nodes)?;
        }
        pick.pop();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::airspace::tests::config;
    use crate::airspace::Cell;
    use crate::step1::domain_window;

    fn open_choices(grid: &AirspaceGrid, req: &FlightRequest, h: Horizon) -> ChoiceSet {
        let cells: Vec<(ResourceId, Timestep)> = h
            .steps()
            .flat_map(|t| {
                grid.resources()
                    .iter()
                    .filter(move |r| domain_window(grid, req, r.id).is_some_and(|(lo, hi)| lo <= t && t <= hi))
                    .map(move |r| (r.id, t))
            })
            .collect();
        ChoiceSet::from_cells(req, cells)
    }

    #[test]
    fn corridor_plans_by_hand() {
        // v . v, |T| = 4, eps = 1, requested 0 -> 2: departing at 0 lands at
        // 2 (or 3 after a hover), departing at 1 lands at 3
        let g = AirspaceGrid::build(config(1, 3, &[(0, 0), (0, 2)])).unwrap();
        let h = Horizon::new(0, 4);
        let req = FlightRequest::new(FlightId(1), ResourceId(0), ResourceId(2), 0, 2, 1);
        let ch = open_choices(&g, &req, h);
        let occ = OccupancySnapshot::new();
        let rules = PlanRules::negotiated(&g, &occ, h, &req, &ch);
        let plans = enumerate_feasible_plans(&rules).unwrap();
        let mut shapes: Vec<(Timestep, Timestep)> = plans.iter().map(|p| (p.departure, p.arrival)).collect();
        shapes.sort();
        assert_eq!(shapes, vec![(0, 2), (0, 3), (1, 3)]);
        let tight: Vec<_> = plans.iter().filter(|p| p.arrival - p.departure == 2).collect();
        assert_eq!(tight.len(), 2);
        let mut seen = plans.clone();
        seen.dedup();
        assert_eq!(seen.len(), plans.len());
    }

    #[test]
    fn blocked_sector_has_no_plans() {
        let g = AirspaceGrid::build(config(1, 5, &[(0, 0), (0, 4)])).unwrap();
        let h = Horizon::new(0, 8);
        let req = FlightRequest::new(FlightId(1), ResourceId(0), ResourceId(4), 0, 4, 2);
        let ch = open_choices(&g, &req, h);
        let mut occ = OccupancySnapshot::new();
        for t in h.steps() {
            occ.set(ResourceId(2), t, 1);
        }
        let rules = PlanRules::negotiated(&g, &occ, h, &req, &ch);
        assert!(enumerate_feasible_plans(&rules).unwrap().is_empty());
    }

    #[test]
    fn single_flight_joint_optimum_is_min_delay() {
        let g = AirspaceGrid::build(config(3, 4, &[(0, 0), (2, 3)])).unwrap();
        let h = Horizon::new(0, 9);
        let s = g.id_at(Cell::new(0, 0)).unwrap();
        let e = g.id_at(Cell::new(2, 3)).unwrap();
        let req = FlightRequest::new(FlightId(1), s, e, 0, 5, 2);
        let ch = open_choices(&g, &req, h);
        let occ = OccupancySnapshot::new();
        let rules = PlanRules::negotiated(&g, &occ, h, &req, &ch);
        let params = DelayCostParams::new(0.3).unwrap();
        let (plan, cost) = oracle_min_tdc(&rules, params).unwrap().unwrap();
        assert_eq!(cost, 0.0);
        let flight = ConflictingFlight {
            request: req,
            choices: ch,
            proposal: plan,
        };
        let joint = oracle_joint_optimum(&g, &occ, h, &[flight], FairnessParams::new(5.0, 0.3).unwrap())
            .unwrap()
            .unwrap();
        assert_eq!(joint.objective, 0.0);
    }

    #[test]
    fn order_does_not_change_optimum() {
        let g = AirspaceGrid::build(config(1, 5, &[(0, 0), (0, 4)])).unwrap();
        let h = Horizon::new(0, 10);
        let params = DelayCostParams::new(0.3).unwrap();
        let occ = OccupancySnapshot::new();
        let mk = |id: u64| {
            let request = FlightRequest::new(FlightId(id), ResourceId(0), ResourceId(4), 1, 5, 2);
            let choices = open_choices(&g, &request, h);
            let rules = PlanRules::negotiated(&g, &occ, h, &request, &choices);
            let proposal = oracle_min_tdc(&rules, params).unwrap().unwrap().0;
            ConflictingFlight {
                request,
                choices,
                proposal,
            }
        };
        let fp = FairnessParams::new(1.0, 0.3).unwrap();
        let ab = oracle_joint_optimum(&g, &occ, h, &[mk(1), mk(2)], fp).unwrap().unwrap();
        let ba = oracle_joint_optimum(&g, &occ, h, &[mk(2), mk(1)], fp).unwrap().unwrap();
        assert_eq!(ab.objective, ba.objective);
        // one of the two holds a step in the approach sector
        assert!((ab.objective - 0.3).abs() < TIE_TOL);
    }

    #[test]
    fn step1_oracle_respects_shared_vertistop() {
        let mut cfg = config(1, 3, &[(0, 0), (0, 2)]);
        cfg.vertiports[0].ops_capacity = 1;
        let g = AirspaceGrid::build(cfg).unwrap();
        let h = Horizon::new(0, 8);
        let reqs = [
            FlightRequest::new(FlightId(1), ResourceId(0), ResourceId(2), 0, 2, 2),
            FlightRequest::new(FlightId(2), ResourceId(0), ResourceId(2), 0, 2, 2),
        ];
        let occ = OccupancySnapshot::new();
        let problem = ChoiceProblem::new(&g, &occ, h, &reqs);
        let opt = oracle_step1(&problem).unwrap();
        assert!(problem.check(&opt.sets).is_empty());
        let slots: usize = opt.sets.iter().map(|s| s.departure_slots.len()).sum();
        assert_eq!(slots, 3);
        // restricting to either flight is feasible for the smaller batch and
        // no better than that batch's own optimum
        for (req, set) in reqs.iter().zip(&opt.sets) {
            let sub = [req.clone()];
            let p = ChoiceProblem::new(&g, &occ, h, &sub);
            let restricted = [ChoiceSet::from_cells(req, set.choices.iter().copied())];
            assert!(p.check(&restricted).is_empty());
            assert!(oracle_step1(&p).unwrap().objective >= restricted[0].len());
        }
    }
}
