//! Multi-day campaigns, optionally paired with a gamma = 0 reference run.

use crate::airspace::{overlay_audit, AirspaceGrid, OccupancyLedger, OccupancySnapshot};
use crate::config::{Mode, ScenarioConfig};
use crate::flight::FlightRequest;
use crate::milp::Backend;

use super::demand::generate_demand;
use super::metrics::{CampaignMetrics, DayMetrics};
use super::period::{run_period, PeriodResult, PlannerSettings, PlannerState, Step3Trace, StepTimings};
use super::SimError;

/// One simulated day in one mode.
#[derive(Clone, Debug)]
pub struct DayRun {
    pub day: u32,
    pub mode: Mode,
    /// New requests per period.
    pub demand: Vec<Vec<FlightRequest>>,
    pub periods: Vec<PeriodResult>,
    pub timings: Vec<StepTimings>,
    /// Deconfliction inputs, kept only when asked for.
    pub traces: Vec<Step3Trace>,
    pub ledger: OccupancyLedger,
    pub pending: Vec<FlightRequest>,
}

impl DayRun {
    pub fn metrics(&self) -> DayMetrics {
        DayMetrics::from_periods(self.day, &self.periods)
    }
}

/// Runs every period of `day` on a fresh ledger, then audits the day.
pub fn run_day(
    backend: &dyn Backend,
    grid: &AirspaceGrid,
    scenario: &ScenarioConfig,
    day: u32,
    keep_traces: bool,
) -> Result<DayRun, SimError> {
    let mut settings = PlannerSettings::new(scenario)?;
    settings.keep_traces = keep_traces;
    let mut state = PlannerState::default();
    let mut run = DayRun {
        day,
        mode: scenario.mode,
        demand: Vec::new(),
        periods: Vec::new(),
        timings: Vec::new(),
        traces: Vec::new(),
        ledger: OccupancyLedger::new(),
        pending: Vec::new(),
    };
    for period in 0..scenario.periods_per_day {
        let requests = generate_demand(grid, scenario, day, period);
        run.demand.push(requests.clone());
        let out = run_period(backend, grid, &mut state, requests, &settings, day, period)?;
        log::debug!(
            "{} day {day} period {period}: {} served, {} carried",
            scenario.mode,
            out.result.served.len(),
            out.result.carried.len()
        );
        run.periods.push(out.result);
        run.timings.push(out.timings);
        run.traces.extend(out.step3);
    }
    let overloads = overlay_audit(
        grid,
        &OccupancySnapshot::new(),
        state.ledger.records().iter().map(|r| &r.plan),
    );
    if !overloads.is_empty() {
        return Err(SimError::Audit { day, overloads });
    }
    let m = run.metrics();
    if m.generated != m.served + state.pending.len() || m.pending != state.pending.len() {
        return Err(SimError::Conservation {
            day,
            generated: m.generated,
            served: m.served,
            pending: state.pending.len(),
        });
    }
    run.ledger = state.ledger;
    run.pending = state.pending;
    Ok(run)
}

/// Runs `scenario.days` independent days in the scenario's mode.
pub fn run_days(
    backend: &dyn Backend,
    grid: &AirspaceGrid,
    scenario: &ScenarioConfig,
    keep_traces: bool,
) -> Result<Vec<DayRun>, SimError> {
    (0..scenario.days)
        .map(|d| run_day(backend, grid, scenario, d, keep_traces))
        .collect()
}

/// The same scenario with deconfliction at gamma = 0.
pub fn reference_scenario(scenario: &ScenarioConfig) -> ScenarioConfig {
    ScenarioConfig {
        mode: Mode::Coplan,
        ..scenario.clone()
    }
}

#[derive(Clone, Debug)]
pub struct Campaign {
    pub scenario: ScenarioConfig,
    pub runs: Vec<DayRun>,
    /// The paired gamma = 0 days of a fair-coplan campaign.
    pub reference: Option<Vec<DayRun>>,
    pub metrics: CampaignMetrics,
}

impl Campaign {
    /// Assembles a campaign from finished runs.
    pub fn from_runs(scenario: ScenarioConfig, runs: Vec<DayRun>, reference: Option<Vec<DayRun>>) -> Self {
        let metrics = CampaignMetrics::new(
            runs.iter().map(DayRun::metrics).collect(),
            reference.as_ref().map(|r| r.iter().map(DayRun::metrics).collect()),
        );
        Self {
            scenario,
            runs,
            reference,
            metrics,
        }
    }
}

/// Runs the scenario's campaign. In fair-coplan mode the matching gamma = 0
/// days are run on the same demand for the paired comparison.
pub fn run_campaign(backend: &dyn Backend, scenario: &ScenarioConfig) -> Result<Campaign, SimError> {
    scenario.validate()?;
    let grid = AirspaceGrid::build(scenario.grid.clone())?;
    let runs = run_days(backend, &grid, scenario, false)?;
    let reference = match scenario.mode {
        Mode::FairCoplan => Some(run_days(backend, &grid, &reference_scenario(scenario), false)?),
        Mode::Coplan | Mode::Tfmp => None,
    };
    Ok(Campaign::from_runs(scenario.clone(), runs, reference))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::desk_scenario;
    use crate::milp::backend_from_env;

    fn short() -> ScenarioConfig {
        let mut s = desk_scenario();
        s.days = 1;
        s.periods_per_day = 3;
        s
    }

    #[test]
    fn zero_days_is_empty() {
        let mut s = short();
        s.days = 0;
        let b = backend_from_env().unwrap();
        let c = run_campaign(b.as_ref(), &s).unwrap();
        assert!(c.runs.is_empty());
        assert_eq!(c.metrics.fairness_improvement(), Some((0, 0)));
    }

    #[test]
    fn paired_modes_see_the_same_demand() {
        let b = backend_from_env().unwrap();
        let s = short();
        let g = AirspaceGrid::build(s.grid.clone()).unwrap();
        let fair = run_day(b.as_ref(), &g, &s, 0, false).unwrap();
        let plain = run_day(b.as_ref(), &g, &reference_scenario(&s), 0, false).unwrap();
        assert_eq!(fair.demand, plain.demand);
        assert_eq!(fair.periods[0].choice_sets, plain.periods[0].choice_sets);
        assert_eq!(fair.periods[0].proposals, plain.periods[0].proposals);
        let m = fair.metrics();
        assert_eq!(m.generated, m.served + m.pending);
    }
}
