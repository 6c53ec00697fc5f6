//! Browser demo: plan one flight or deconflict a batch on the desk grid,
//! with sectors closed by clicking.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use coplan::airspace::{AirspaceGrid, CapacityOverride, VertiportKind};
use coplan::config::{desk_scenario, Mode, ScenarioConfig};
use coplan::flight::{FlightId, FlightPlan, FlightRequest, OperatorId};
use coplan::milp::MicrolpBackend;
use coplan::routing::min_travel_time;
use coplan::sim::period::{run_period, PeriodResult, PlannerSettings, PlannerState};
use coplan::step3::spread;

#[derive(Serialize)]
struct Layout {
    rows: u32,
    cols: u32,
    horizon: u32,
    vertiports: Vec<Port>,
}

#[derive(Serialize)]
struct Port {
    row: u32,
    col: u32,
    hub: bool,
}

#[derive(Clone, Copy, Serialize)]
struct Visit {
    row: u32,
    col: u32,
    t: u32,
}

#[derive(Serialize)]
struct Flight {
    id: u64,
    proposal: Option<Vec<Visit>>,
    plan: Option<Vec<Visit>>,
    tdc: Option<f64>,
}

#[derive(Serialize)]
struct Outcome {
    flights: Vec<Flight>,
    conflicts: Vec<Visit>,
    fairness: Option<f64>,
    total_tdc: f64,
    carried: Vec<u64>,
}

fn scenario() -> ScenarioConfig {
    desk_scenario()
}

/// Grid size, horizon and vertiport cells as JSON.
#[wasm_bindgen]
pub fn layout() -> String {
    let s = scenario();
    let layout = Layout {
        rows: s.grid.rows,
        cols: s.grid.cols,
        horizon: s.grid.horizon_steps,
        vertiports: s
            .grid
            .vertiports
            .iter()
            .map(|v| Port {
                row: v.row,
                col: v.col,
                hub: v.kind == VertiportKind::Hub,
            })
            .collect(),
    };
    serde_json::to_string(&layout).expect("layout serializes")
}

/// Desk grid with the listed cells (`row * cols + col`) shut at all steps.
fn grid_with_closures(closed: &[u32]) -> Result<AirspaceGrid, String> {
    let mut cfg = scenario().grid;
    let cols = cfg.cols;
    let until = cfg.horizon_steps * 2;
    for &c in closed {
        let (row, col) = (c / cols, c % cols);
        if cfg.vertiports.iter().any(|v| v.row == row && v.col == col) {
            continue;
        }
        cfg.capacity_overrides.push(CapacityOverride {
            row,
            col,
            from: 0,
            until,
            capacity: 0,
        });
    }
    AirspaceGrid::build(cfg).map_err(|e| e.to_string())
}

/// Requests departing at `departure` for `(origin, destination)` pairs of
/// vertiport indices, each asking for its fastest trip.
fn requests(grid: &AirspaceGrid, trips: &[u32], departure: u32) -> Result<Vec<FlightRequest>, String> {
    let ports = grid.vertiports();
    let s = scenario();
    trips
        .chunks(2)
        .enumerate()
        .map(|(k, pair)| {
            let [o, d] = pair else {
                return Err("trips come in origin, destination pairs".to_string());
            };
            let (&o, &d) = (
                ports.get(*o as usize).ok_or("unknown origin")?,
                ports.get(*d as usize).ok_or("unknown destination")?,
            );
            if o == d {
                return Err("origin and destination must differ".into());
            }
            let mut req = FlightRequest::new(FlightId(k as u64 + 1), o, d, departure, departure, s.flexibility);
            let travel = min_travel_time(grid, o, d, &req.dwell).map_err(|e| e.to_string())?;
            req.arrival = departure + travel;
            req.original_arrival = req.arrival;
            req.operator = OperatorId(k as u32);
            if req.arrival + req.flexibility >= grid.horizon_steps() {
                return Err(format!(
                    "trip {} does not fit the {}-step horizon",
                    k + 1,
                    grid.horizon_steps()
                ));
            }
            Ok(req)
        })
        .collect()
}

fn visits(grid: &AirspaceGrid, plan: &FlightPlan) -> Vec<Visit> {
    plan.steps
        .iter()
        .map(|&(r, t)| {
            let c = grid.cell(r);
            Visit {
                row: c.row,
                col: c.col,
                t,
            }
        })
        .collect()
}

fn outcome(grid: &AirspaceGrid, result: &PeriodResult) -> Outcome {
    let flights = result
        .requests
        .iter()
        .map(|req| {
            let served = result.served.iter().find(|s| s.flight == req.id);
            Flight {
                id: req.id.0,
                proposal: result
                    .proposals
                    .iter()
                    .find(|p| p.flight == req.id)
                    .map(|p| visits(grid, p)),
                plan: served.map(|s| visits(grid, &s.plan)),
                tdc: served.map(|s| s.tdc),
            }
        })
        .collect();
    let conflicts = result
        .conflicts
        .iter()
        .flat_map(|c| c.overloaded.iter())
        .map(|o| {
            let c = grid.cell(o.resource);
            Visit {
                row: c.row,
                col: c.col,
                t: o.t,
            }
        })
        .collect();
    Outcome {
        flights,
        conflicts,
        fairness: result.fairness(),
        total_tdc: result.served.iter().map(|s| s.tdc).sum(),
        carried: result.carried.iter().map(|f| f.0).collect(),
    }
}

/// Runs one planning period in `mode` and returns the outcome as JSON.
pub fn plan_period(closed: &[u32], trips: &[u32], mode: Mode, gamma: f64) -> Result<String, String> {
    let grid = grid_with_closures(closed)?;
    let reqs = requests(&grid, trips, 0)?;
    let mut s = scenario();
    s.mode = mode;
    s.gamma = gamma;
    s.validate().map_err(|e| e.to_string())?;
    let settings = PlannerSettings::new(&s).map_err(|e| e.to_string())?;
    let mut state = PlannerState::default();
    let out = run_period(&MicrolpBackend, &grid, &mut state, reqs, &settings, 0, 0).map_err(|e| e.to_string())?;
    serde_json::to_string(&outcome(&grid, &out.result)).map_err(|e| e.to_string())
}

/// Plans a single flight between two vertiports (indices into the layout).
#[wasm_bindgen]
pub fn plan_flight(closed: Vec<u32>, origin: u32, destination: u32) -> Result<String, JsError> {
    plan_period(&closed, &[origin, destination], Mode::Coplan, 0.0).map_err(|e| JsError::new(&e))
}

/// Plans a batch of trips together. `mode` is `fair-coplan`, `coplan` or
/// `tfmp`; `gamma` weighs fairness in fair-coplan.
#[wasm_bindgen]
pub fn deconflict(closed: Vec<u32>, trips: Vec<u32>, mode: &str, gamma: f64) -> Result<String, JsError> {
    let mode: Mode = mode.parse().map_err(|e: String| JsError::new(&e))?;
    plan_period(&closed, &trips, mode, gamma).map_err(|e| JsError::new(&e))
}

/// Fairness value of path lengths before and after deconfliction.
#[wasm_bindgen]
pub fn fairness(before: Vec<u32>, after: Vec<u32>) -> Result<f64, JsError> {
    if before.len() != after.len() || before.contains(&0) {
        return Err(JsError::new("need equally many positive lengths before and after"));
    }
    let ratios: Vec<f64> = before.iter().zip(&after).map(|(&b, &a)| a as f64 / b as f64).collect();
    Ok(spread(&ratios))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_flight_is_on_time() {
        let json = plan_period(&[], &[0, 1], Mode::Coplan, 0.0).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["flights"][0]["tdc"], 0.0);
        assert!(v["carried"].as_array().unwrap().is_empty());
    }

    #[test]
    fn closures_are_respected() {
        // shut the whole column left of the second hub except its neighbors
        let closed: Vec<u32> = (0..8).map(|r| r * 8 + 3).collect();
        let json = plan_period(&closed, &[0, 1], Mode::Coplan, 0.0).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        if let Some(plan) = v["flights"][0]["plan"].as_array() {
            assert!(plan.iter().all(|c| c["col"] != 3));
        }
    }

    #[test]
    fn batches_are_conflict_free() {
        let trips = [0, 1, 0, 1, 1, 0, 1, 0];
        for mode in Mode::ALL {
            let json = plan_period(&[], &trips, mode, 1.0).unwrap();
            let v: serde_json::Value = serde_json::from_str(&json).unwrap();
            assert_eq!(v["flights"].as_array().unwrap().len(), 4);
        }
    }

    #[test]
    fn bad_trips_are_rejected() {
        assert!(plan_period(&[], &[0], Mode::Coplan, 0.0).is_err());
        assert!(plan_period(&[], &[0, 0], Mode::Coplan, 0.0).is_err());
        assert!(plan_period(&[], &[0, 9], Mode::Coplan, 0.0).is_err());
    }

    #[test]
    fn fairness_of_lengths() {
        assert_eq!(fairness(vec![4, 4], vec![4, 6]).unwrap(), 0.5);
    }
}
