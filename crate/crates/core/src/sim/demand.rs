//! Seeded stochastic demand: Poisson request counts per hub and period.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::airspace::{AirspaceGrid, ResourceId, Timestep};
use crate::config::ScenarioConfig;
use crate::flight::{DwellTimes, FlightId, FlightRequest, OperatorId};
use crate::routing::min_travel_time;

/// Requests per period per hub cannot exceed this many, which keeps flight
/// ids of different periods apart.
pub const MAX_PER_PERIOD: u64 = 10_000;

/// Independent stream seed for one `(day, period)`.
pub fn period_seed(seed: u64, day: u32, period: u32) -> u64 {
    // splitmix64 finalizer over a packed key
    let mut z = seed ^ (u64::from(day) << 32 | u64::from(period)).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Day-local flight id of the `k`-th request generated in `period`.
pub fn flight_id(period: u32, k: u64) -> FlightId {
    FlightId(u64::from(period) * MAX_PER_PERIOD + k)
}

/// First step of the horizon planned in `period`.
pub fn period_start(scenario: &ScenarioConfig, period: u32) -> Timestep {
    period * scenario.cadence
}

/// Mean requests per hub in one period.
pub fn mean_per_hub(scenario: &ScenarioConfig) -> f64 {
    scenario.demand_per_hub_per_hour * scenario.period_hours()
}

/// New requests to be planned in `period` of `day`. Each departs at the
/// start of that period's horizon from the hub that generated it, heads to
/// a uniformly drawn other vertiport, and asks to arrive after the fastest
/// possible trip. Destinations whose trip cannot finish inside the horizon
/// are not drawn.
pub fn generate_demand(grid: &AirspaceGrid, scenario: &ScenarioConfig, day: u32, period: u32) -> Vec<FlightRequest> {
    let mut rng = ChaCha8Rng::seed_from_u64(period_seed(scenario.seed, day, period));
    let mean = mean_per_hub(scenario);
    let Ok(poisson) = Poisson::new(mean) else {
        return Vec::new();
    };
    let depart = period_start(scenario, period);
    let horizon = grid.horizon_steps();
    let mut out = Vec::new();
    let mut k = 0;
    for hub in grid.hubs() {
        let count = (poisson.sample(&mut rng) as u64).min(MAX_PER_PERIOD - 1);
        for _ in 0..count {
            let dwell = sample_dwell(grid, scenario, &mut rng);
            let candidates: Vec<(ResourceId, u32)> = grid
                .vertiports()
                .iter()
                .copied()
                .filter(|&v| v != hub)
                .filter_map(|v| min_travel_time(grid, hub, v, &dwell).ok().map(|t| (v, t)))
                .filter(|&(_, t)| t + scenario.flexibility < horizon)
                .collect();
            let Some(&(dest, travel)) = candidates.choose(&mut rng) else {
                continue;
            };
            let mut req = FlightRequest::new(
                flight_id(period, k),
                hub,
                dest,
                depart,
                depart + travel,
                scenario.flexibility,
            );
            req.operator = OperatorId(k as u32);
            req.dwell = dwell;
            out.push(req);
            k += 1;
        }
    }
    out
}

fn sample_dwell(grid: &AirspaceGrid, scenario: &ScenarioConfig, rng: &mut impl Rng) -> DwellTimes {
    let mut dwell = DwellTimes {
        default: scenario.dwell.default,
        ..Default::default()
    };
    for r in grid.vertiport_adjacent_sectors() {
        let l = *scenario.dwell.adjacent.choose(rng).expect("validated non-empty");
        if l != dwell.default {
            dwell = dwell.with(r, l);
        }
    }
    dwell
}
