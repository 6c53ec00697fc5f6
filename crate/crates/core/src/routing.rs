//! Shortest routes over the sector graph.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::airspace::{AirspaceGrid, ResourceId};
use crate::flight::{DwellTimes, FlightId, FlightRequest};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedRoute {
    pub flight: FlightId,
    /// Origin, sectors in order, destination.
    pub resources: Vec<ResourceId>,
    /// Minimum dwell per entry of `resources`.
    pub dwell: Vec<u32>,
}

impl FixedRoute {
    /// Steps from departure slot to arrival slot when nothing is held.
    pub fn nominal_duration(&self) -> u32 {
        self.dwell[..self.dwell.len() - 1].iter().sum()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RoutingError {
    #[error("no sector path from {0} to {1}")]
    Unreachable(ResourceId, ResourceId),
}

/// Neighbors usable as the next hop: sectors, or the destination itself.
fn hops(grid: &AirspaceGrid, r: ResourceId, dest: ResourceId) -> impl Iterator<Item = ResourceId> + '_ {
    grid.neighbors(r)
        .iter()
        .copied()
        .filter(move |&n| n == dest || !grid.is_vertiport(n))
}

/// Hop-shortest route through sectors only. Among equal-length routes the
/// lexicographically smallest resource sequence is chosen.
pub fn fixed_route(grid: &AirspaceGrid, request: &FlightRequest) -> Result<FixedRoute, RoutingError> {
    let (s, e) = (request.origin, request.destination);
    // BFS distances to the destination over sectors.
    let mut dist = vec![u32::MAX; grid.len()];
    dist[e.index()] = 0;
    let mut queue = VecDeque::from([e]);
    while let Some(r) = queue.pop_front() {
        for &n in grid.neighbors(r) {
            if dist[n.index()] != u32::MAX {
                continue;
            }
            if n == s {
                dist[n.index()] = dist[r.index()] + 1;
                continue;
            }
            if grid.is_vertiport(n) {
                continue;
            }
            dist[n.index()] = dist[r.index()] + 1;
            queue.push_back(n);
        }
    }
    if dist[s.index()] == u32::MAX {
        return Err(RoutingError::Unreachable(s, e));
    }
    let mut resources = vec![s];
    let mut cur = s;
    while cur != e {
        // neighbors are sorted by id, so the first match is the smallest
        cur = hops(grid, cur, e)
            .find(|&n| dist[n.index()] + 1 == dist[cur.index()])
            .expect("BFS guarantees a successor");
        resources.push(cur);
    }
    let dwell = resources.iter().map(|&r| dwell_of(grid, &request.dwell, r)).collect();
    Ok(FixedRoute {
        flight: request.id,
        resources,
        dwell,
    })
}

fn dwell_of(grid: &AirspaceGrid, dwell: &DwellTimes, r: ResourceId) -> u32 {
    if grid.is_vertiport(r) {
        1
    } else {
        dwell.get(r)
    }
}

/// Fewest steps from a departure slot at `origin` to an arrival slot at
/// `destination` over any sector path, each sector costing its dwell.
pub fn min_travel_time(
    grid: &AirspaceGrid,
    origin: ResourceId,
    destination: ResourceId,
    dwell: &DwellTimes,
) -> Result<u32, RoutingError> {
    let mut best = vec![u32::MAX; grid.len()];
    let mut heap = BinaryHeap::new();
    // Time at which the flight enters each resource, departing at 0.
    best[origin.index()] = 0;
    heap.push(Reverse((0u32, origin)));
    while let Some(Reverse((t, r))) = heap.pop() {
        if t > best[r.index()] {
            continue;
        }
        if r == destination {
            return Ok(t);
        }
        let leave = t + dwell_of(grid, dwell, r);
        for n in hops(grid, r, destination) {
            if leave < best[n.index()] {
                best[n.index()] = leave;
                heap.push(Reverse((leave, n)));
            }
        }
    }
    Err(RoutingError::Unreachable(origin, destination))
}
