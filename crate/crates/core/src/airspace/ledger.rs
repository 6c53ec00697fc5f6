//! The flight database: filed plans plus a cached occupancy index.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{AirspaceGrid, ResourceId, Timestep};
use crate::flight::{FlightId, FlightPlan, OperatorId};

/// Read access to per-cell occupancy counts.
pub trait Occupancy {
    fn occupancy(&self, r: ResourceId, t: Timestep) -> u32;
}

/// `max(C(r, t) - O(r, t), 0)`.
pub fn remaining_capacity(
    grid: &AirspaceGrid,
    occ: &impl Occupancy,
    r: ResourceId,
    t: Timestep,
) -> Result<u32, LedgerError> {
    if !grid.contains(r) {
        return Err(LedgerError::UnknownResource(r));
    }
    Ok(grid.capacity(r, t).saturating_sub(occ.occupancy(r, t)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlightPlanRecord {
    pub flight: FlightId,
    pub operator: OperatorId,
    pub plan: FlightPlan,
    pub filed_at: Timestep,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Overload {
    pub resource: ResourceId,
    pub t: Timestep,
    pub demand: u32,
    pub capacity: u32,
}

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("unknown resource {0}")]
    UnknownResource(ResourceId),
    #[error("filing {flight} would exceed capacity at {cells:?}")]
    CapacityViolation { flight: FlightId, cells: Vec<Overload> },
    #[error("{0} is already filed")]
    Duplicate(FlightId),
    #[error("flight database io: {0}")]
    Io(#[from] io::Error),
    #[error("flight database line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct OccupancySnapshot {
    counts: HashMap<(ResourceId, Timestep), u32>,
}

impl OccupancySnapshot {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_plan(&mut self, plan: &FlightPlan) {
        for &(r, t) in &plan.steps {
            *self.counts.entry((r, t)).or_insert(0) += 1;
        }
    }

    pub fn with_plans<'a>(mut self, plans: impl IntoIterator<Item = &'a FlightPlan>) -> Self {
        for p in plans {
            self.add_plan(p);
        }
        self
    }

    pub fn set(&mut self, r: ResourceId, t: Timestep, count: u32) {
        if count == 0 {
            self.counts.remove(&(r, t));
        } else {
            self.counts.insert((r, t), count);
        }
    }

    pub fn remaining(&self, grid: &AirspaceGrid, r: ResourceId, t: Timestep) -> u32 {
        grid.capacity(r, t).saturating_sub(self.occupancy(r, t))
    }

    /// Occupied cells in `(resource, step)` order.
    pub fn cells(&self) -> Vec<((ResourceId, Timestep), u32)> {
        let mut v: Vec<_> = self.counts.iter().map(|(&k, &c)| (k, c)).collect();
        v.sort();
        v
    }
}

impl Occupancy for OccupancySnapshot {
    fn occupancy(&self, r: ResourceId, t: Timestep) -> u32 {
        self.counts.get(&(r, t)).copied().unwrap_or(0)
    }
}

/// Cells where `base` plus `plans` exceeds capacity, sorted by cell.
pub fn overlay_audit<'a>(
    grid: &AirspaceGrid,
    base: &OccupancySnapshot,
    plans: impl IntoIterator<Item = &'a FlightPlan>,
) -> Vec<Overload> {
    let overlay = base.clone().with_plans(plans);
    overlay
        .cells()
        .into_iter()
        .filter_map(|((resource, t), demand)| {
            let capacity = grid.capacity(resource, t);
            (demand > capacity).then_some(Overload {
                resource,
                t,
                demand,
                capacity,
            })
        })
        .collect()
}

/// Append-only store of authorized plans. Single writer.
#[derive(Clone, Debug, Default)]
pub struct OccupancyLedger {
    records: Vec<FlightPlanRecord>,
    index: OccupancySnapshot,
}

impl OccupancyLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> &[FlightPlanRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Immutable copy of the occupancy index.
    pub fn snapshot(&self) -> OccupancySnapshot {
        self.index.clone()
    }

    /// Files `record` if every cell it occupies still has room; otherwise
    /// leaves the ledger untouched and names the offending cells.
    pub fn file_plan(&mut self, grid: &AirspaceGrid, record: FlightPlanRecord) -> Result<(), LedgerError> {
        if self.records.iter().any(|r| r.flight == record.flight) {
            return Err(LedgerError::Duplicate(record.flight));
        }
        let mut over = Vec::new();
        for &(r, t) in &record.plan.steps {
            if !grid.contains(r) {
                return Err(LedgerError::UnknownResource(r));
            }
            let demand = self.index.occupancy(r, t) + 1;
            let capacity = grid.capacity(r, t);
            if demand > capacity {
                over.push(Overload {
                    resource: r,
                    t,
                    demand,
                    capacity,
                });
            }
        }
        if !over.is_empty() {
            return Err(LedgerError::CapacityViolation {
                flight: record.flight,
                cells: over,
            });
        }
        self.index.add_plan(&record.plan);
        self.records.push(record);
        Ok(())
    }

    /// Rebuilds the occupancy index from the filed plans alone.
    pub fn recompute(&self) -> OccupancySnapshot {
        OccupancySnapshot::new().with_plans(self.records.iter().map(|r| &r.plan))
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), LedgerError> {
        for r in &self.records {
            Self::append_jsonl(&mut w, r)?;
        }
        Ok(())
    }

    pub fn append_jsonl<W: Write>(mut w: W, record: &FlightPlanRecord) -> Result<(), LedgerError> {
        serde_json::to_writer(&mut w, record).map_err(io::Error::from)?;
        w.write_all(b"\n")?;
        Ok(())
    }

    /// Replays a flight database, re-checking capacity on every record.
    pub fn read_jsonl<R: BufRead>(grid: &AirspaceGrid, r: R) -> Result<Self, LedgerError> {
        let mut ledger = Self::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: FlightPlanRecord =
                serde_json::from_str(&line).map_err(|source| LedgerError::Parse { line: i + 1, source })?;
            ledger.file_plan(grid, rec)?;
        }
        Ok(ledger)
    }
}

impl Occupancy for OccupancyLedger {
    fn occupancy(&self, r: ResourceId, t: Timestep) -> u32 {
        self.index.occupancy(r, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::airspace::tests::config;
    use crate::airspace::Cell;
    use proptest::prelude::*;

    fn grid() -> AirspaceGrid {
        AirspaceGrid::build(config(3, 5, &[(1, 0), (1, 4)])).unwrap()
    }

    fn record(grid: &AirspaceGrid, id: u64, cols: &[u32], start: Timestep) -> FlightPlanRecord {
        let steps = cols
            .iter()
            .enumerate()
            .map(|(i, &c)| (grid.id_at(Cell::new(1, c)).unwrap(), start + i as u32))
            .collect();
        FlightPlanRecord {
            flight: FlightId(id),
            operator: OperatorId(0),
            plan: FlightPlan::from_steps(FlightId(id), steps).unwrap(),
            filed_at: 0,
        }
    }

    #[test]
    fn remaining_capacity_arithmetic() {
        let g = grid();
        let mut l = OccupancyLedger::new();
        let adj = g.id_at(Cell::new(1, 1)).unwrap();
        let mid = g.id_at(Cell::new(1, 2)).unwrap();
        assert_eq!(remaining_capacity(&g, &l, adj, 3).unwrap(), 3);
        l.file_plan(&g, record(&g, 1, &[0, 1, 2, 3, 4], 2)).unwrap();
        assert_eq!(remaining_capacity(&g, &l, adj, 3).unwrap(), 2);
        assert_eq!(remaining_capacity(&g, &l, mid, 4).unwrap(), 0);
        assert!(remaining_capacity(&g, &l, ResourceId(99), 0).is_err());
    }

    #[test]
    fn filing_increments_and_rejects_overlap() {
        let g = grid();
        let mut l = OccupancyLedger::new();
        let mid = g.id_at(Cell::new(1, 2)).unwrap();
        l.file_plan(&g, record(&g, 1, &[0, 1, 2, 3, 4], 2)).unwrap();
        assert_eq!(l.occupancy(mid, 4), 1);
        match l.file_plan(&g, record(&g, 2, &[0, 1, 2, 3, 4], 2)) {
            Err(LedgerError::CapacityViolation { cells, .. }) => {
                assert_eq!(
                    cells,
                    vec![Overload {
                        resource: mid,
                        t: 4,
                        demand: 2,
                        capacity: 1
                    }]
                );
            }
            other => panic!("expected rejection, got {other:?}"),
        }
        assert_eq!(l.len(), 1);
        assert_eq!(l.occupancy(mid, 4), 1);
    }

    #[test]
    fn jsonl_round_trip_replays_checks() {
        let g = grid();
        let mut l = OccupancyLedger::new();
        l.file_plan(&g, record(&g, 1, &[0, 1, 2, 3, 4], 2)).unwrap();
        l.file_plan(&g, record(&g, 2, &[0, 1, 2, 3, 4], 3)).unwrap();
        let mut buf = Vec::new();
        l.write_jsonl(&mut buf).unwrap();
        let back = OccupancyLedger::read_jsonl(&g, buf.as_slice()).unwrap();
        assert_eq!(back.records(), l.records());
        assert_eq!(back.snapshot(), l.snapshot());
    }

    proptest! {
        #[test]
        fn index_matches_recomputation(starts in proptest::collection::vec(0u32..12, 0..12)) {
            let g = grid();
            let mut l = OccupancyLedger::new();
            let mid = g.id_at(Cell::new(1, 2)).unwrap();
            for (i, s) in starts.into_iter().enumerate() {
                let before: Vec<u32> = (0..20).map(|t| remaining_capacity(&g, &l, mid, t).unwrap()).collect();
                let rec = record(&g, i as u64, &[0, 1, 2, 3, 4], s);
                let accepted = l.file_plan(&g, rec).is_ok();
                let after: Vec<u32> = (0..20).map(|t| remaining_capacity(&g, &l, mid, t).unwrap()).collect();
                for t in 0..20u32 {
                    if accepted && t == s + 2 {
                        prop_assert_eq!(after[t as usize] + 1, before[t as usize]);
                    } else {
                        prop_assert_eq!(after[t as usize], before[t as usize]);
                    }
                }
                prop_assert_eq!(l.recompute(), l.snapshot());
            }
            prop_assert!(overlay_audit(&g, &OccupancySnapshot::new(), l.records().iter().map(|r| &r.plan)).is_empty());
        }
    }
}
