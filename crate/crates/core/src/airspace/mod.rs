//! Discretized 2D airspace: one resource per grid cell, either an airspace
//! sector or a vertiport, with per-timestep capacities.

mod ledger;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ledger::{
    overlay_audit, remaining_capacity, FlightPlanRecord, LedgerError, Occupancy, OccupancyLedger, OccupancySnapshot,
    Overload,
};

/// Absolute simulation timestep (units of the grid's step length).
pub type Timestep = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResourceId(pub u32);

impl ResourceId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ResourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub row: u32,
    pub col: u32,
}

impl Cell {
    pub fn new(row: u32, col: u32) -> Self {
        Self { row, col }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    #[default]
    #[serde(rename = "orthogonal-4")]
    Orthogonal4,
    #[serde(rename = "diagonal-8")]
    Diagonal8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VertiportKind {
    Hub,
    Vertistop,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertiportSpec {
    pub row: u32,
    pub col: u32,
    pub kind: VertiportKind,
    /// Combined departures + arrivals per timestep.
    pub ops_capacity: u32,
}

impl VertiportSpec {
    pub fn cell(&self) -> Cell {
        Cell::new(self.row, self.col)
    }
}

/// Replaces the capacity of one cell over `[from, until)` (absolute steps),
/// e.g. for a closure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityOverride {
    pub row: u32,
    pub col: u32,
    pub from: Timestep,
    pub until: Timestep,
    pub capacity: u32,
}

fn default_sector_capacity() -> u32 {
    1
}

fn default_adjacent_capacity() -> u32 {
    3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub rows: u32,
    pub cols: u32,
    pub cell_size_km: f64,
    #[serde(default)]
    pub connectivity: Connectivity,
    /// Planning horizon length |T| in steps.
    pub horizon_steps: u32,
    pub step_minutes: f64,
    #[serde(default = "default_sector_capacity")]
    pub sector_capacity: u32,
    #[serde(default = "default_adjacent_capacity")]
    pub vertiport_adjacent_capacity: u32,
    pub vertiports: Vec<VertiportSpec>,
    #[serde(default)]
    pub capacity_overrides: Vec<CapacityOverride>,
}

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("grid must have at least one row and one column")]
    Empty,
    #[error("horizon must have at least one step")]
    EmptyHorizon,
    #[error("step length must be positive")]
    StepLength,
    #[error("vertiport at {0} lies outside the grid")]
    OutOfBounds(Cell),
    #[error("two vertiports share cell {0}")]
    Overlap(Cell),
    #[error("vertiports at {0} and {1} are adjacent; routes need at least one sector between them")]
    AdjacentVertiports(Cell, Cell),
    #[error("vertiport at {0} has zero operations capacity")]
    ZeroOpsCapacity(Cell),
    #[error("capacity override at {0} lies outside the grid")]
    OverrideOutOfBounds(Cell),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResourceKind {
    Sector,
    Vertiport,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Resource {
    pub id: ResourceId,
    pub kind: ResourceKind,
    pub cell: Cell,
}

/// Immutable airspace model shared by every planning step.
#[derive(Clone, Debug)]
pub struct AirspaceGrid {
    config: GridConfig,
    resources: Vec<Resource>,
    neighbors: Vec<Vec<ResourceId>>,
    vertiport_adjacent: Vec<bool>,
    vertiports: Vec<ResourceId>,
    vertiport_kind: HashMap<ResourceId, VertiportKind>,
    base_capacity: Vec<u32>,
    overrides: HashMap<ResourceId, Vec<(Timestep, Timestep, u32)>>,
}

impl AirspaceGrid {
    pub fn build(config: GridConfig) -> Result<Self, GridError> {
        if config.rows == 0 || config.cols == 0 {
            return Err(GridError::Empty);
        }
        if config.horizon_steps == 0 {
            return Err(GridError::EmptyHorizon);
        }
        if config.step_minutes.is_nan() || config.step_minutes <= 0.0 {
            return Err(GridError::StepLength);
        }
        let n = (config.rows * config.cols) as usize;
        let id_of = |c: Cell| ResourceId(c.row * config.cols + c.col);
        let inside = |c: Cell| c.row < config.rows && c.col < config.cols;

        let mut kinds = vec![ResourceKind::Sector; n];
        let mut vertiport_kind = HashMap::new();
        let mut vertiports = Vec::new();
        let mut base_capacity = vec![config.sector_capacity; n];
        for v in &config.vertiports {
            let cell = v.cell();
            if !inside(cell) {
                return Err(GridError::OutOfBounds(cell));
            }
            if v.ops_capacity == 0 {
                return Err(GridError::ZeroOpsCapacity(cell));
            }
            let id = id_of(cell);
            if kinds[id.index()] == ResourceKind::Vertiport {
                return Err(GridError::Overlap(cell));
            }
            kinds[id.index()] = ResourceKind::Vertiport;
            vertiport_kind.insert(id, v.kind);
            vertiports.push(id);
            base_capacity[id.index()] = v.ops_capacity;
        }

        let offsets: &[(i64, i64)] = match config.connectivity {
            Connectivity::Orthogonal4 => &[(-1, 0), (0, -1), (0, 1), (1, 0)],
            Connectivity::Diagonal8 => &[(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)],
        };
        let mut resources = Vec::with_capacity(n);
        let mut neighbors = Vec::with_capacity(n);
        for row in 0..config.rows {
            for col in 0..config.cols {
                let cell = Cell::new(row, col);
                let id = id_of(cell);
                resources.push(Resource {
                    id,
                    kind: kinds[id.index()],
                    cell,
                });
                let mut adj: Vec<ResourceId> = offsets
                    .iter()
                    .filter_map(|&(dr, dc)| {
                        let r = i64::from(row) + dr;
                        let c = i64::from(col) + dc;
                        (r >= 0 && c >= 0 && r < i64::from(config.rows) && c < i64::from(config.cols))
                            .then(|| id_of(Cell::new(r as u32, c as u32)))
                    })
                    .collect();
                adj.sort();
                neighbors.push(adj);
            }
        }

        for &a in &vertiports {
            if let Some(&b) = neighbors[a.index()]
                .iter()
                .find(|b| kinds[b.index()] == ResourceKind::Vertiport)
            {
                return Err(GridError::AdjacentVertiports(
                    resources[a.index()].cell,
                    resources[b.index()].cell,
                ));
            }
        }

        let mut vertiport_adjacent = vec![false; n];
        for &a in &vertiports {
            for &s in &neighbors[a.index()] {
                if kinds[s.index()] == ResourceKind::Sector {
                    vertiport_adjacent[s.index()] = true;
                    base_capacity[s.index()] = config.vertiport_adjacent_capacity;
                }
            }
        }

        let mut overrides: HashMap<ResourceId, Vec<(Timestep, Timestep, u32)>> = HashMap::new();
        for o in &config.capacity_overrides {
            let cell = Cell::new(o.row, o.col);
            if !inside(cell) {
                return Err(GridError::OverrideOutOfBounds(cell));
            }
            overrides
                .entry(id_of(cell))
                .or_default()
                .push((o.from, o.until, o.capacity));
        }

        Ok(Self {
            config,
            resources,
            neighbors,
            vertiport_adjacent,
            vertiports,
            vertiport_kind,
            base_capacity,
            overrides,
        })
    }

    pub fn config(&self) -> &GridConfig {
        &self.config
    }

    pub fn rows(&self) -> u32 {
        self.config.rows
    }

    pub fn cols(&self) -> u32 {
        self.config.cols
    }

    pub fn horizon_steps(&self) -> u32 {
        self.config.horizon_steps
    }

    pub fn len(&self) -> usize {
        self.resources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.resources.is_empty()
    }

    pub fn resources(&self) -> &[Resource] {
        &self.resources
    }

    pub fn resource(&self, id: ResourceId) -> Option<&Resource> {
        self.resources.get(id.index())
    }

    pub fn contains(&self, id: ResourceId) -> bool {
        id.index() < self.resources.len()
    }

    pub fn id_at(&self, cell: Cell) -> Option<ResourceId> {
        (cell.row < self.config.rows && cell.col < self.config.cols)
            .then(|| ResourceId(cell.row * self.config.cols + cell.col))
    }

    pub fn cell(&self, id: ResourceId) -> Cell {
        self.resources[id.index()].cell
    }

    /// Adjacent resources, sorted by id. Never contains `id` itself.
    pub fn neighbors(&self, id: ResourceId) -> &[ResourceId] {
        &self.neighbors[id.index()]
    }

    pub fn are_adjacent(&self, a: ResourceId, b: ResourceId) -> bool {
        self.neighbors[a.index()].binary_search(&b).is_ok()
    }

    pub fn vertiports(&self) -> &[ResourceId] {
        &self.vertiports
    }

    pub fn hubs(&self) -> Vec<ResourceId> {
        self.vertiports
            .iter()
            .copied()
            .filter(|v| self.vertiport_kind[v] == VertiportKind::Hub)
            .collect()
    }

    pub fn vertiport_kind(&self, id: ResourceId) -> Option<VertiportKind> {
        self.vertiport_kind.get(&id).copied()
    }

    pub fn is_vertiport(&self, id: ResourceId) -> bool {
        self.resources[id.index()].kind == ResourceKind::Vertiport
    }

    /// Sector adjacent to at least one vertiport.
    pub fn is_vertiport_adjacent(&self, id: ResourceId) -> bool {
        self.vertiport_adjacent[id.index()]
    }

    /// Vertiports and vertiport-adjacent sectors: the cells whose capacity
    /// is allocated up front as choices.
    pub fn is_managed(&self, id: ResourceId) -> bool {
        self.is_vertiport(id) || self.is_vertiport_adjacent(id)
    }

    pub fn is_en_route(&self, id: ResourceId) -> bool {
        !self.is_managed(id)
    }

    pub fn vertiport_adjacent_sectors(&self) -> impl Iterator<Item = ResourceId> + '_ {
        self.resources
            .iter()
            .map(|r| r.id)
            .filter(|&id| self.vertiport_adjacent[id.index()])
    }

    pub fn capacity(&self, id: ResourceId, t: Timestep) -> u32 {
        if let Some(list) = self.overrides.get(&id) {
            // Later overrides win.
            if let Some(&(_, _, cap)) = list.iter().rev().find(|&&(from, until, _)| from <= t && t < until) {
                return cap;
            }
        }
        self.base_capacity[id.index()]
    }

    pub fn capacity_constant(&self, id: ResourceId) -> u32 {
        self.base_capacity[id.index()]
    }
}

/// Absolute steps `[start, start + len)` covered by one planning run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Horizon {
    pub start: Timestep,
    pub len: u32,
}

impl Horizon {
    pub fn new(start: Timestep, len: u32) -> Self {
        Self { start, len }
    }

    pub fn end(&self) -> Timestep {
        self.start + self.len
    }

    pub fn last(&self) -> Timestep {
        self.end() - 1
    }

    pub fn contains(&self, t: Timestep) -> bool {
        t >= self.start && t < self.end()
    }

    pub fn steps(&self) -> std::ops::Range<Timestep> {
        self.start..self.end()
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn config(rows: u32, cols: u32, vertiports: &[(u32, u32)]) -> GridConfig {
        GridConfig {
            rows,
            cols,
            cell_size_km: 4.0,
            connectivity: Connectivity::Orthogonal4,
            horizon_steps: 8,
            step_minutes: 5.0,
            sector_capacity: 1,
            vertiport_adjacent_capacity: 3,
            vertiports: vertiports
                .iter()
                .map(|&(row, col)| VertiportSpec {
                    row,
                    col,
                    kind: VertiportKind::Hub,
                    ops_capacity: 12,
                })
                .collect(),
            capacity_overrides: Vec::new(),
        }
    }

    #[test]
    fn full_scale_grid_counts() {
        let cells = [
            (5, 5),
            (5, 9),
            (9, 5),
            (9, 9),
            (1, 1),
            (1, 7),
            (1, 13),
            (7, 1),
            (7, 13),
            (13, 1),
            (13, 7),
            (13, 13),
        ];
        let g = AirspaceGrid::build(config(15, 15, &cells)).unwrap();
        assert_eq!(g.len(), 225);
        assert_eq!(g.vertiports().len(), 12);
        assert_eq!(
            g.resources().iter().filter(|r| r.kind == ResourceKind::Sector).count(),
            213
        );
    }

    #[test]
    fn degenerate_grid() {
        let g = AirspaceGrid::build(config(1, 1, &[(0, 0)])).unwrap();
        assert_eq!(g.len(), 1);
        assert!(g.neighbors(ResourceId(0)).is_empty());
    }

    #[test]
    fn orthogonal_degrees() {
        let g = AirspaceGrid::build(config(3, 3, &[])).unwrap();
        assert_eq!(g.neighbors(g.id_at(Cell::new(1, 1)).unwrap()).len(), 4);
        assert_eq!(g.neighbors(g.id_at(Cell::new(0, 0)).unwrap()).len(), 2);
        let mut c = config(3, 3, &[]);
        c.connectivity = Connectivity::Diagonal8;
        let g = AirspaceGrid::build(c).unwrap();
        assert_eq!(g.neighbors(g.id_at(Cell::new(1, 1)).unwrap()).len(), 8);
        assert_eq!(g.neighbors(g.id_at(Cell::new(0, 0)).unwrap()).len(), 3);
    }

    #[test]
    fn rejects_bad_vertiports() {
        assert_eq!(
            AirspaceGrid::build(config(3, 3, &[(3, 0)])).unwrap_err(),
            GridError::OutOfBounds(Cell::new(3, 0))
        );
        assert_eq!(
            AirspaceGrid::build(config(3, 3, &[(1, 1), (1, 1)])).unwrap_err(),
            GridError::Overlap(Cell::new(1, 1))
        );
        assert!(matches!(
            AirspaceGrid::build(config(3, 3, &[(1, 1), (1, 2)])).unwrap_err(),
            GridError::AdjacentVertiports(..)
        ));
    }

    #[test]
    fn capacities_follow_roles() {
        let mut c = config(3, 4, &[(1, 0)]);
        c.capacity_overrides.push(CapacityOverride {
            row: 1,
            col: 3,
            from: 2,
            until: 4,
            capacity: 0,
        });
        let g = AirspaceGrid::build(c).unwrap();
        let v = g.id_at(Cell::new(1, 0)).unwrap();
        let adj = g.id_at(Cell::new(1, 1)).unwrap();
        let far = g.id_at(Cell::new(1, 3)).unwrap();
        assert_eq!(g.capacity(v, 0), 12);
        assert_eq!(g.capacity(adj, 0), 3);
        assert!(g.is_managed(adj) && g.is_en_route(far));
        assert_eq!(g.capacity(far, 1), 1);
        assert_eq!(g.capacity(far, 2), 0);
        assert_eq!(g.capacity(far, 4), 1);
    }

    proptest! {
        #[test]
        fn adjacency_symmetric_irreflexive(rows in 1u32..9, cols in 1u32..9, diag in any::<bool>(), seed in any::<u64>()) {
            let mut c = config(rows, cols, &[]);
            if diag { c.connectivity = Connectivity::Diagonal8; }
            // A few spread-out vertiports, skipping ones that would be adjacent.
            let mut placed: Vec<(u32, u32)> = Vec::new();
            let mut s = seed;
            for _ in 0..3 {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let cell = (((s >> 33) as u32) % rows, ((s >> 13) as u32) % cols);
                if placed.iter().all(|&(r, q)| r.abs_diff(cell.0) > 1 || q.abs_diff(cell.1) > 1) {
                    placed.push(cell);
                }
            }
            c.vertiports = config(rows, cols, &placed).vertiports;
            let g = AirspaceGrid::build(c).unwrap();
            for r in g.resources() {
                prop_assert!(!g.neighbors(r.id).contains(&r.id));
                for &n in g.neighbors(r.id) {
                    prop_assert!(g.neighbors(n).contains(&r.id));
                }
                // Vertiport-adjacent sectors are exactly sectors next to a vertiport.
                let expect = r.kind == ResourceKind::Sector
                    && g.neighbors(r.id).iter().any(|&n| g.is_vertiport(n));
                prop_assert_eq!(g.is_vertiport_adjacent(r.id), expect);
            }
        }
    }
}
