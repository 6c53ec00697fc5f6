//! Scenario configuration, read from versioned TOML.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::airspace::{AirspaceGrid, Connectivity, GridConfig, GridError, VertiportKind, VertiportSpec};

/// Schema version written to and expected in scenario files.
pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "fair-coplan")]
    FairCoplan,
    #[serde(rename = "coplan")]
    Coplan,
    #[serde(rename = "tfmp")]
    Tfmp,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::FairCoplan, Mode::Coplan, Mode::Tfmp];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::FairCoplan => "fair-coplan",
            Self::Coplan => "coplan",
            Self::Tfmp => "tfmp",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown mode {s:?}; expected fair-coplan, coplan or tfmp"))
    }
}

/// How minimum dwell times are drawn per request.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DwellRule {
    /// Drawn uniformly for each vertiport-adjacent sector.
    pub adjacent: Vec<u32>,
    /// Used for every other sector.
    pub default: u32,
}

impl Default for DwellRule {
    fn default() -> Self {
        Self {
            adjacent: vec![1, 2],
            default: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub version: u32,
    pub grid: GridConfig,
    /// Mean new requests per hub vertiport per hour.
    pub demand_per_hub_per_hour: f64,
    /// Planning periods per simulated day.
    pub periods_per_day: u32,
    /// Timesteps between consecutive planning periods.
    #[serde(default = "default_cadence")]
    pub cadence: u32,
    pub alpha: f64,
    pub gamma: f64,
    /// Slack on departure and arrival, in steps.
    #[serde(default = "default_flexibility")]
    pub flexibility: u32,
    #[serde(default)]
    pub dwell: DwellRule,
    pub seed: u64,
    pub mode: Mode,
    #[serde(default = "default_days")]
    pub days: u32,
    /// Per-solve wall-clock limit in seconds.
    #[serde(default)]
    pub time_limit: Option<f64>,
}

fn default_cadence() -> u32 {
    1
}

fn default_flexibility() -> u32 {
    3
}

fn default_days() -> u32 {
    1
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("writing scenario: {0}")]
    Write(#[from] toml::ser::Error),
    #[error("scenario version {found} is not supported (expected {CONFIG_VERSION})")]
    Version { found: u32 },
    #[error("invalid grid: {0}")]
    Grid(#[from] GridError),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

/// Command-line style overrides applied on top of a scenario file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub gamma: Option<f64>,
    pub alpha: Option<f64>,
    pub demand: Option<f64>,
    pub seed: Option<u64>,
    pub mode: Option<Mode>,
    pub days: Option<u32>,
    pub time_limit: Option<f64>,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        #[derive(Deserialize)]
        struct Probe {
            version: u32,
        }
        let probe: Probe = toml::from_str(text)?;
        if probe.version != CONFIG_VERSION {
            return Err(ConfigError::Version { found: probe.version });
        }
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.version != CONFIG_VERSION {
            return Err(ConfigError::Version { found: self.version });
        }
        AirspaceGrid::build(self.grid.clone())?;
        if !(self.demand_per_hub_per_hour > 0.0 && self.demand_per_hub_per_hour.is_finite()) {
            return bad(format!("demand must be positive, got {}", self.demand_per_hub_per_hour));
        }
        if self.periods_per_day == 0 {
            return bad("periods_per_day must be at least 1".into());
        }
        if self.cadence == 0 {
            return bad("cadence must be at least 1 step".into());
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha must lie in [0, 1], got {}", self.alpha));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be finite and >= 0, got {}", self.gamma));
        }
        if self.dwell.adjacent.is_empty() || self.dwell.adjacent.contains(&0) || self.dwell.default == 0 {
            return bad("dwell times must be at least 1 step".into());
        }
        // TOML integers are signed 64-bit
        if i64::try_from(self.seed).is_err() {
            return bad(format!("seed must be at most {}, got {}", i64::MAX, self.seed));
        }
        if let Some(t) = self.time_limit {
            if t.is_nan() || t <= 0.0 {
                return bad(format!("time limit must be positive, got {t}"));
            }
        }
        Ok(())
    }

    /// Applies `o` and re-validates.
    pub fn with_overrides(mut self, o: &Overrides) -> Result<Self, ConfigError> {
        if let Some(g) = o.gamma {
            self.gamma = g;
        }
        if let Some(a) = o.alpha {
            self.alpha = a;
        }
        if let Some(d) = o.demand {
            self.demand_per_hub_per_hour = d;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(m) = o.mode {
            self.mode = m;
        }
        if let Some(d) = o.days {
            self.days = d;
        }
        if let Some(t) = o.time_limit {
            self.time_limit = Some(t);
        }
        self.validate()?;
        Ok(self)
    }

    /// Gamma actually used by the deconfliction step in this mode.
    pub fn effective_gamma(&self) -> f64 {
        match self.mode {
            Mode::FairCoplan => self.gamma,
            Mode::Coplan | Mode::Tfmp => 0.0,
        }
    }

    /// Length of one planning period in hours.
    pub fn period_hours(&self) -> f64 {
        self.cadence as f64 * self.grid.step_minutes / 60.0
    }
}

fn vertiport(row: u32, col: u32, kind: VertiportKind) -> VertiportSpec {
    let ops_capacity = match kind {
        VertiportKind::Hub => 12,
        VertiportKind::Vertistop => 5,
    };
    VertiportSpec {
        row,
        col,
        kind,
        ops_capacity,
    }
}

/// Desk-scale scenario: 8x8 grid, two hubs and four vertistops, 14-step
/// horizon, three-hour days of five-minute periods.
pub fn desk_scenario() -> ScenarioConfig {
    use VertiportKind::{Hub, Vertistop};
    ScenarioConfig {
        version: CONFIG_VERSION,
        grid: GridConfig {
            rows: 8,
            cols: 8,
            cell_size_km: 1.0,
            connectivity: Connectivity::Orthogonal4,
            horizon_steps: 14,
            step_minutes: 5.0,
            sector_capacity: 1,
            vertiport_adjacent_capacity: 3,
            vertiports: vec![
                vertiport(2, 2, Hub),
                vertiport(5, 5, Hub),
                vertiport(0, 5, Vertistop),
                vertiport(5, 0, Vertistop),
                vertiport(7, 3, Vertistop),
                vertiport(3, 7, Vertistop),
            ],
            capacity_overrides: Vec::new(),
        },
        demand_per_hub_per_hour: 20.0,
        periods_per_day: 36,
        cadence: 1,
        alpha: 0.3,
        gamma: 1.0,
        flexibility: 3,
        dwell: DwellRule::default(),
        seed: 20_240_601,
        mode: Mode::FairCoplan,
        days: 10,
        time_limit: None,
    }
}

/// Full-scale scenario: 15x15 grid of 4 km cells, four central hubs and
/// eight vertistops, 18-step horizon.
pub fn full_scenario() -> ScenarioConfig {
    use VertiportKind::{Hub, Vertistop};
    let mut vertiports: Vec<VertiportSpec> = [(5, 5), (5, 9), (9, 5), (9, 9)]
        .iter()
        .map(|&(r, c)| vertiport(r, c, Hub))
        .collect();
    vertiports.extend(
        [(1, 1), (1, 7), (1, 13), (7, 1), (7, 13), (13, 1), (13, 7), (13, 13)]
            .iter()
            .map(|&(r, c)| vertiport(r, c, Vertistop)),
    );
    ScenarioConfig {
        version: CONFIG_VERSION,
        grid: GridConfig {
            rows: 15,
            cols: 15,
            cell_size_km: 4.0,
            connectivity: Connectivity::Orthogonal4,
            horizon_steps: 18,
            step_minutes: 5.0,
            sector_capacity: 1,
            vertiport_adjacent_capacity: 3,
            vertiports,
            capacity_overrides: Vec::new(),
        },
        demand_per_hub_per_hour: 25.0,
        periods_per_day: 72,
        cadence: 1,
        alpha: 0.3,
        gamma: 0.2,
        flexibility: 3,
        dwell: DwellRule::default(),
        seed: 1,
        mode: Mode::FairCoplan,
        days: 10,
        time_limit: Some(180.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
version = 1
demand_per_hub_per_hour = 25.0
periods_per_day = 12
alpha = 0.3
gamma = 1.0
seed = 11
mode = "fair-coplan"

[grid]
rows = 4
cols = 4
cell_size_km = 2.0
horizon_steps = 10
step_minutes = 5.0
vertiports = [
  { row = 0, col = 0, kind = "hub", ops_capacity = 12 },
  { row = 3, col = 3, kind = "vertistop", ops_capacity = 5 },
]
"#;

    #[test]
    fn parses_with_defaults() {
        let c = ScenarioConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(c.cadence, 1);
        assert_eq!(c.flexibility, 3);
        assert_eq!(c.dwell, DwellRule::default());
        assert_eq!(c.grid.sector_capacity, 1);
        assert!((c.period_hours() - 5.0 / 60.0).abs() < 1e-12);
        let again = ScenarioConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn rejects_other_versions_and_bad_overrides() {
        let v2 = SAMPLE.replace("version = 1", "version = 2");
        assert!(matches!(
            ScenarioConfig::from_toml(&v2),
            Err(ConfigError::Version { found: 2 })
        ));
        let c = ScenarioConfig::from_toml(SAMPLE).unwrap();
        let bad = Overrides {
            gamma: Some(-1.0),
            ..Default::default()
        };
        assert!(c.clone().with_overrides(&bad).is_err());
        let good = Overrides {
            mode: Some(Mode::Tfmp),
            days: Some(3),
            ..Default::default()
        };
        let c = c.with_overrides(&good).unwrap();
        assert_eq!((c.mode, c.days, c.effective_gamma()), (Mode::Tfmp, 3, 0.0));
    }

    #[test]
    fn presets_are_valid() {
        for s in [desk_scenario(), full_scenario()] {
            s.validate().unwrap();
            assert_eq!(ScenarioConfig::from_toml(&s.to_toml().unwrap()).unwrap(), s);
        }
        let full = AirspaceGrid::build(full_scenario().grid).unwrap();
        assert_eq!((full.len(), full.vertiports().len()), (225, 12));
        assert_eq!(full_scenario().alpha, 0.3);
    }

    #[test]
    fn seeds_must_fit_toml() {
        let mut s = desk_scenario();
        s.seed = i64::MAX as u64;
        assert_eq!(ScenarioConfig::from_toml(&s.to_toml().unwrap()).unwrap(), s);
        s.seed += 1;
        assert!(s.validate().is_err());
    }

    #[test]
    fn mode_names_round_trip() {
        for m in Mode::ALL {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
        }
        assert!("fair".parse::<Mode>().is_err());
    }
}
