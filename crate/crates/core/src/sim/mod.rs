//! Rolling-horizon campaigns: seeded demand, one planning round per
//! period, carryover of unserved flights, per-day metrics and output files.

pub mod campaign;
pub mod demand;
pub mod metrics;
pub mod output;
pub mod period;

use thiserror::Error;

use crate::airspace::{GridError, LedgerError, Overload};
use crate::baseline::TfmpError;
use crate::config::ConfigError;
use crate::flight::FlightId;
use crate::step1::Step1Error;
use crate::step2::Step2Error;
use crate::step3::Step3Error;

pub use campaign::{run_campaign, run_day, Campaign, DayRun};
pub use demand::generate_demand;
pub use metrics::{CampaignMetrics, DayMetrics, SolveTimeStats};
pub use period::{
    run_period, PeriodOutcome, PeriodResult, PlannerSettings, PlannerState, ServedFlight, Step3Trace, StepTimings,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("filing a plan failed: {0}")]
    Ledger(#[from] LedgerError),
    #[error("choice step: {0}")]
    Step1(#[from] Step1Error),
    #[error("trajectory step: {0}")]
    Step2(#[from] Step2Error),
    #[error("deconfliction step: {0}")]
    Step3(#[from] Step3Error),
    #[error("fixed-route step: {0}")]
    Tfmp(#[from] TfmpError),
    #[error("{0} has no route to its destination")]
    Unroutable(FlightId),
    #[error("day {day}: end-of-day audit found {} overloaded cells", .overloads.len())]
    Audit { day: u32, overloads: Vec<Overload> },
    #[error("day {day}: {generated} requests generated but {served} served and {pending} pending")]
    Conservation {
        day: u32,
        generated: usize,
        served: usize,
        pending: usize,
    },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path} line {line}: {source}")]
    Json {
        path: String,
        line: usize,
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{0}")]
    Layout(String),
}
