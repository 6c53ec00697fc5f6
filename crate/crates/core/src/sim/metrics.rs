//! Per-day and campaign statistics, computed only from stored period records.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::period::{PeriodResult, StepTimings};

/// Differences below this are treated as ties when comparing runs.
pub const COMPARE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DayMetrics {
    pub day: u32,
    /// New requests generated over the day.
    pub generated: usize,
    pub served: usize,
    /// Carry events summed over all periods.
    pub carried: usize,
    /// Requests still unserved after the last period.
    pub pending: usize,
    /// Mean delay cost of served flights against the request they were
    /// served under.
    pub mean_tdc: Option<f64>,
    /// Same, measured against each flight's first submission.
    pub mean_tdc_original: Option<f64>,
    /// Periods in which deconfliction ran.
    pub deconfliction_periods: usize,
    /// Mean fairness value over those periods.
    pub mean_fairness: Option<f64>,
}

impl DayMetrics {
    pub fn from_periods(day: u32, periods: &[PeriodResult]) -> Self {
        let generated = periods.iter().map(PeriodResult::new_requests).sum();
        let tdcs: Vec<f64> = periods.iter().flat_map(|p| p.served.iter().map(|s| s.tdc)).collect();
        let original: Vec<f64> = periods
            .iter()
            .flat_map(|p| p.served.iter().map(|s| s.tdc_original))
            .collect();
        let fairness: Vec<f64> = periods.iter().filter_map(PeriodResult::fairness).collect();
        Self {
            day,
            generated,
            served: tdcs.len(),
            carried: periods.iter().map(|p| p.carried.len()).sum(),
            pending: periods.last().map_or(0, |p| p.carried.len()),
            mean_tdc: mean(&tdcs),
            mean_tdc_original: mean(&original),
            deconfliction_periods: fairness.len(),
            mean_fairness: mean(&fairness),
        }
    }

    pub fn had_deconfliction(&self) -> bool {
        self.deconfliction_periods > 0
    }
}

/// A day of the evaluated run next to the same day run at gamma = 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedDay {
    pub run: DayMetrics,
    pub reference: DayMetrics,
}

impl PairedDay {
    /// `None` when neither run deconflicted anything that day.
    pub fn fairness_improved(&self) -> Option<bool> {
        if !self.run.had_deconfliction() && !self.reference.had_deconfliction() {
            return None;
        }
        let run = self.run.mean_fairness.unwrap_or(0.0);
        let reference = self.reference.mean_fairness.unwrap_or(0.0);
        Some(run < reference - COMPARE_TOL)
    }

    /// `None` when either run served nobody.
    pub fn tdc_increased(&self) -> Option<bool> {
        Some(self.run.mean_tdc? > self.reference.mean_tdc? + COMPARE_TOL)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CampaignMetrics {
    pub days: Vec<DayMetrics>,
    /// Present when the run was paired with a gamma = 0 reference.
    pub paired: Option<Vec<PairedDay>>,
}

impl CampaignMetrics {
    pub fn new(days: Vec<DayMetrics>, reference: Option<Vec<DayMetrics>>) -> Self {
        let paired = reference.map(|r| {
            days.iter()
                .zip(r)
                .map(|(run, reference)| PairedDay {
                    run: run.clone(),
                    reference,
                })
                .collect()
        });
        Self { days, paired }
    }

    /// `(improved, days with any deconfliction)`.
    pub fn fairness_improvement(&self) -> Option<(usize, usize)> {
        let flags: Vec<bool> = self
            .paired
            .as_ref()?
            .iter()
            .filter_map(PairedDay::fairness_improved)
            .collect();
        Some((flags.iter().filter(|&&b| b).count(), flags.len()))
    }

    /// `(days with higher mean delay cost, comparable days)`.
    pub fn tdc_increase(&self) -> Option<(usize, usize)> {
        let flags: Vec<bool> = self
            .paired
            .as_ref()?
            .iter()
            .filter_map(PairedDay::tdc_increased)
            .collect();
        Some((flags.iter().filter(|&&b| b).count(), flags.len()))
    }

    /// Mean over days of the daily mean delay cost.
    pub fn mean_daily_tdc(&self) -> Option<f64> {
        let v: Vec<f64> = self.days.iter().filter_map(|d| d.mean_tdc).collect();
        mean(&v)
    }
}

/// Percentage `num / den`, `None` for an empty denominator.
pub fn percent(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

pub fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveTimeStats {
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl SolveTimeStats {
    pub fn from_seconds(v: &[f64]) -> Option<Self> {
        let m = mean(v)?;
        let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64;
        Some(Self {
            count: v.len(),
            mean: m,
            std: var.sqrt(),
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

/// Solve-time samples per step name, in seconds.
pub fn step_samples(timings: &[StepTimings]) -> Vec<(&'static str, Vec<f64>)> {
    let secs = Duration::as_secs_f64;
    vec![
        (
            "step1",
            timings.iter().filter_map(|t| t.step1.as_ref().map(secs)).collect(),
        ),
        ("step2", timings.iter().flat_map(|t| t.step2.iter().map(secs)).collect()),
        (
            "step3",
            timings.iter().filter_map(|t| t.step3.as_ref().map(secs)).collect(),
        ),
        (
            "tfmp",
            timings.iter().filter_map(|t| t.tfmp.as_ref().map(secs)).collect(),
        ),
        ("period", timings.iter().map(|t| secs(&t.total)).collect()),
    ]
}
