//! Campaign output directories.
//!
//! A run directory holds:
//!
//! ```text
//! config.toml                  effective scenario
//! demand/day-DD.jsonl          new requests, one per line
//! runs/day-DD/periods.jsonl    one period record per line
//! runs/day-DD/ledger.jsonl     filed plans of the day
//! reference/day-DD/...         gamma = 0 pairing (fair-coplan only)
//! timings.csv                  solve times (only when recorded)
//! metrics.csv                  per-day metrics
//! summary/*.csv                report tables
//! ```
//!
//! A comparison directory holds one run directory per mode plus a shared
//! `summary/`. `metrics.csv` and `summary/` are derived from the other
//! files only, so re-running the report reproduces them byte for byte.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{Mode, ScenarioConfig};
use crate::flight::FlightRequest;

use super::campaign::{Campaign, DayRun};
use super::metrics::{percent, step_samples, CampaignMetrics, DayMetrics, PairedDay, SolveTimeStats};
use super::period::PeriodResult;
use super::SimError;

pub const SUMMARY_DIR: &str = "summary";
pub const TDC_DISTRIBUTION: &str = "tdc_distribution.csv";
pub const FAIRNESS_IMPROVEMENT: &str = "fairness_improvement.csv";
pub const TDC_INCREASE: &str = "tdc_increase.csv";
pub const SOLVE_TIMES: &str = "solve_times.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemandRecord {
    pub day: u32,
    pub period: u32,
    pub request: FlightRequest,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SimError + '_ {
    move |source| SimError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> SimError + '_ {
    move |source| SimError::Csv {
        path: path.display().to_string(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, SimError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    Ok(BufWriter::new(fs::File::create(path).map_err(io_err(path))?))
}

fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<(), SimError> {
    let mut w = create(path)?;
    for item in items {
        serde_json::to_writer(&mut w, &item).map_err(|source| SimError::Json {
            path: path.display().to_string(),
            line: 0,
            source,
        })?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, SimError> {
    let f = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| SimError::Json {
            path: path.display().to_string(),
            line: i + 1,
            source,
        })?);
    }
    Ok(out)
}

fn day_name(day: u32) -> String {
    format!("day-{day:02}")
}

fn write_days(dir: &Path, runs: &[DayRun]) -> Result<(), SimError> {
    for run in runs {
        let day = dir.join(day_name(run.day));
        write_jsonl(&day.join("periods.jsonl"), &run.periods)?;
        let path = day.join("ledger.jsonl");
        let mut w = create(&path)?;
        run.ledger.write_jsonl(&mut w)?;
        w.flush().map_err(io_err(&path))?;
    }
    Ok(())
}

/// Period records per day found under `dir`, in day order.
pub fn read_days(dir: &Path) -> Result<Vec<Vec<PeriodResult>>, SimError> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut days: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_dir()
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("day-"))
        })
        .collect();
    days.sort();
    days.iter().map(|d| read_jsonl(&d.join("periods.jsonl"))).collect()
}

/// Writes the raw records of `campaign` into `dir`, then the derived files.
pub fn write_run_dir(dir: &Path, campaign: &Campaign, record_timings: bool) -> Result<(), SimError> {
    write_raw(dir, campaign, record_timings)?;
    write_derived_run(dir, None).map(|_| ())
}

fn write_raw(dir: &Path, campaign: &Campaign, record_timings: bool) -> Result<(), SimError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join("config.toml");
    let toml = campaign.scenario.to_toml()?;
    fs::write(&path, toml).map_err(io_err(&path))?;
    for run in &campaign.runs {
        let records = run.demand.iter().enumerate().flat_map(|(p, reqs)| {
            reqs.iter().map(move |r| DemandRecord {
                day: run.day,
                period: p as u32,
                request: r.clone(),
            })
        });
        write_jsonl(
            &dir.join("demand").join(format!("{}.jsonl", day_name(run.day))),
            records,
        )?;
    }
    write_days(&dir.join("runs"), &campaign.runs)?;
    if let Some(reference) = &campaign.reference {
        write_days(&dir.join("reference"), reference)?;
    }
    let path = dir.join("timings.csv");
    if record_timings {
        let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
        w.write_record(["day", "period", "step", "seconds"])
            .map_err(csv_err(&path))?;
        for run in &campaign.runs {
            for (p, t) in run.timings.iter().enumerate() {
                for (step, samples) in step_samples(std::slice::from_ref(t)) {
                    for s in samples {
                        w.write_record([run.day.to_string(), p.to_string(), step.to_string(), format!("{s:.6}")])
                            .map_err(csv_err(&path))?;
                    }
                }
            }
        }
        w.flush().map_err(io_err(&path))?;
    } else if path.exists() {
        fs::remove_file(&path).map_err(io_err(&path))?;
    }
    Ok(())
}

/// Everything stored in one run directory.
#[derive(Clone, Debug)]
pub struct StoredRun {
    pub scenario: ScenarioConfig,
    pub days: Vec<Vec<PeriodResult>>,
    pub reference: Option<Vec<Vec<PeriodResult>>>,
    /// `(step, seconds)` samples, when recorded.
    pub timings: Option<Vec<(String, f64)>>,
}

impl StoredRun {
    pub fn load(dir: &Path) -> Result<Self, SimError> {
        let scenario = ScenarioConfig::load(&dir.join("config.toml"))?;
        let days = read_days(&dir.join("runs"))?;
        let reference = dir.join("reference");
        let reference = if reference.is_dir() {
            Some(read_days(&reference)?)
        } else {
            None
        };
        let path = dir.join("timings.csv");
        let timings = if path.exists() {
            let mut r = csv::Reader::from_path(&path).map_err(csv_err(&path))?;
            let mut v = Vec::new();
            for rec in r.records() {
                let rec = rec.map_err(csv_err(&path))?;
                let secs: f64 = rec[3]
                    .parse()
                    .map_err(|_| SimError::Layout(format!("{}: bad seconds {:?}", path.display(), &rec[3])))?;
                v.push((rec[2].to_string(), secs));
            }
            Some(v)
        } else {
            None
        };
        Ok(Self {
            scenario,
            days,
            reference,
            timings,
        })
    }

    pub fn day_metrics(days: &[Vec<PeriodResult>]) -> Vec<DayMetrics> {
        days.iter()
            .enumerate()
            .map(|(i, p)| DayMetrics::from_periods(p.first().map_or(i as u32, |r| r.day), p))
            .collect()
    }

    pub fn metrics(&self, reference: Option<&StoredRun>) -> CampaignMetrics {
        let reference = match (&self.reference, reference) {
            (Some(r), _) => Some(Self::day_metrics(r)),
            (None, Some(r)) if self.scenario.mode == Mode::FairCoplan => Some(Self::day_metrics(&r.days)),
            _ => None,
        };
        CampaignMetrics::new(Self::day_metrics(&self.days), reference)
    }
}

fn fmt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

fn flag(v: Option<bool>) -> String {
    v.map(|b| u8::from(b).to_string()).unwrap_or_default()
}

fn write_metrics_csv(path: &Path, m: &CampaignMetrics) -> Result<(), SimError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let mut header = vec![
        "day",
        "generated",
        "served",
        "carried",
        "pending",
        "mean_tdc",
        "mean_tdc_original",
        "deconfliction_periods",
        "mean_fairness",
    ];
    if m.paired.is_some() {
        header.extend([
            "ref_mean_tdc",
            "ref_mean_fairness",
            "fairness_improved",
            "tdc_increased",
        ]);
    }
    w.write_record(&header).map_err(csv_err(path))?;
    for (i, d) in m.days.iter().enumerate() {
        let mut row = vec![
            d.day.to_string(),
            d.generated.to_string(),
            d.served.to_string(),
            d.carried.to_string(),
            d.pending.to_string(),
            fmt(d.mean_tdc),
            fmt(d.mean_tdc_original),
            d.deconfliction_periods.to_string(),
            fmt(d.mean_fairness),
        ];
        if let Some(p) = m.paired.as_ref().map(|p: &Vec<PairedDay>| &p[i]) {
            row.extend([
                fmt(p.reference.mean_tdc),
                fmt(p.reference.mean_fairness),
                flag(p.fairness_improved()),
                flag(p.tdc_increased()),
            ]);
        }
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Summary tables for a set of runs, keyed by mode.
fn write_summary(dir: &Path, runs: &[(&StoredRun, CampaignMetrics)]) -> Result<(), SimError> {
    let dir = dir.join(SUMMARY_DIR);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;

    let path = dir.join(TDC_DISTRIBUTION);
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.write_record(["mode", "gamma", "demand", "day", "mean_tdc"])
        .map_err(csv_err(&path))?;
    for (run, m) in runs {
        let s = &run.scenario;
        for d in &m.days {
            w.write_record([
                s.mode.to_string(),
                format!("{}", s.effective_gamma()),
                format!("{}", s.demand_per_hub_per_hour),
                d.day.to_string(),
                fmt(d.mean_tdc),
            ])
            .map_err(csv_err(&path))?;
        }
    }
    w.flush().map_err(io_err(&path))?;

    for (name, cols, get) in [
        (
            FAIRNESS_IMPROVEMENT,
            ["gamma", "demand", "days_with_deconfliction", "days_improved", "percent"],
            CampaignMetrics::fairness_improvement as fn(&CampaignMetrics) -> Option<(usize, usize)>,
        ),
        (
            TDC_INCREASE,
            ["gamma", "demand", "days_compared", "days_increased", "percent"],
            CampaignMetrics::tdc_increase,
        ),
    ] {
        let path = dir.join(name);
        let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
        w.write_record(cols).map_err(csv_err(&path))?;
        for (run, m) in runs {
            if let Some((num, den)) = get(m) {
                let s = &run.scenario;
                w.write_record([
                    format!("{}", s.effective_gamma()),
                    format!("{}", s.demand_per_hub_per_hour),
                    den.to_string(),
                    num.to_string(),
                    fmt(percent(num, den)),
                ])
                .map_err(csv_err(&path))?;
            }
        }
        w.flush().map_err(io_err(&path))?;
    }

    let path = dir.join(SOLVE_TIMES);
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.write_record(["mode", "step", "count", "mean_s", "std_s", "min_s", "max_s"])
        .map_err(csv_err(&path))?;
    for (run, _) in runs {
        let Some(samples) = &run.timings else { continue };
        for step in ["step1", "step2", "step3", "tfmp", "period"] {
            let v: Vec<f64> = samples.iter().filter(|(s, _)| s == step).map(|&(_, x)| x).collect();
            if let Some(st) = SolveTimeStats::from_seconds(&v) {
                w.write_record([
                    run.scenario.mode.to_string(),
                    step.to_string(),
                    st.count.to_string(),
                    format!("{:.6}", st.mean),
                    format!("{:.6}", st.std),
                    format!("{:.6}", st.min),
                    format!("{:.6}", st.max),
                ])
                .map_err(csv_err(&path))?;
            }
        }
    }
    w.flush().map_err(io_err(&path))
}

fn write_derived_run(dir: &Path, reference: Option<&StoredRun>) -> Result<CampaignMetrics, SimError> {
    let run = StoredRun::load(dir)?;
    let m = run.metrics(reference);
    write_metrics_csv(&dir.join("metrics.csv"), &m)?;
    write_summary(dir, &[(&run, m.clone())])?;
    Ok(m)
}

/// Writes a comparison directory: one run directory per mode. The
/// fair-coplan run is paired with the coplan run.
pub fn write_compare_dir(dir: &Path, campaigns: &[Campaign], record_timings: bool) -> Result<(), SimError> {
    for c in campaigns {
        write_raw(&dir.join(c.scenario.mode.as_str()), c, record_timings)?;
    }
    report(dir)
}

/// Whether `dir` is a single run directory rather than a comparison.
pub fn is_run_dir(dir: &Path) -> bool {
    dir.join("config.toml").is_file()
}

/// Recomputes `metrics.csv` and `summary/` from the stored records.
pub fn report(dir: &Path) -> Result<(), SimError> {
    if is_run_dir(dir) {
        return write_derived_run(dir, None).map(|_| ());
    }
    let mut runs = Vec::new();
    for mode in Mode::ALL {
        let sub = dir.join(mode.as_str());
        if is_run_dir(&sub) {
            runs.push((mode, sub.clone(), StoredRun::load(&sub)?));
        }
    }
    if runs.is_empty() {
        return Err(SimError::Layout(format!(
            "{} holds neither config.toml nor per-mode run directories",
            dir.display()
        )));
    }
    let coplan = runs.iter().find(|r| r.0 == Mode::Coplan).map(|r| r.2.clone());
    let mut all = Vec::new();
    for (_, sub, run) in &runs {
        let m = run.metrics(coplan.as_ref());
        write_metrics_csv(&sub.join("metrics.csv"), &m)?;
        write_summary(sub, &[(run, m.clone())])?;
        all.push((run, m));
    }
    write_summary(dir, &all)
}
