//! `coplan` command line: run campaigns, compare planners, rebuild reports
//! and check the solvers against the enumeration oracle.
//!
//! The MILP backend is taken from `COPLAN_SOLVER` (`highs` or `microlp`).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use coplan::config::{ConfigError, Mode, Overrides, ScenarioConfig};
use coplan::milp::{backend_from_env, Backend, SolveLimits};
use coplan::oracle::{run_fixture, tiny_fixtures};
use coplan::sim::campaign::{reference_scenario, run_days, Campaign};
use coplan::sim::output::{report, write_compare_dir, write_run_dir};
use coplan::sim::{run_campaign, SimError};
use coplan::AirspaceGrid;

/// Name of the file written next to the outputs when a campaign aborts.
pub const FAILURE_REPORT: &str = "failure.txt";

#[derive(Debug, Parser)]
#[command(name = "coplan", version, about = "Negotiated strategic deconfliction campaigns")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a campaign in the scenario's mode and write its outputs.
    Simulate(RunArgs),
    /// Run fair-coplan, coplan and tfmp on the same demand.
    Compare(RunArgs),
    /// Rebuild metrics and summary tables of an output directory.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
    /// Check every solver against the enumeration oracle on tiny fixtures.
    OracleCheck {
        /// Print every check, not only failures.
        #[arg(long)]
        verbose: bool,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Requests per hub per hour.
    #[arg(long)]
    pub demand: Option<f64>,
    #[arg(long)]
    pub days: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Per-solve limit in seconds.
    #[arg(long)]
    pub time_limit: Option<f64>,
    /// Also write solve times, which makes outputs differ between runs.
    #[arg(long)]
    pub record_timings: bool,
}

impl RunArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            gamma: self.gamma,
            alpha: self.alpha,
            demand: self.demand,
            seed: self.seed,
            mode: self.mode,
            days: self.days,
            time_limit: self.time_limit,
        }
    }

    /// Scenario file with the overrides applied and validated.
    pub fn scenario(&self) -> Result<ScenarioConfig, CliError> {
        Ok(ScenarioConfig::load(&self.config)?.with_overrides(&self.overrides())?)
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("solver backend: {0}")]
    Backend(String),
    #[error("{error}\nfailure report: {report}")]
    Campaign { error: SimError, report: String },
    #[error("{0}")]
    Output(SimError),
    #[error("oracle check: {failed} of {total} checks failed")]
    Oracle { failed: usize, total: usize },
}

impl CliError {
    /// 2 for unusable input, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Backend(_) => 2,
            _ => 1,
        }
    }
}

pub fn run(cli: Cli) -> ExitCode {
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => simulate(&args),
        Command::Compare(args) => compare(&args),
        Command::Report { out } => report(&out).map_err(CliError::Output),
        Command::OracleCheck { verbose } => oracle_check(verbose).map(|(passed, total)| {
            println!("oracle check: {passed}/{total} checks passed");
        }),
    }
}

fn backend() -> Result<Box<dyn Backend>, CliError> {
    backend_from_env().map_err(CliError::Backend)
}

/// Records a failed campaign in `out` and wraps the error.
fn campaign_failed(out: &Path, error: SimError) -> CliError {
    let path = out.join(FAILURE_REPORT);
    let written = fs::create_dir_all(out).and_then(|_| fs::write(&path, format!("{error}\n{error:#?}\n")));
    let report = match written {
        Ok(()) => path.display().to_string(),
        Err(e) => format!("could not write {}: {e}", path.display()),
    };
    CliError::Campaign { error, report }
}

pub fn simulate(args: &RunArgs) -> Result<(), CliError> {
    let scenario = args.scenario()?;
    let b = backend()?;
    let campaign = run_campaign(b.as_ref(), &scenario).map_err(|e| campaign_failed(&args.out, e))?;
    write_run_dir(&args.out, &campaign, args.record_timings).map_err(CliError::Output)?;
    if let Some((n, d)) = campaign.metrics.fairness_improvement() {
        println!("fairness improved on {n} of {d} days with deconfliction");
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

pub fn compare(args: &RunArgs) -> Result<(), CliError> {
    let base = args.scenario()?;
    let grid = AirspaceGrid::build(base.grid.clone()).map_err(|e| CliError::Config(e.into()))?;
    let b = backend()?;
    let mut campaigns = Vec::new();
    // coplan doubles as the gamma = 0 pairing of fair-coplan
    for mode in [Mode::FairCoplan, Mode::Coplan, Mode::Tfmp] {
        let scenario = match mode {
            Mode::Coplan => reference_scenario(&base),
            _ => ScenarioConfig { mode, ..base.clone() },
        };
        let runs = run_days(b.as_ref(), &grid, &scenario, false).map_err(|e| campaign_failed(&args.out, e))?;
        campaigns.push(Campaign::from_runs(scenario, runs, None));
    }
    write_compare_dir(&args.out, &campaigns, args.record_timings).map_err(CliError::Output)?;
    println!("wrote {}", args.out.display());
    Ok(())
}

/// Runs every fixture check; returns `(passed, total)` or the failure count.
pub fn oracle_check(verbose: bool) -> Result<(usize, usize), CliError> {
    let b = backend()?;
    let limits = SolveLimits::default();
    let (mut passed, mut total) = (0, 0);
    for inst in tiny_fixtures() {
        let outcomes = match run_fixture(b.as_ref(), &inst, &limits) {
            Ok(o) => o,
            Err(e) => {
                println!("FAIL {}: {e}", inst.name);
                total += 1;
                continue;
            }
        };
        for o in outcomes {
            total += 1;
            if o.pass {
                passed += 1;
            }
            if verbose || !o.pass {
                println!(
                    "{} {} {}: {}",
                    if o.pass { "PASS" } else { "FAIL" },
                    o.fixture,
                    o.check,
                    o.detail
                );
            }
        }
    }
    if passed == total {
        Ok((passed, total))
    } else {
        Err(CliError::Oracle {
            failed: total - passed,
            total,
        })
    }
}
