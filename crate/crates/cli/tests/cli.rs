use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command as Process;

use clap::Parser;
use coplan::config::{desk_scenario, full_scenario, Mode, ScenarioConfig};
use coplan_cli::{execute, Cli, CliError};

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

/// A one-day desk scenario with a few periods, written to `dir`.
fn short_config(dir: &Path) -> PathBuf {
    let mut s = desk_scenario();
    s.days = 1;
    s.periods_per_day = 4;
    let path = dir.join("short.toml");
    fs::write(&path, s.to_toml().unwrap()).unwrap();
    path
}

fn cli(args: &[&str]) -> Cli {
    Cli::try_parse_from(std::iter::once("coplan").chain(args.iter().copied())).unwrap()
}

fn read(path: &Path) -> Vec<u8> {
    fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn shipped_configs_match_the_presets() {
    assert_eq!(
        ScenarioConfig::load(&repo_config("desk.toml")).unwrap(),
        desk_scenario()
    );
    assert_eq!(
        ScenarioConfig::load(&repo_config("full.toml")).unwrap(),
        full_scenario()
    );
}

#[test]
fn simulate_records_overrides_and_report_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let config = short_config(tmp.path());
    let out = tmp.path().join("run");
    let (c, o) = (config.to_str().unwrap(), out.to_str().unwrap());
    execute(cli(&[
        "simulate", "--config", c, "--out", o, "--gamma", "0.5", "--seed", "7",
    ]))
    .unwrap();

    let recorded = ScenarioConfig::load(&out.join("config.toml")).unwrap();
    assert_eq!(
        (recorded.gamma, recorded.seed, recorded.mode),
        (0.5, 7, Mode::FairCoplan)
    );
    for f in [
        "demand/day-00.jsonl",
        "runs/day-00/periods.jsonl",
        "runs/day-00/ledger.jsonl",
        "reference/day-00/periods.jsonl",
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }
    assert!(!out.join("timings.csv").exists());

    let derived = [
        "metrics.csv",
        "summary/tdc_distribution.csv",
        "summary/fairness_improvement.csv",
        "summary/tdc_increase.csv",
        "summary/solve_times.csv",
    ];
    let before: Vec<Vec<u8>> = derived.iter().map(|f| read(&out.join(f))).collect();
    for f in derived {
        fs::remove_file(out.join(f)).unwrap();
    }
    execute(cli(&["report", "--out", o])).unwrap();
    let after: Vec<Vec<u8>> = derived.iter().map(|f| read(&out.join(f))).collect();
    assert_eq!(before, after);
}

#[test]
fn compare_shares_demand_across_modes() {
    let tmp = tempfile::tempdir().unwrap();
    let config = short_config(tmp.path());
    let out = tmp.path().join("cmp");
    execute(cli(&[
        "compare",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--days",
        "1",
        "--record-timings",
    ]))
    .unwrap();
    let demand: Vec<Vec<u8>> = Mode::ALL
        .iter()
        .map(|m| read(&out.join(m.as_str()).join("demand/day-00.jsonl")))
        .collect();
    assert!(!demand[0].is_empty());
    assert!(demand.iter().all(|d| *d == demand[0]));
    let dist = String::from_utf8(read(&out.join("summary/tdc_distribution.csv"))).unwrap();
    for m in Mode::ALL {
        assert!(dist.lines().any(|l| l.starts_with(m.as_str())), "{m}");
    }
    let times = String::from_utf8(read(&out.join("summary/solve_times.csv"))).unwrap();
    assert!(times.lines().any(|l| l.starts_with("tfmp,tfmp,")));
    let fair = String::from_utf8(read(&out.join("summary/fairness_improvement.csv"))).unwrap();
    assert_eq!(fair.lines().count(), 2);
}

#[test]
fn bad_input_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("none.toml");
    let err = execute(cli(&["simulate", "--config", missing.to_str().unwrap(), "--out", "x"])).unwrap_err();
    assert!(matches!(err, CliError::Config(_)));
    assert_eq!(err.exit_code(), 2);

    let config = short_config(tmp.path());
    let err = execute(cli(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        "x",
        "--alpha",
        "1.5",
    ]))
    .unwrap_err();
    assert_eq!(err.exit_code(), 2);

    let empty = tmp.path().join("empty");
    fs::create_dir_all(&empty).unwrap();
    assert!(execute(cli(&["report", "--out", empty.to_str().unwrap()])).is_err());
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_coplan");
    let status = Process::new(bin)
        .args(["simulate", "--config", "/nonexistent.toml", "--out", "/tmp/x"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    let status = Process::new(bin).arg("frobnicate").status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn oracle_check_passes_on_shipped_fixtures() {
    let out = Process::new(env!("CARGO_BIN_EXE_coplan"))
        .arg("oracle-check")
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{text}");
    let last = text.lines().last().unwrap();
    let (passed, total) = last
        .trim_start_matches("oracle check: ")
        .trim_end_matches(" checks passed")
        .split_once('/')
        .unwrap();
    assert_eq!(passed, total);
}
