//! Command-line front end.
//!
//! Exit codes: 0 success, 1 output error, 2 bad arguments, 3 invalid
//! scenario, 4 a protocol round failed.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::emissions::SpeedGrid;
use crate::harness::{
    self, write_accuracy_csv, BaselineComparison, HarnessError, ScenarioConfig, ScenarioReport,
};
use crate::metrics::write_curves_csv;

pub const EXIT_OUTPUT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_ROUND: i32 = 4;

/// Environment variable overriding the default output directory.
pub const OUT_ENV: &str = "MPC_CSAS_OUT";

pub const CASE1: &str = include_str!("../configs/case1.toml");
pub const CASE2: &str = include_str!("../configs/case2.toml");
pub const CASE3: &str = include_str!("../configs/case3.toml");

/// Grid sizes swept by `reproduce-paper`.
pub const DEFAULT_SWEEP: [usize; 10] = [10, 20, 30, 40, 50, 60, 70, 80, 90, 100];

#[derive(Debug, Parser)]
#[command(
    name = "mpc-csas",
    version,
    about = "Privacy-preserving consensus speed advisory simulator"
)]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Scenario file (TOML).
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long, value_name = "DIR", env = OUT_ENV, default_value = "out")]
    pub out: PathBuf,
    /// Override the scenario seed.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario and write curves, error curves and a summary.
    Run {
        #[command(flatten)]
        common: Common,
        /// Also run the iterative baseline on the round-0 fleet.
        #[arg(long)]
        baseline: bool,
    },
    /// Accuracy of the round-0 recommendation for several grid sizes.
    SweepM {
        #[command(flatten)]
        common: Common,
        /// Grid sizes, e.g. `10,20,30` or `10,20,...,100`.
        #[arg(long, value_name = "LIST", value_parser = parse_m_list)]
        m: GridSizes,
    },
    /// One protocol round against the iterative baseline.
    CompareBaseline {
        #[command(flatten)]
        common: Common,
    },
    /// Run the three bundled experiment scenarios and the baseline contrast.
    ReproducePaper {
        /// Output directory.
        #[arg(long, value_name = "DIR", env = OUT_ENV, default_value = "out")]
        out: PathBuf,
        /// Override the bundled seeds.
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
    },
}

/// Parsed `--m` value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridSizes(pub Vec<usize>);

/// Comma-separated list; `a,b,...,c` expands to the arithmetic progression
/// from `a` with step `b - a` up to `c`.
pub fn parse_m_list(text: &str) -> Result<GridSizes, String> {
    let tokens: Vec<&str> = text.split(',').map(str::trim).collect();
    let mut out: Vec<usize> = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if tokens[i] == "..." {
            let (Some(&b), Some(a)) = (out.last(), out.len().checked_sub(2).map(|k| out[k])) else {
                return Err("`...` needs two values before it".into());
            };
            let end: usize = tokens
                .get(i + 1)
                .ok_or("`...` needs an end value")?
                .parse()
                .map_err(|e| format!("bad end value: {e}"))?;
            if b <= a {
                return Err("`...` needs an increasing progression".into());
            }
            let mut next = b + (b - a);
            while next <= end {
                out.push(next);
                next += b - a;
            }
            if out.last() != Some(&end) {
                return Err(format!("{end} is not on the progression"));
            }
            i += 2;
            continue;
        }
        out.push(
            tokens[i]
                .parse()
                .map_err(|e| format!("bad grid size `{}`: {e}", tokens[i]))?,
        );
        i += 1;
    }
    if out.is_empty() {
        return Err("empty list".into());
    }
    Ok(GridSizes(out))
}

#[derive(Debug)]
enum CliError {
    Config(HarnessError),
    Round(String),
    Output(String),
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::RoundFailed { .. } => CliError::Round(e.to_string()),
            other => CliError::Config(other),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Output(format!("{}: {e}", path.display()))
}

/// Parses arguments and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();

    match execute(cli.command) {
        Ok(()) => 0,
        Err(CliError::Config(e)) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
        Err(CliError::Round(msg)) => {
            eprintln!("error: {msg}");
            EXIT_ROUND
        }
        Err(CliError::Output(msg)) => {
            eprintln!("error: cannot write output: {msg}");
            EXIT_OUTPUT
        }
    }
}

fn load(common: &Common) -> Result<ScenarioConfig, CliError> {
    let mut config = ScenarioConfig::from_path(&common.config).map_err(|e| match e {
        HarnessError::Io(io) => HarnessError::Config(format!("{}: {io}", common.config.display())),
        other => other,
    })?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn bundled(text: &str, seed: Option<u64>) -> Result<ScenarioConfig, CliError> {
    let mut config = ScenarioConfig::from_toml_str(text)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    Ok(config)
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { common, baseline } => {
            let mut config = load(&common)?;
            if baseline && config.baseline.is_none() {
                config.baseline = Some(Default::default());
            }
            run_to(&config, &common.out)
        }
        Command::SweepM { common, m } => {
            let config = load(&common)?;
            sweep_to(&config, &m.0, &common.out)
        }
        Command::CompareBaseline { common } => {
            let config = load(&common)?;
            let cmp = harness::compare_baseline(&config)?;
            baseline_to(&cmp, &common.out)
        }
        Command::ReproducePaper { out, seed } => {
            let case1 = bundled(CASE1, seed)?;
            run_to(&case1, &out.join("case1"))?;
            run_to(&bundled(CASE2, seed)?, &out.join("case2"))?;
            sweep_to(&bundled(CASE3, seed)?, &DEFAULT_SWEEP, &out.join("case3"))?;
            let cmp = harness::compare_baseline(&case1)?;
            baseline_to(&cmp, &out.join("baseline"))
        }
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn run_to(config: &ScenarioConfig, dir: &Path) -> Result<(), CliError> {
    let report = harness::run_scenario(config)?;
    create_dir(dir)?;
    let grid = config.grid()?;
    write_run_outputs(&report, &grid, dir)?;
    for r in &report.rounds {
        if let Some(s) = &r.outcome {
            println!(
                "round {}: recommend {:.2} km/h (grid index {}), accuracy {:.6}",
                r.round, s.recommended_speed, s.recommended_index, s.accuracy
            );
        }
    }
    if let Some(failure) = report.failed_rounds().next() {
        return Err(CliError::Round(format!(
            "round {} failed: {}",
            failure.round,
            failure.failure.as_deref().unwrap_or_default()
        )));
    }
    Ok(())
}

/// Files: `aggregate_curve.csv`, `local_error_round<k>.csv`, `report.json`,
/// `summary.json` and, with a baseline, `baseline_trace.csv`.
fn write_run_outputs(
    report: &ScenarioReport,
    grid: &SpeedGrid,
    dir: &Path,
) -> Result<(), CliError> {
    let path = dir.join("aggregate_curve.csv");
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| io_err(&path, e);
    w.write_record([
        "round",
        "speed_kmh",
        "base_station_units",
        "base_station_g_per_km",
        "true_total_g_per_km",
        "deviation_g_per_km",
    ])
    .map_err(csv_err)?;
    for r in &report.rounds {
        let Some(s) = &r.outcome else { continue };
        for (j, &speed) in grid.speeds().iter().enumerate() {
            let v = s.base_curve[j];
            w.write_record([
                r.round.to_string(),
                speed.to_string(),
                v.raw().to_string(),
                v.to_real().to_string(),
                s.true_total[j].to_string(),
                s.privacy.base_deviation[j].to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| io_err(&path, e))?;
    write_file(&path, &bytes)?;

    for r in &report.rounds {
        let Some(s) = &r.outcome else { continue };
        let columns: Vec<(String, Vec<f64>)> = s
            .privacy
            .local_errors
            .iter()
            .filter(|(id, _)| **id != crate::VehicleId::DUMMY)
            .map(|(id, e)| (format!("vehicle_{id}_g_per_km"), e.clone()))
            .collect();
        let path = dir.join(format!("local_error_round{}.csv", r.round));
        let mut buf = Vec::new();
        write_curves_csv(grid, &columns, &mut buf).map_err(|e| io_err(&path, e))?;
        write_file(&path, &buf)?;
    }

    write_file(&dir.join("report.json"), report.to_json().as_bytes())?;
    let summary = serde_json::json!({
        "name": report.name,
        "seed": report.seed,
        "masking": report.masking,
        "rounds": report.rounds.iter().map(|r| serde_json::json!({
            "round": r.round,
            "active": r.active,
            "dummy_for": r.dummy_for,
            "recommended_speed_kmh": r.outcome.as_ref().map(|s| s.recommended_speed),
            "recommended_index": r.outcome.as_ref().map(|s| s.recommended_index),
            "true_grid_argmin": r.outcome.as_ref().map(|s| s.true_grid_argmin),
            "oracle_speed_kmh": r.outcome.as_ref().map(|s| s.oracle.s_star),
            "accuracy": r.outcome.as_ref().map(|s| s.accuracy),
            "v2v_bytes": r.outcome.as_ref().map(|s| s.traffic.v2v_bytes),
            "v2b_bytes": r.outcome.as_ref().map(|s| s.traffic.v2b_bytes),
            "messages": r.outcome.as_ref().map(|s| s.traffic.messages),
            "failure": r.failure,
        })).collect::<Vec<_>>(),
        "baseline": report.baseline,
    });
    let text = serde_json::to_string_pretty(&summary).expect("summary serialises");
    write_file(&dir.join("summary.json"), text.as_bytes())?;
    if let Some(cmp) = &report.baseline {
        write_baseline_trace(cmp, dir)?;
    }
    Ok(())
}

fn write_baseline_trace(cmp: &BaselineComparison, dir: &Path) -> Result<(), CliError> {
    let path = dir.join("baseline_trace.csv");
    let mut buf = Vec::new();
    cmp.outcome
        .write_trace_csv(&cmp.fleet, &mut buf)
        .map_err(|e| io_err(&path, e))?;
    write_file(&path, &buf)
}

fn sweep_to(config: &ScenarioConfig, m: &[usize], dir: &Path) -> Result<(), CliError> {
    let rows = harness::sweep_m(config, m)?;
    create_dir(dir)?;
    let path = dir.join("accuracy.csv");
    let mut buf = Vec::new();
    write_accuracy_csv(&rows, &mut buf).map_err(|e| io_err(&path, e))?;
    write_file(&path, &buf)?;
    for r in &rows {
        println!(
            "M={:>4}: recommend {:.2} km/h, accuracy {:.6}",
            r.m, r.recommended_speed, r.accuracy
        );
    }
    Ok(())
}

fn baseline_to(cmp: &BaselineComparison, dir: &Path) -> Result<(), CliError> {
    create_dir(dir)?;
    write_baseline_trace(cmp, dir)?;
    let text = serde_json::to_string_pretty(cmp).expect("comparison serialises");
    write_file(&dir.join("baseline_summary.json"), text.as_bytes())?;
    println!(
        "protocol: 1 round -> {:.2} km/h; baseline: {} iterations -> {:.2} km/h (converged: {}); gap {:.3} km/h",
        cmp.protocol_speed, cmp.dp_iterations, cmp.dp_speed, cmp.dp_converged, cmp.gap_kmh
    );
    Ok(())
}
