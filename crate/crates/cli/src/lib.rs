//! `greencell run|compare|sweep`.
//!
//! Exit codes: 0 success, 1 runtime error, 2 validation error, 3 pairing
//! violation. Progress goes to standard error; results go to files named
//! after `--out`.

// `!(x > y)` is used on purpose so NaN fails range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;
use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use greencell::campaign::{
    check_pairing, run_campaign, run_paired, run_snapshot, CampaignConfig, CampaignError,
};
use greencell::metrics::{emit_report, prefixed, tx_power_cdf, MetricsError, PopulationFilter};
use greencell::powerctl::SolverOptions;
use greencell::scenario::{load_scenario_file, Combining, Point, Scenario, ScenarioError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_PAIRING: i32 = 3;

/// Default filter radius around the green antenna, meters.
pub const DEFAULT_FILTER_RADIUS_M: f64 = 300.0;

#[derive(Debug, Parser)]
#[command(
    name = "greencell",
    version,
    about = "Uplink power-control simulator for green-antenna networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a Monte Carlo campaign over one scenario.
    Run(RunArgs),
    /// Paired baseline vs green-antenna campaign.
    Compare(RunArgs),
    /// One summary row per value of a sweep axis.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CombiningArg {
    Mrc,
    Sel,
    Egc,
}

impl From<CombiningArg> for Combining {
    fn from(c: CombiningArg) -> Self {
        match c {
            CombiningArg::Mrc => Combining::Mrc,
            CombiningArg::Sel => Combining::Selection,
            CombiningArg::Egc => Combining::Egc,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub green_scenario: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub snapshots: usize,
    /// Defaults to the scenario's `radio.combining`.
    #[arg(long, value_enum)]
    pub combining: Option<CombiningArg>,
    /// `x,y` in meters; defaults to the first green antenna.
    #[arg(long, value_parser = parse_point)]
    pub filter_center: Option<Point>,
    #[arg(long)]
    pub filter_radius: Option<f64>,
    #[arg(long)]
    pub indoor_only: bool,
    #[arg(long, default_value_t = 4.0, allow_negative_numbers = true)]
    pub target_dbm: f64,
    #[arg(long, default_value = "greencell")]
    pub out: PathBuf,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Also write the gain tables of snapshot 0 to `<out>_gains.csv`.
    #[arg(long)]
    pub dump_gains: bool,
    /// Also write `<out>_cdf.svg`.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepAxis {
    Seed,
    GreenCount,
    Combining,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::Seed => "seed",
            SweepAxis::GreenCount => "green_count",
            SweepAxis::Combining => "combining",
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum)]
    pub axis: SweepAxis,
    /// Comma-separated axis values. Defaults: five seeds from `--seed`,
    /// every green count from 0, or all combining modes.
    #[arg(long, value_delimiter = ',')]
    pub values: Vec<String>,
}

fn parse_point(s: &str) -> Result<Point, String> {
    let (x, y) = s
        .split_once(',')
        .ok_or_else(|| format!("expected `x,y`, got `{s}`"))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|e| format!("bad coordinate `{v}`: {e}"))
    };
    Ok(Point::new(parse(x)?, parse(y)?))
}

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn validation(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_RUNTIME,
            message: message.into(),
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        CliError::validation(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::runtime(e.to_string())
    }
}

impl From<CampaignError> for CliError {
    fn from(e: CampaignError) -> Self {
        match e {
            CampaignError::Scenario(e) => e.into(),
            CampaignError::Metrics(e) => e.into(),
            CampaignError::Pairing(_) => CliError {
                code: EXIT_PAIRING,
                message: e.to_string(),
            },
        }
    }
}

fn load(path: &Path) -> Result<Scenario, CliError> {
    load_scenario_file(path).map_err(|e| match e {
        ScenarioError::Io { .. } => CliError::validation(e.to_string()),
        other => CliError::validation(format!("{}: {other}", path.display())),
    })
}

fn filter_for(
    args: &RunArgs,
    greens_from: &Scenario,
) -> Result<Option<PopulationFilter>, CliError> {
    if args.filter_center.is_none() && args.filter_radius.is_none() {
        return Ok(args.indoor_only.then_some(PopulationFilter {
            center: Point::new(0.0, 0.0),
            radius_m: f64::INFINITY,
            indoor_only: true,
        }));
    }
    let center = match args.filter_center {
        Some(c) => c,
        None => greens_from
            .greens
            .first()
            .map(|g| g.position)
            .ok_or_else(|| {
                CliError::validation(
                    "--filter-radius needs --filter-center when there is no green antenna",
                )
            })?,
    };
    let radius_m = args.filter_radius.unwrap_or(DEFAULT_FILTER_RADIUS_M);
    if !(radius_m >= 0.0) {
        return Err(CliError::validation(format!(
            "filter radius {radius_m} must be non-negative"
        )));
    }
    Ok(Some(PopulationFilter {
        center,
        radius_m,
        indoor_only: args.indoor_only,
    }))
}

fn config_for(
    args: &RunArgs,
    scenario: &Scenario,
    greens_from: &Scenario,
) -> Result<CampaignConfig, CliError> {
    if args.snapshots == 0 {
        return Err(CliError::validation("--snapshots must be at least 1"));
    }
    Ok(CampaignConfig {
        seed: args.seed,
        snapshots: args.snapshots,
        combining: args
            .combining
            .map(Into::into)
            .unwrap_or(scenario.radio.combining),
        filter: filter_for(args, greens_from)?,
        target_dbm: args.target_dbm,
        solver: SolverOptions::default(),
    })
}

fn dump_gains(scenario: &Scenario, cfg: &CampaignConfig, out: &Path) -> Result<(), CliError> {
    let seed = greencell::seed::snapshot_seed(cfg.seed, 0);
    let snap = run_snapshot(scenario, seed, cfg.combining, &cfg.solver)?;
    let path = prefixed(out, "_gains.csv");
    let mut buf = Vec::new();
    snap.gains
        .write_csv(&mut buf)
        .and_then(|_| fs::write(&path, buf))
        .map_err(|e| CliError::runtime(format!("failed to write {}: {e}", path.display())))
}

pub fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let scenario = load(&args.scenario)?;
    let cfg = config_for(args, &scenario, &scenario)?;
    eprintln!(
        "greencell: {} snapshot(s) of {} ({})",
        cfg.snapshots,
        args.scenario.display(),
        cfg.combining.label()
    );
    let outcome = run_campaign(&scenario, &cfg)?;
    let cdf = tx_power_cdf(&outcome.samples)?;
    let written = emit_report(&outcome.summary, &[("run", &cdf)], &args.out, args.svg)?;
    if args.dump_gains {
        dump_gains(&scenario, &cfg, &args.out)?;
    }
    for p in written {
        eprintln!("greencell: wrote {}", p.display());
    }
    Ok(())
}

pub fn cmd_compare(args: &RunArgs) -> Result<(), CliError> {
    let green_path = args
        .green_scenario
        .as_ref()
        .ok_or_else(|| CliError::validation("compare needs --green-scenario"))?;
    let baseline = load(&args.scenario)?;
    let green = load(green_path)?;
    check_pairing(&baseline, &green)?;
    let cfg = config_for(args, &baseline, &green)?;
    eprintln!(
        "greencell: {} paired snapshot(s), {} vs {} ({})",
        cfg.snapshots,
        args.scenario.display(),
        green_path.display(),
        cfg.combining.label()
    );
    let outcome = run_paired(&baseline, &green, &cfg)?;
    let report = &outcome.report;
    let written = emit_report(
        report,
        &[
            ("baseline", &report.cdf_baseline),
            ("green", &report.cdf_green),
        ],
        &args.out,
        args.svg,
    )?;
    if args.dump_gains {
        dump_gains(&green, &cfg, &args.out)?;
    }
    eprintln!(
        "greencell: mean delta {:.2} dB, median delta {:.2} dB, below {} dBm: {:.1}% -> {:.1}%",
        report.mean_delta_db,
        report.median_delta_db,
        report.target_dbm,
        100.0 * report.frac_below_target.baseline,
        100.0 * report.frac_below_target.green
    );
    for p in written {
        eprintln!("greencell: wrote {}", p.display());
    }
    Ok(())
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let run = &args.run;
    let base = load(&args.scenario_for_axis())?;
    let mut rows = String::from(
        "axis,value,snapshots,samples,mean_tx_dbm,median_tx_dbm,frac_below_target,outage_fraction,unconverged_snapshots\n",
    );
    let values: Vec<String> = if args.values.is_empty() {
        match args.axis {
            SweepAxis::Seed => (0..5).map(|k| (run.seed + k).to_string()).collect(),
            SweepAxis::GreenCount => (0..=base.greens.len()).map(|k| k.to_string()).collect(),
            SweepAxis::Combining => ["mrc", "sel", "egc"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    } else {
        args.values.iter().map(|v| v.trim().to_string()).collect()
    };
    let base_cfg = config_for(run, &base, &base)?;
    eprintln!(
        "greencell: sweeping {} over {} value(s)",
        args.axis,
        values.len()
    );
    for value in &values {
        let mut cfg = base_cfg;
        let mut scenario = base.clone();
        match args.axis {
            SweepAxis::Seed => {
                cfg.seed = value
                    .parse()
                    .map_err(|e| CliError::validation(format!("bad seed `{value}`: {e}")))?;
            }
            SweepAxis::GreenCount => {
                let k: usize = value
                    .parse()
                    .map_err(|e| CliError::validation(format!("bad green count `{value}`: {e}")))?;
                if k > scenario.greens.len() {
                    return Err(CliError::validation(format!(
                        "green count {k} exceeds the {} green antenna(s) in the scenario",
                        scenario.greens.len()
                    )));
                }
                scenario.greens.truncate(k);
            }
            SweepAxis::Combining => {
                cfg.combining = value.parse().map_err(CliError::validation)?;
            }
        }
        let outcome = run_campaign(&scenario, &cfg)?;
        let s = &outcome.summary;
        let _ = writeln!(
            rows,
            "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{}",
            args.axis,
            value,
            s.snapshots,
            s.samples,
            s.mean_dbm,
            s.median_dbm,
            s.frac_below_target,
            s.outage_fraction,
            s.unconverged_snapshots
        );
    }
    let path = prefixed(&run.out, "_sweep.csv");
    fs::write(&path, rows)
        .map_err(|e| CliError::runtime(format!("failed to write {}: {e}", path.display())))?;
    eprintln!("greencell: wrote {}", path.display());
    Ok(())
}

impl SweepArgs {
    /// Green-count sweeps draw their antennas from `--green-scenario` when given.
    fn scenario_for_axis(&self) -> PathBuf {
        match (self.axis, &self.run.green_scenario) {
            (SweepAxis::GreenCount, Some(p)) => p.clone(),
            _ => self.run.scenario.clone(),
        }
    }
}

fn jobs(cmd: &Command) -> Option<usize> {
    match cmd {
        Command::Run(a) | Command::Compare(a) => a.jobs,
        Command::Sweep(s) => s.run.jobs,
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs(&cli.command) {
        if n == 0 {
            return Err(CliError::validation("--jobs must be at least 1"));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::runtime(format!("failed to start worker pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Sweep(s) => cmd_sweep(s),
    })
}

/// Parses `args` (program name first) and runs the command; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_VALIDATION
            } else {
                EXIT_OK
            };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("greencell: error: {}", e.message);
            e.code
        }
    }
}
