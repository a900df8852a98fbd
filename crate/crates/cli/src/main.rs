//! `homtest` — command-line harness for the homogeneity tests.
//!
//! Subcommands:
//!
//! * `calibrate` — build a conditional quantile table from a config or preset,
//!   write it to disk, and print per-count achieved-level diagnostics;
//! * `test` — run the tests on one point pattern (a CSV file or a freshly
//!   simulated draw) and print one verdict row per procedure;
//! * `power` — estimate rejection probabilities over benchmark alternative
//!   families, one CSV file per family;
//! * `rate-probe` — locate the smallest detectable spike amplitude across
//!   scales and fit its log-log slope;
//! * `plot` — render a power CSV as an SVG chart.
//!
//! Exit codes: 0 success, 1 runtime failure (I/O), 2 usage or configuration
//! error. All outputs are deterministic given config and seed: no timestamps,
//! and every random stream derives from the master seed.

mod plot;

use std::fmt;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use homtest::calibration::{default_u_grid, CalibrationConfig, Procedure, QuantileTable};
use homtest::harness::{
    calibration_preset, config_fingerprint, desk_scale_calibration, desk_scale_power,
    desk_scale_rate, level_diagnostics, power_preset, rate_preset, run_power, run_rate_probe,
    write_power_csv, write_text, HarnessError, PowerConfig, RateProbeConfig, TableStore,
    CALIBRATION_PRESET_NAMES, DEFAULT_MASTER_SEED, DESK_REPLICATIONS, POWER_PRESET_NAMES,
    RATE_PRESET_NAMES,
};
use homtest::stream::{derive_rng, tag};
use homtest::testing::{
    test_combined, test_ks, test_laplace, test_with_table, test_z, TestVerdict,
};
use homtest::{Intensity, Pattern};

#[derive(Parser)]
#[command(
    name = "homtest",
    version,
    about = "Adaptive homogeneity tests for a Poisson process on [0,1]"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a calibration table and print achieved-level diagnostics.
    Calibrate(CalibrateArgs),
    /// Test one point pattern; prints verdict CSV to standard output.
    Test(TestArgs),
    /// Estimate power over benchmark alternatives; one CSV per family.
    Power(PowerArgs),
    /// Probe the empirical separation rate over random spike alternatives.
    #[command(name = "rate-probe")]
    RateProbe(RateArgs),
    /// Render a power CSV as an SVG chart.
    Plot(PlotArgs),
}

/// Where a run's configuration comes from: a JSON file or a named preset.
#[derive(Args)]
struct ConfigSource {
    /// Path to a JSON configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Name of a built-in preset.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Scale a preset (or config) down to desk size: fewer replications and
    /// calibration samples, for quick runs with widened tolerances.
    #[arg(long)]
    desk: bool,
    /// Override the configuration's master seed.
    #[arg(long, value_name = "INT")]
    seed: Option<u64>,
}

impl ConfigSource {
    /// Resolve the configuration, given the preset lookup for its type.
    fn resolve<T, F>(&self, lookup: F, names: &[&str]) -> Result<T, CliError>
    where
        T: DeserializeOwned,
        F: Fn(&str) -> Option<T>,
    {
        match (&self.config, &self.preset) {
            (Some(path), None) => read_json(path),
            (None, Some(name)) => lookup(name).ok_or_else(|| {
                CliError::Usage(format!(
                    "unknown preset `{name}`; available: {}",
                    names.join(", ")
                ))
            }),
            (Some(_), Some(_)) => Err(CliError::Usage(
                "--config and --preset are mutually exclusive".into(),
            )),
            (None, None) => Err(CliError::Usage(
                "one of --config or --preset is required".into(),
            )),
        }
    }
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    source: ConfigSource,
    /// Write the table to this exact path instead of a fingerprint-named file
    /// in the output directory.
    #[arg(long, value_name = "PATH")]
    table: Option<PathBuf>,
    /// Fresh replications per diagnosed count for the level check.
    #[arg(long, value_name = "INT", default_value_t = DESK_REPLICATIONS)]
    replications: u64,
    /// Output directory for the table file.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Size of the worker thread pool (default: all cores).
    #[arg(long, value_name = "INT")]
    threads: Option<usize>,
}

#[derive(Args)]
struct TestArgs {
    /// Calibration table(s): one for a single adaptive test, or one
    /// model-selection and one thresholding table to also run the combined
    /// test. With no table only the classical tests run.
    #[arg(long, value_name = "PATH")]
    table: Vec<PathBuf>,
    /// Point pattern CSV (header `L,<scale>`, then one point per line).
    #[arg(long, value_name = "PATH", conflicts_with = "simulate")]
    data: Option<PathBuf>,
    /// Simulate the pattern from an intensity spec JSON instead of reading one.
    #[arg(long, value_name = "PATH")]
    simulate: Option<PathBuf>,
    /// Scale L for --simulate.
    #[arg(long, value_name = "REAL", default_value_t = 100.0)]
    scale: f64,
    /// Level for the classical tests (default: the summed level of the
    /// supplied tables, or 0.05 with none).
    #[arg(long, value_name = "REAL")]
    alpha: Option<f64>,
    /// Seed for --simulate.
    #[arg(long, value_name = "INT", default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PowerArgs {
    #[command(flatten)]
    source: ConfigSource,
    /// Override the configured replication count.
    #[arg(long, value_name = "INT")]
    replications: Option<u64>,
    /// Output directory for the per-family CSV files and cached tables.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Size of the worker thread pool (default: all cores).
    #[arg(long, value_name = "INT")]
    threads: Option<usize>,
}

#[derive(Args)]
struct RateArgs {
    #[command(flatten)]
    source: ConfigSource,
    /// Override the configured replication count per grid cell.
    #[arg(long, value_name = "INT")]
    replications: Option<u64>,
    /// Output directory for the report CSV and cached tables.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Size of the worker thread pool (default: all cores).
    #[arg(long, value_name = "INT")]
    threads: Option<usize>,
}

#[derive(Args)]
struct PlotArgs {
    /// Power CSV to render (as written by the `power` subcommand).
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    /// Output directory for the SVG (named after the input file).
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
}

#[derive(Debug)]
enum CliError {
    /// Wrong invocation or unusable configuration/input: exit code 2.
    Usage(String),
    /// Library-level failure; exit code per [`HarnessError::is_config_error`].
    Harness(HarnessError),
    /// Filesystem failure outside the library: exit code 1.
    Io { path: String, source: std::io::Error },
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(msg) => f.write_str(msg),
            Self::Harness(err) => err.fmt(f),
            Self::Io { path, source } => write!(f, "{path}: {source}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 2,
            Self::Harness(err) if err.is_config_error() => 2,
            Self::Harness(_) => 1,
            Self::Io { .. } => 1,
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(err: HarnessError) -> Self {
        Self::Harness(err)
    }
}

impl From<homtest::calibration::CalibrationError> for CliError {
    fn from(err: homtest::calibration::CalibrationError) -> Self {
        Self::Harness(err.into())
    }
}

impl From<homtest::testing::TestError> for CliError {
    fn from(err: homtest::testing::TestError) -> Self {
        Self::Harness(err.into())
    }
}

impl From<homtest::poisson::PatternError> for CliError {
    fn from(err: homtest::poisson::PatternError) -> Self {
        Self::Harness(err.into())
    }
}

impl From<homtest::intensity::IntensityError> for CliError {
    fn from(err: homtest::intensity::IntensityError) -> Self {
        Self::Harness(err.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Calibrate(args) => run_calibrate(args),
        Command::Test(args) => run_test(args),
        Command::Power(args) => run_power_cmd(args),
        Command::RateProbe(args) => run_rate_cmd(args),
        Command::Plot(args) => run_plot(args),
    }
}

/// Calibration config as written in a file: `u_grid` and `master_seed` may be
/// omitted (the full grid is unwieldy to write by hand) and are then filled
/// with the library defaults.
#[derive(serde::Deserialize)]
struct CalibrationConfigFile {
    scale_l: f64,
    alpha: f64,
    procedure: Procedure,
    n_min: u64,
    n_max: u64,
    mc_samples: u64,
    #[serde(default)]
    u_grid: Option<Vec<f64>>,
    #[serde(default)]
    master_seed: Option<u64>,
}

impl CalibrationConfigFile {
    fn into_config(self) -> CalibrationConfig {
        let max_weight = match &self.procedure {
            Procedure::ModelSelection { weights, .. } => {
                weights.iter().cloned().fold(0.0, f64::max)
            }
            Procedure::Thresholding { .. } => 0.0,
        };
        CalibrationConfig {
            scale_l: self.scale_l,
            alpha: self.alpha,
            u_grid: self
                .u_grid
                .unwrap_or_else(|| default_u_grid(self.alpha, max_weight)),
            procedure: self.procedure,
            n_min: self.n_min,
            n_max: self.n_max,
            mc_samples: self.mc_samples,
            master_seed: self.master_seed.unwrap_or(DEFAULT_MASTER_SEED),
        }
    }
}

fn run_calibrate(args: CalibrateArgs) -> Result<(), CliError> {
    configure_threads(args.threads)?;
    let mut config: CalibrationConfig = match (&args.source.config, &args.source.preset) {
        (Some(path), None) => read_json::<CalibrationConfigFile>(path)?.into_config(),
        _ => args
            .source
            .resolve(calibration_preset, &CALIBRATION_PRESET_NAMES)?,
    };
    if args.source.desk {
        desk_scale_calibration(&mut config);
    }
    if let Some(seed) = args.source.seed {
        config.master_seed = seed;
    }
    config.validate()?;

    let (table, path) = match &args.table {
        Some(path) => {
            let table = QuantileTable::calibrate(config.clone())?;
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                create_dir(parent)?;
            }
            table.save(path)?;
            (std::sync::Arc::new(table), path.clone())
        }
        None => {
            let store = TableStore::with_dir(&args.out);
            let table = store.get_or_build(&config)?;
            let path = store.table_path(&config).expect("store has a directory");
            (table, path)
        }
    };

    println!("# table={}", path.display());
    println!("# fingerprint={:016x}", config_fingerprint(&config));
    println!("n,calibrated_level,fresh_rejection_rate,replications");
    for diag in level_diagnostics(&table, args.replications) {
        println!(
            "{},{},{},{}",
            diag.n, diag.calibrated_level, diag.fresh_rejection_rate, diag.replications
        );
    }
    Ok(())
}

fn run_test(args: TestArgs) -> Result<(), CliError> {
    let pattern = match (&args.data, &args.simulate) {
        (Some(path), None) => {
            let file = fs::File::open(path).map_err(|source| CliError::Io {
                path: path.display().to_string(),
                source,
            })?;
            Pattern::from_csv(BufReader::new(file))?
        }
        (None, Some(path)) => {
            let spec: Intensity = read_json(path)?;
            spec.validate()?;
            let mut rng = derive_rng(args.seed, &[tag::SIMULATE]);
            homtest::poisson::simulate(&spec, args.scale, &mut rng)?
        }
        (None, None) => {
            return Err(CliError::Usage(
                "one of --data or --simulate is required".into(),
            ))
        }
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };

    // Sort the supplied tables by kind; reject duplicates of a kind.
    let mut ms_table: Option<QuantileTable> = None;
    let mut th_table: Option<QuantileTable> = None;
    for path in &args.table {
        let table = QuantileTable::load(path)?;
        let slot = match table.config().procedure {
            Procedure::ModelSelection { .. } => &mut ms_table,
            Procedure::Thresholding { .. } => &mut th_table,
        };
        if slot.is_some() {
            return Err(CliError::Usage(format!(
                "{}: duplicate table kind; supply at most one model-selection \
                 and one thresholding table",
                path.display()
            )));
        }
        *slot = Some(table);
    }

    let table_alpha: f64 = ms_table
        .iter()
        .chain(th_table.iter())
        .map(|t| t.config().alpha)
        .sum();
    let alpha = args.alpha.unwrap_or(if args.table.is_empty() {
        0.05
    } else {
        table_alpha
    });

    let mut verdicts: Vec<TestVerdict> = Vec::new();
    if let Some(ms) = &ms_table {
        verdicts.push(test_with_table(&pattern, ms)?);
    }
    if let Some(th) = &th_table {
        verdicts.push(test_with_table(&pattern, th)?);
    }
    if let (Some(ms), Some(th)) = (&ms_table, &th_table) {
        verdicts.push(test_combined(&pattern, ms, th)?);
    }
    verdicts.push(test_ks(&pattern, alpha)?);
    verdicts.push(test_laplace(&pattern, alpha)?);
    verdicts.push(test_z(&pattern, alpha)?);

    println!("{}", TestVerdict::CSV_HEADER);
    for verdict in &verdicts {
        println!("{}", verdict.csv_row());
    }
    Ok(())
}

fn run_power_cmd(args: PowerArgs) -> Result<(), CliError> {
    configure_threads(args.threads)?;
    let mut config: PowerConfig = args.source.resolve(power_preset, &POWER_PRESET_NAMES)?;
    if args.source.desk {
        desk_scale_power(&mut config);
    }
    if let Some(seed) = args.source.seed {
        config.master_seed = seed;
    }
    if let Some(replications) = args.replications {
        config.replications = replications;
    }
    config.validate()?;

    create_dir(&args.out)?;
    let store = TableStore::with_dir(&args.out);
    for outcome in run_power(&config, &store)? {
        let path = write_power_csv(&outcome, &args.out)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn run_rate_cmd(args: RateArgs) -> Result<(), CliError> {
    configure_threads(args.threads)?;
    let mut config: RateProbeConfig = args.source.resolve(rate_preset, &RATE_PRESET_NAMES)?;
    if args.source.desk {
        desk_scale_rate(&mut config);
    }
    if let Some(seed) = args.source.seed {
        config.master_seed = seed;
    }
    if let Some(replications) = args.replications {
        config.replications = replications;
    }
    config.validate()?;

    create_dir(&args.out)?;
    let store = TableStore::with_dir(&args.out);
    let report = run_rate_probe(&config, &store)?;
    let path = args.out.join("rate_probe.csv");
    write_text(&path, &report.csv_lines())?;
    println!("{}", path.display());
    Ok(())
}

fn run_plot(args: PlotArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.input).map_err(|source| CliError::Io {
        path: args.input.display().to_string(),
        source,
    })?;
    let parsed = plot::PowerPlot::parse(&text)
        .map_err(|detail| CliError::Usage(format!("{}: {detail}", args.input.display())))?;
    create_dir(&args.out)?;
    let stem = args
        .input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "power".into());
    let path = args.out.join(format!("{stem}.svg"));
    fs::write(&path, parsed.to_svg()).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    println!("{}", path.display());
    Ok(())
}

/// Cap the global worker pool. A second initialization in one process (only
/// possible in tests) is ignored: the pool is already running.
fn configure_threads(threads: Option<usize>) -> Result<(), CliError> {
    if let Some(count) = threads {
        if count == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(count)
            .build_global();
    }
    Ok(())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text)
        .map_err(|err| CliError::Usage(format!("{}: {err}", path.display())))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}
