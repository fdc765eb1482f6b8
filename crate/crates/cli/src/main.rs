//! Command-line surface for the fleet accounting engine.
//!
//! Subcommands: `validate` (check a dataset directory), `compute` (serialize
//! the full result tree), `report` (render presentation tables).
//!
//! Exit codes: 0 success, 2 validation or usage problems, 3 I/O failures.
//! The dataset directory resolves from `--data`, then `BEV_DATA_DIR`, then
//! the `data` key of an optional `key = value` config file; flags always
//! win over config values.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use bevcharge::analytics::{build_result_tree, AnalyticsError, FleetBasis, ScalingTarget};
use bevcharge::dataset::{load_dataset, validate_only, LoadError, ValidationReport};
use bevcharge::report::{
    render_compute_csv, render_compute_json, render_report, write_atomic, RenderedReport,
    ReportError, ReportFormat, ReportLevel, ReportOptions, ReportSpec,
};
use bevcharge::Dataset;

#[derive(Parser)]
#[command(
    name = "bevcharge",
    version,
    about = "Bottom-up electricity and emissions accounting for BEV fleets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a dataset directory and list every finding
    Validate(ValidateArgs),
    /// Evaluate the accounting and serialize the full result tree
    Compute(ComputeArgs),
    /// Render presentation tables (totals, emissions, contribution, ...)
    Report(ReportArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Dataset directory (default: $BEV_DATA_DIR, then config key `data`)
    #[arg(long)]
    data: Option<PathBuf>,
    /// Config file with `key = value` defaults; flags win
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct ComputeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Years to evaluate: `2021`, `2020,2022`, or `2020..2022` (inclusive);
    /// default: every year in the dataset
    #[arg(long)]
    years: Option<String>,
    /// Output file; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: json or csv
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Years to report; default: every year in the dataset
    #[arg(long)]
    years: Option<String>,
    /// Deepest detail level: national, zone, model, or version
    #[arg(long)]
    level: Option<String>,
    /// Output format: md or csv
    #[arg(long)]
    format: Option<String>,
    /// Markdown: output file (stdout when omitted). CSV: required path
    /// prefix; writes PREFIX-<table>.csv per table
    #[arg(long)]
    out: Option<PathBuf>,
    /// Include year-over-year growth tables
    #[arg(long)]
    growth: bool,
    /// Include per-vehicle intensity tables
    #[arg(long)]
    intensity: bool,
    /// Include population-scaled totals: stock or all-sales
    #[arg(long)]
    scale: Option<String>,
    /// Attach a symmetric band of this half-width fraction to national rows
    #[arg(long)]
    uncertainty: Option<String>,
    /// Intensity denominator: cumulative or single-year
    #[arg(long)]
    fleet_basis: Option<String>,
}

/// A command failed; the variant fixes the exit code.
enum Failure {
    /// Bad flags, config, or request shape: exit 2.
    Usage(String),
    /// The dataset or derivation rejected the input: exit 2.
    Validation(String),
    /// Reading or writing failed: exit 3.
    Io(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) | Failure::Validation(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Validation(m) | Failure::Io(m) => m,
        }
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::Io(io) => Failure::Io(format!("error: {io}")),
            LoadError::Invalid(report) => Failure::Validation(format_report(&report)),
        }
    }
}

impl From<AnalyticsError> for Failure {
    fn from(e: AnalyticsError) -> Self {
        Failure::Validation(format!("error: {}: {e}", e.code()))
    }
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::EmptyYears => Failure::Usage(format!("error: {e}")),
            ReportError::Analytics(inner) => inner.into(),
            ReportError::Write { .. } => Failure::Io(format!("error: {e}")),
            ReportError::Json(_) => Failure::Io(format!("error: {e}")),
        }
    }
}

fn format_report(report: &ValidationReport) -> String {
    let mut out = String::new();
    for d in &report.errors {
        out.push_str(&format!("error: {d}\n"));
    }
    for d in &report.warnings {
        out.push_str(&format!("warning: {d}\n"));
    }
    out.push_str(&format!(
        "{} errors, {} warnings",
        report.errors.len(),
        report.warnings.len()
    ));
    out
}

/// `key = value` pairs from an optional config file. `#` starts a comment.
struct Config(BTreeMap<String, String>);

impl Config {
    fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Config(BTreeMap::new()));
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))
            .map_err(|e| Failure::Io(format!("error: {e:#}")))?;
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Failure::Usage(format!(
                    "error: {}:{}: expected `key = value`, got {raw:?}",
                    path.display(),
                    i + 1
                )));
            };
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Config(map))
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn get_bool(&self, key: &str) -> Result<bool, Failure> {
        match self.get(key) {
            None => Ok(false),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(other) => Err(Failure::Usage(format!(
                "error: config key {key}: expected true or false, got {other:?}"
            ))),
        }
    }
}

fn resolve_data(flag: Option<PathBuf>, config: &Config) -> Result<PathBuf, Failure> {
    flag.or_else(|| std::env::var_os("BEV_DATA_DIR").map(PathBuf::from))
        .or_else(|| config.get("data").map(PathBuf::from))
        .ok_or_else(|| {
            Failure::Usage(
                "error: no dataset directory; pass --data, set BEV_DATA_DIR, or put `data = DIR` in the config file"
                    .to_string(),
            )
        })
}

/// Flag beats config; parse whichever is present.
fn resolve<T>(flag: Option<String>, config: &Config, key: &str) -> Result<Option<T>, Failure>
where
    T: FromStr<Err = String>,
{
    let raw = flag.or_else(|| config.get(key).map(str::to_string));
    match raw {
        None => Ok(None),
        Some(text) => text
            .parse::<T>()
            .map(Some)
            .map_err(|e| Failure::Usage(format!("error: --{key}: {e}"))),
    }
}

/// `2021`, `2020,2022`, or `2020..2022` (inclusive).
fn parse_years(text: &str) -> Result<Vec<u32>, String> {
    let bad = |part: &str| format!("cannot parse {part:?} as a year");
    if let Some((a, b)) = text.split_once("..") {
        let start: u32 = a.trim().parse().map_err(|_| bad(a))?;
        let end: u32 = b.trim().parse().map_err(|_| bad(b))?;
        if start > end {
            return Err(format!("empty year range {start}..{end}"));
        }
        Ok((start..=end).collect())
    } else {
        text.split(',')
            .map(|part| part.trim().parse::<u32>().map_err(|_| bad(part)))
            .collect()
    }
}

fn resolve_years(
    flag: Option<String>,
    config: &Config,
    dataset: &Dataset,
) -> Result<Vec<u32>, Failure> {
    let raw = flag.or_else(|| config.get("years").map(str::to_string));
    match raw {
        None => Ok(dataset.years()),
        Some(text) => parse_years(&text).map_err(|e| Failure::Usage(format!("error: --years: {e}"))),
    }
}

fn load(dir: &Path) -> Result<Dataset, Failure> {
    Ok(load_dataset::<f64>(dir)?)
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => {
            write_atomic(path, text).map_err(Failure::from)?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_validate(args: ValidateArgs) -> Result<(), Failure> {
    let config = Config::load(args.common.config.as_deref())?;
    let dir = resolve_data(args.common.data, &config)?;
    let report = validate_only(&dir).map_err(|e| Failure::Io(format!("error: {e}")))?;
    for d in &report.errors {
        println!("error: {d}");
    }
    for d in &report.warnings {
        println!("warning: {d}");
    }
    println!("{} errors, {} warnings", report.errors.len(), report.warnings.len());
    if report.is_valid() {
        Ok(())
    } else {
        Err(Failure::Validation(format!(
            "dataset at {} failed validation",
            dir.display()
        )))
    }
}

fn cmd_compute(args: ComputeArgs) -> Result<(), Failure> {
    let config = Config::load(args.common.config.as_deref())?;
    let dir = resolve_data(args.common.data, &config)?;
    let dataset = load(&dir)?;
    let years = resolve_years(args.years, &config, &dataset)?;
    let format = args
        .format
        .or_else(|| config.get("format").map(str::to_string))
        .unwrap_or_else(|| "json".to_string());
    let out = args.out.or_else(|| config.get("out").map(PathBuf::from));

    let tree = build_result_tree(&dataset, &years)?;
    let text = match format.as_str() {
        "json" => render_compute_json(&dataset, &tree)?,
        "csv" => render_compute_csv(&dataset, &tree),
        other => {
            return Err(Failure::Usage(format!(
                "error: --format: expected json or csv, got {other:?}"
            )))
        }
    };
    write_or_print(out.as_deref(), &text)
}

fn cmd_report(args: ReportArgs) -> Result<(), Failure> {
    let config = Config::load(args.common.config.as_deref())?;
    let dir = resolve_data(args.common.data, &config)?;
    let dataset = load(&dir)?;
    let years = resolve_years(args.years, &config, &dataset)?;

    let level = resolve::<ReportLevel>(args.level, &config, "level")?.unwrap_or(ReportLevel::Zone);
    let format = resolve::<ReportFormat>(args.format, &config, "format")?.unwrap_or(ReportFormat::Md);
    if format == ReportFormat::Json {
        return Err(Failure::Usage(
            "error: --format: report emits md or csv; use `compute` for json".to_string(),
        ));
    }
    let scaling = resolve::<ScalingTarget>(args.scale, &config, "scale")?;
    let fleet_basis =
        resolve::<FleetBasis>(args.fleet_basis, &config, "fleet-basis")?.unwrap_or_default();
    let uncertainty = match args
        .uncertainty
        .or_else(|| config.get("uncertainty").map(str::to_string))
    {
        None => None,
        Some(text) => Some(text.parse::<f64>().map_err(|_| {
            Failure::Usage(format!("error: --uncertainty: cannot parse {text:?} as a fraction"))
        })?),
    };
    let options = ReportOptions {
        growth: args.growth || config.get_bool("growth")?,
        intensity: args.intensity || config.get_bool("intensity")?,
        scaling,
        uncertainty,
        fleet_basis,
    };
    let out = args.out.or_else(|| config.get("out").map(PathBuf::from));
    if format == ReportFormat::Csv && out.is_none() {
        return Err(Failure::Usage(
            "error: --format csv writes one file per table and needs --out PREFIX".to_string(),
        ));
    }

    let spec = ReportSpec::new(level, format, years, options).map_err(Failure::from)?;
    let tree = build_result_tree(&dataset, &spec.years)?;
    match render_report(&dataset, &tree, &spec)? {
        RenderedReport::Markdown(text) => write_or_print(out.as_deref(), &text),
        RenderedReport::Json(text) => write_or_print(out.as_deref(), &text),
        RenderedReport::CsvTables(tables) => {
            let prefix = out.expect("csv requires --out");
            for (name, contents) in tables {
                let mut path = prefix.as_os_str().to_owned();
                path.push(format!("-{name}.csv"));
                let path = PathBuf::from(path);
                write_atomic(&path, &contents).map_err(Failure::from)?;
                eprintln!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate(args) => cmd_validate(args),
        Command::Compute(args) => cmd_compute(args),
        Command::Report(args) => cmd_report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("{}", failure.message());
            ExitCode::from(failure.exit_code())
        }
    }
}
