//! Dataset ingestion: parse, validate, and freeze a fleet dataset from a
//! directory of CSV files.
//!
//! A data directory contains `versions.csv`, `sales.csv`, `zones.csv` and
//! optionally `ratios.csv`. Files are UTF-8, comma-separated, "." decimal
//! point, one header row; lines starting with `#` are comments. Columns are
//! matched by name, so column order is free; unknown columns only warn.
//!
//! Every diagnostic carries the file name, a 1-based physical row number
//! (comments and headers count; the header of a well-formed file is the
//! first non-comment line) and a machine-readable code. Diagnostics about a
//! whole file, such as a missing required file or a missing column, use
//! row 1. Datasets assembled in memory via [`FleetDataset::from_parts`] have
//! no physical rows; their diagnostics use row 0.
//!
//! Validation is complete with respect to the accounting preconditions: a
//! dataset that loads computes end-to-end without runtime validation
//! failures.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analytics::ScalingRatios;
use crate::model::{
    SalesRecord, VehicleVersion, ZoneParameters, DEGRADATION_HARD_MAX, DEGRADATION_WARN_MAX,
    DEGRADATION_WARN_MIN, SHARE_SUM_TOLERANCE,
};
use crate::scalar::{from_f64, Scalar};

pub const VERSIONS_FILE: &str = "versions.csv";
pub const SALES_FILE: &str = "sales.csv";
pub const ZONES_FILE: &str = "zones.csv";
pub const RATIOS_FILE: &str = "ratios.csv";

/// Calendar years outside this range are rejected; catches transposed
/// columns.
pub const YEAR_MIN: u32 = 1990;
pub const YEAR_MAX: u32 = 2100;

const VERSIONS_COLUMNS: [&str; 8] = [
    "model_id",
    "version_id",
    "year",
    "battery_kwh",
    "nedc_km",
    "share",
    "lambda",
    "rho",
];
const SALES_COLUMNS: [&str; 4] = ["model_id", "zone_id", "year", "units"];
const ZONES_COLUMNS: [&str; 5] = [
    "zone_id",
    "year",
    "annual_mileage_km",
    "mild_season_fraction",
    "emission_factor_kgco2_per_kwh",
];
const RATIOS_COLUMNS: [&str; 3] = ["year", "stock_to_top20", "all_sales_to_top20"];

/// Machine-readable identity of a validation finding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DiagnosticCode {
    // errors
    MissingFile,
    MissingColumn,
    MalformedRow,
    YearRange,
    UnitViolation,
    DuplicateKey,
    DanglingZone,
    DanglingModel,
    ShareSum,
    // warnings
    UnknownColumn,
    DegradationRange,
    ZeroSales,
}

impl DiagnosticCode {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagnosticCode::MissingFile => "MISSING_FILE",
            DiagnosticCode::MissingColumn => "MISSING_COLUMN",
            DiagnosticCode::MalformedRow => "MALFORMED_ROW",
            DiagnosticCode::YearRange => "YEAR_RANGE",
            DiagnosticCode::UnitViolation => "UNIT_VIOLATION",
            DiagnosticCode::DuplicateKey => "DUPLICATE_KEY",
            DiagnosticCode::DanglingZone => "DANGLING_ZONE",
            DiagnosticCode::DanglingModel => "DANGLING_MODEL",
            DiagnosticCode::ShareSum => "SHARE_SUM",
            DiagnosticCode::UnknownColumn => "UNKNOWN_COLUMN",
            DiagnosticCode::DegradationRange => "DEGRADATION_RANGE",
            DiagnosticCode::ZeroSales => "ZERO_SALES",
        }
    }
}

impl fmt::Display for DiagnosticCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One validation finding, located by file and physical row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub file: String,
    pub row: u64,
    pub code: DiagnosticCode,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}: {}", self.file, self.row, self.code, self.message)
    }
}

/// Everything found while validating one directory. Errors block loading;
/// warnings never do.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<Diagnostic>,
    pub warnings: Vec<Diagnostic>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }

    fn push_error(&mut self, file: &str, row: u64, code: DiagnosticCode, message: String) {
        self.errors.push(Diagnostic {
            file: file.to_string(),
            row,
            code,
            message,
        });
    }

    fn push_warning(&mut self, file: &str, row: u64, code: DiagnosticCode, message: String) {
        self.warnings.push(Diagnostic {
            file: file.to_string(),
            row,
            code,
            message,
        });
    }

    fn sort(&mut self) {
        let key = |d: &Diagnostic| (d.file.clone(), d.row, d.code, d.message.clone());
        self.errors.sort_by_key(key);
        self.warnings.sort_by_key(key);
    }
}

/// A file could not be read (distinct from validation failure: the caller
/// maps this to a different exit code).
#[derive(Debug, Error)]
#[error("cannot read {}: {source}", path.display())]
pub struct DatasetIoError {
    pub path: PathBuf,
    #[source]
    pub source: std::io::Error,
}

/// Why a dataset failed to load.
#[derive(Debug, Error)]
pub enum LoadError {
    #[error(transparent)]
    Io(#[from] DatasetIoError),
    #[error("dataset failed validation with {} error(s)", .0.errors.len())]
    Invalid(ValidationReport),
}

/// Source directory and per-file SHA-256 digests, recorded at load time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub directory: PathBuf,
    /// File name -> lowercase hex SHA-256 of the raw bytes.
    pub checksums: BTreeMap<String, String>,
}

/// A validated, immutable fleet dataset.
///
/// All collections are keyed in canonical (lexicographic id, then year)
/// order, so iteration never depends on input-file row order.
#[derive(Debug, Clone, PartialEq)]
pub struct FleetDataset<S> {
    versions: BTreeMap<(String, u32), Vec<VehicleVersion<S>>>,
    sales: BTreeMap<(u32, String, String), u64>,
    zones: BTreeMap<(String, u32), ZoneParameters<S>>,
    scaling: BTreeMap<u32, ScalingRatios<S>>,
    provenance: Provenance,
}

impl<S: Scalar> FleetDataset<S> {
    /// Build a dataset from in-memory parts, applying the same semantic
    /// validation as the CSV loader. Diagnostics use row 0.
    pub fn from_parts(
        versions: Vec<VehicleVersion<S>>,
        sales: Vec<SalesRecord>,
        zones: Vec<ZoneParameters<S>>,
        scaling: Vec<ScalingRatios<S>>,
    ) -> Result<Self, ValidationReport> {
        let parsed = Parsed {
            versions: versions.iter().map(|v| (0, to_f64_version(v))).collect(),
            sales: sales.into_iter().map(|s| (0, s)).collect(),
            zones: zones.iter().map(|z| (0, to_f64_zone(z))).collect(),
            ratios: scaling.iter().map(|r| (0, to_f64_ratios(r))).collect(),
            poisoned_models: BTreeSet::new(),
            report: ValidationReport::default(),
            checksums: BTreeMap::new(),
            directory: PathBuf::from("<memory>"),
        };
        let (report, raw) = validate(parsed);
        if report.is_valid() {
            Ok(build(raw))
        } else {
            Err(report)
        }
    }

    /// Distinct years with sales rows, ascending.
    pub fn years(&self) -> Vec<u32> {
        let set: BTreeSet<u32> = self.sales.keys().map(|(y, _, _)| *y).collect();
        set.into_iter().collect()
    }

    /// Distinct zone ids with parameters, ascending.
    pub fn zone_ids(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.zones.keys().map(|(z, _)| z.as_str()).collect();
        set.into_iter().map(str::to_string).collect()
    }

    /// Parameters for one zone-year.
    pub fn zone(&self, zone_id: &str, year: u32) -> Option<&ZoneParameters<S>> {
        self.zones.get(&(zone_id.to_string(), year))
    }

    /// Versions of one model-year, sorted by version id.
    pub fn versions(&self, model_id: &str, year: u32) -> Option<&[VehicleVersion<S>]> {
        self.versions
            .get(&(model_id.to_string(), year))
            .map(Vec::as_slice)
    }

    /// All sales rows in canonical (year, zone, model) order.
    pub fn sales_records(&self) -> impl Iterator<Item = SalesRecord> + '_ {
        self.sales.iter().map(|((year, zone, model), units)| SalesRecord {
            model_id: model.clone(),
            zone_id: zone.clone(),
            year: *year,
            units: *units,
        })
    }

    /// Sales rows of one year, canonical (zone, model) order.
    pub fn sales_in_year(&self, year: u32) -> impl Iterator<Item = SalesRecord> + '_ {
        let lo = (year, String::new(), String::new());
        let hi = (year.saturating_add(1), String::new(), String::new());
        self.sales.range(lo..hi).map(|((y, zone, model), units)| SalesRecord {
            model_id: model.clone(),
            zone_id: zone.clone(),
            year: *y,
            units: *units,
        })
    }

    /// Population scaling ratios for one year, when `ratios.csv` provided
    /// them.
    pub fn scaling_for(&self, year: u32) -> Option<&ScalingRatios<S>> {
        self.scaling.get(&year)
    }

    pub fn has_scaling(&self) -> bool {
        !self.scaling.is_empty()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }
}

/// Load and freeze the dataset in `directory`.
///
/// Returns `LoadError::Invalid` with the full report when validation finds
/// errors, `LoadError::Io` when the directory or a file cannot be read. A
/// required file that is absent is a validation error, not an I/O error.
pub fn load_dataset<S: Scalar>(directory: &Path) -> Result<FleetDataset<S>, LoadError> {
    let parsed = ingest(directory)?;
    let (report, raw) = validate(parsed);
    if report.is_valid() {
        Ok(build(raw))
    } else {
        Err(LoadError::Invalid(report))
    }
}

/// Validate without constructing a dataset. Fails only on I/O problems.
pub fn validate_only(directory: &Path) -> Result<ValidationReport, DatasetIoError> {
    let parsed = ingest(directory)?;
    let (report, _) = validate(parsed);
    Ok(report)
}

fn to_f64_version<S: Scalar>(v: &VehicleVersion<S>) -> VehicleVersion<f64> {
    let f = |s: S| s.to_f64().unwrap_or(f64::NAN);
    VehicleVersion {
        model_id: v.model_id.clone(),
        version_id: v.version_id.clone(),
        year: v.year,
        battery_kwh: f(v.battery_kwh),
        nedc_km: f(v.nedc_km),
        sales_share: f(v.sales_share),
        mild_degradation: f(v.mild_degradation),
        harsh_degradation: f(v.harsh_degradation),
    }
}

fn to_f64_zone<S: Scalar>(z: &ZoneParameters<S>) -> ZoneParameters<f64> {
    let f = |s: S| s.to_f64().unwrap_or(f64::NAN);
    ZoneParameters {
        zone_id: z.zone_id.clone(),
        year: z.year,
        annual_mileage_km: f(z.annual_mileage_km),
        mild_season_fraction: f(z.mild_season_fraction),
        emission_factor_kg_per_kwh: f(z.emission_factor_kg_per_kwh),
    }
}

fn to_f64_ratios<S: Scalar>(r: &ScalingRatios<S>) -> ScalingRatios<f64> {
    let f = |s: S| s.to_f64().unwrap_or(f64::NAN);
    ScalingRatios {
        year: r.year,
        stock_to_top20: f(r.stock_to_top20),
        all_sales_to_top20: f(r.all_sales_to_top20),
    }
}

/// Rows that parsed, with their physical line numbers, plus diagnostics
/// gathered so far.
struct Parsed {
    versions: Vec<(u64, VehicleVersion<f64>)>,
    sales: Vec<(u64, SalesRecord)>,
    zones: Vec<(u64, ZoneParameters<f64>)>,
    ratios: Vec<(u64, ScalingRatios<f64>)>,
    /// Model-years whose share sum is unknowable because a row failed to
    /// parse; suppresses misleading SHARE_SUM findings.
    poisoned_models: BTreeSet<(String, u32)>,
    report: ValidationReport,
    checksums: BTreeMap<String, String>,
    directory: PathBuf,
}

/// Deduplicated collections ready to become a dataset.
struct RawMaps {
    versions: BTreeMap<(String, u32), Vec<VehicleVersion<f64>>>,
    sales: BTreeMap<(u32, String, String), u64>,
    zones: BTreeMap<(String, u32), ZoneParameters<f64>>,
    scaling: BTreeMap<u32, ScalingRatios<f64>>,
    checksums: BTreeMap<String, String>,
    directory: PathBuf,
}

fn read_file(path: &Path) -> Result<Option<Vec<u8>>, DatasetIoError> {
    match std::fs::File::open(path) {
        Ok(mut file) => {
            let mut bytes = Vec::new();
            file.read_to_end(&mut bytes).map_err(|source| DatasetIoError {
                path: path.to_path_buf(),
                source,
            })?;
            Ok(Some(bytes))
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(source) => Err(DatasetIoError {
            path: path.to_path_buf(),
            source,
        }),
    }
}

fn ingest(directory: &Path) -> Result<Parsed, DatasetIoError> {
    // A missing directory is an I/O failure; a missing required file inside
    // an existing directory is a validation error.
    if !directory.is_dir() {
        return Err(DatasetIoError {
            path: directory.to_path_buf(),
            source: std::io::Error::new(
                std::io::ErrorKind::NotFound,
                "data directory does not exist",
            ),
        });
    }

    let mut parsed = Parsed {
        versions: Vec::new(),
        sales: Vec::new(),
        zones: Vec::new(),
        ratios: Vec::new(),
        poisoned_models: BTreeSet::new(),
        report: ValidationReport::default(),
        checksums: BTreeMap::new(),
        directory: directory.to_path_buf(),
    };

    for (file, required) in [
        (VERSIONS_FILE, true),
        (SALES_FILE, true),
        (ZONES_FILE, true),
        (RATIOS_FILE, false),
    ] {
        match read_file(&directory.join(file))? {
            None => {
                if required {
                    parsed.report.push_error(
                        file,
                        1,
                        DiagnosticCode::MissingFile,
                        format!("required file {file} not found"),
                    );
                }
            }
            Some(bytes) => {
                parsed
                    .checksums
                    .insert(file.to_string(), hex::encode(Sha256::digest(&bytes)));
                match file {
                    VERSIONS_FILE => parse_versions(&bytes, &mut parsed),
                    SALES_FILE => parse_sales(&bytes, &mut parsed),
                    ZONES_FILE => parse_zones(&bytes, &mut parsed),
                    RATIOS_FILE => parse_ratios(&bytes, &mut parsed),
                    _ => unreachable!(),
                }
            }
        }
    }

    Ok(parsed)
}

/// Schema columns of one file resolved to record indices.
struct Header {
    indices: Vec<usize>,
    width: usize,
}

/// Maps record byte offsets to 1-based physical line numbers. The csv
/// reader's own line counter skips comment lines, and its byte position
/// points at the start of any comment block preceding the record, so both
/// need correcting to report the line the record actually starts on.
struct LineIndex {
    starts: Vec<u64>,
}

impl LineIndex {
    fn new(bytes: &[u8]) -> Self {
        let mut starts = vec![0u64];
        for (i, b) in bytes.iter().enumerate() {
            if *b == b'\n' {
                starts.push(i as u64 + 1);
            }
        }
        Self { starts }
    }

    fn record_line(&self, bytes: &[u8], byte: u64) -> u64 {
        let mut line = self.starts.partition_point(|&s| s <= byte) as u64;
        loop {
            let Some(&start) = self.starts.get(line as usize - 1) else {
                return line;
            };
            let end = self.starts.get(line as usize).map_or(bytes.len(), |&e| e as usize);
            let mut content = &bytes[start as usize..end];
            if let [rest @ .., b'\n'] = content {
                content = rest;
            }
            if let [rest @ .., b'\r'] = content {
                content = rest;
            }
            if content.is_empty() || content[0] == b'#' {
                line += 1;
            } else {
                return line;
            }
        }
    }
}

fn read_table(
    bytes: &[u8],
    file: &str,
    columns: &[&str],
    report: &mut ValidationReport,
) -> Option<(Header, Vec<(u64, csv::StringRecord)>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);

    let index = LineIndex::new(bytes);
    let mut rows: Vec<(u64, csv::StringRecord)> = Vec::new();
    for result in reader.records() {
        match result {
            Ok(record) => {
                let line = record.position().map_or(0, |p| index.record_line(bytes, p.byte()));
                rows.push((line, record));
            }
            Err(e) => {
                let line = e.position().map_or(1, |p| index.record_line(bytes, p.byte()));
                report.push_error(
                    file,
                    line,
                    DiagnosticCode::MalformedRow,
                    format!("unreadable row: {e}"),
                );
            }
        }
    }

    let Some((header_line, header)) = rows.first().cloned() else {
        report.push_error(
            file,
            1,
            DiagnosticCode::MissingColumn,
            format!("file has no header row; expected columns {}", columns.join(", ")),
        );
        return None;
    };

    let names: Vec<&str> = header.iter().collect();
    for (i, name) in names.iter().enumerate() {
        if !columns.contains(name) {
            report.push_warning(
                file,
                header_line,
                DiagnosticCode::UnknownColumn,
                format!("column {name} is not part of the schema"),
            );
        } else if names[..i].contains(name) {
            report.push_warning(
                file,
                header_line,
                DiagnosticCode::UnknownColumn,
                format!("column {name} appears more than once; first occurrence wins"),
            );
        }
    }

    let mut indices = Vec::with_capacity(columns.len());
    let mut missing = Vec::new();
    for column in columns {
        match names.iter().position(|n| n == column) {
            Some(i) => indices.push(i),
            None => missing.push(*column),
        }
    }
    if !missing.is_empty() {
        report.push_error(
            file,
            header_line,
            DiagnosticCode::MissingColumn,
            format!("missing required column(s): {}", missing.join(", ")),
        );
        return None;
    }

    Some((
        Header {
            indices,
            width: names.len(),
        },
        rows.into_iter().skip(1).collect(),
    ))
}

/// Fields of one data row in schema column order, or None after reporting a
/// width mismatch. Rows must be exactly as wide as the header.
fn row_fields<'r>(
    file: &str,
    line: u64,
    header: &Header,
    record: &'r csv::StringRecord,
    report: &mut ValidationReport,
) -> Option<Vec<&'r str>> {
    if record.len() != header.width {
        report.push_error(
            file,
            line,
            DiagnosticCode::MalformedRow,
            format!("expected {} field(s), found {}", header.width, record.len()),
        );
        return None;
    }
    Some(header.indices.iter().map(|&i| record.get(i).unwrap_or("")).collect())
}

fn parse_num<T: std::str::FromStr>(
    file: &str,
    line: u64,
    column: &str,
    value: &str,
    kind: &str,
    report: &mut ValidationReport,
) -> Option<T> {
    match value.parse::<T>() {
        Ok(v) => Some(v),
        Err(_) => {
            report.push_error(
                file,
                line,
                DiagnosticCode::MalformedRow,
                format!("column {column}: cannot parse {value:?} as {kind}"),
            );
            None
        }
    }
}

fn parse_versions(bytes: &[u8], parsed: &mut Parsed) {
    let report = &mut parsed.report;
    let Some((header, rows)) = read_table(bytes, VERSIONS_FILE, &VERSIONS_COLUMNS, report) else {
        return;
    };
    for (line, record) in rows {
        let Some(fields) = row_fields(VERSIONS_FILE, line, &header, &record, report) else {
            continue;
        };
        let model_id = fields[0].to_string();
        let version_id = fields[1].to_string();
        let year = parse_num::<u32>(VERSIONS_FILE, line, "year", fields[2], "a year", report);
        let battery = parse_num::<f64>(VERSIONS_FILE, line, "battery_kwh", fields[3], "a number", report);
        let nedc = parse_num::<f64>(VERSIONS_FILE, line, "nedc_km", fields[4], "a number", report);
        let share = parse_num::<f64>(VERSIONS_FILE, line, "share", fields[5], "a number", report);
        let lambda = parse_num::<f64>(VERSIONS_FILE, line, "lambda", fields[6], "a number", report);
        let rho = parse_num::<f64>(VERSIONS_FILE, line, "rho", fields[7], "a number", report);
        match (year, battery, nedc, share, lambda, rho) {
            (Some(year), Some(battery_kwh), Some(nedc_km), Some(sales_share), Some(mild), Some(harsh)) => {
                parsed.versions.push((
                    line,
                    VehicleVersion {
                        model_id,
                        version_id,
                        year,
                        battery_kwh,
                        nedc_km,
                        sales_share,
                        mild_degradation: mild,
                        harsh_degradation: harsh,
                    },
                ));
            }
            (Some(year), ..) => {
                // Share sum for this model-year is unknowable now.
                parsed.poisoned_models.insert((model_id, year));
            }
            _ => {}
        }
    }
}

fn parse_sales(bytes: &[u8], parsed: &mut Parsed) {
    let report = &mut parsed.report;
    let Some((header, rows)) = read_table(bytes, SALES_FILE, &SALES_COLUMNS, report) else {
        return;
    };
    for (line, record) in rows {
        let Some(fields) = row_fields(SALES_FILE, line, &header, &record, report) else {
            continue;
        };
        let model_id = fields[0].to_string();
        let zone_id = fields[1].to_string();
        let year = parse_num::<u32>(SALES_FILE, line, "year", fields[2], "a year", report);
        let units = parse_num::<u64>(SALES_FILE, line, "units", fields[3], "a non-negative integer", report);
        if let (Some(year), Some(units)) = (year, units) {
            parsed.sales.push((
                line,
                SalesRecord {
                    model_id,
                    zone_id,
                    year,
                    units,
                },
            ));
        }
    }
}

fn parse_zones(bytes: &[u8], parsed: &mut Parsed) {
    let report = &mut parsed.report;
    let Some((header, rows)) = read_table(bytes, ZONES_FILE, &ZONES_COLUMNS, report) else {
        return;
    };
    for (line, record) in rows {
        let Some(fields) = row_fields(ZONES_FILE, line, &header, &record, report) else {
            continue;
        };
        let zone_id = fields[0].to_string();
        let year = parse_num::<u32>(ZONES_FILE, line, "year", fields[1], "a year", report);
        let mileage = parse_num::<f64>(ZONES_FILE, line, "annual_mileage_km", fields[2], "a number", report);
        let fraction = parse_num::<f64>(ZONES_FILE, line, "mild_season_fraction", fields[3], "a number", report);
        let factor = parse_num::<f64>(
            ZONES_FILE,
            line,
            "emission_factor_kgco2_per_kwh",
            fields[4],
            "a number",
            report,
        );
        if let (Some(year), Some(annual_mileage_km), Some(mild_season_fraction), Some(factor)) =
            (year, mileage, fraction, factor)
        {
            parsed.zones.push((
                line,
                ZoneParameters {
                    zone_id,
                    year,
                    annual_mileage_km,
                    mild_season_fraction,
                    emission_factor_kg_per_kwh: factor,
                },
            ));
        }
    }
}

fn parse_ratios(bytes: &[u8], parsed: &mut Parsed) {
    let report = &mut parsed.report;
    let Some((header, rows)) = read_table(bytes, RATIOS_FILE, &RATIOS_COLUMNS, report) else {
        return;
    };
    for (line, record) in rows {
        let Some(fields) = row_fields(RATIOS_FILE, line, &header, &record, report) else {
            continue;
        };
        let year = parse_num::<u32>(RATIOS_FILE, line, "year", fields[0], "a year", report);
        let stock = parse_num::<f64>(RATIOS_FILE, line, "stock_to_top20", fields[1], "a number", report);
        let all_sales = parse_num::<f64>(RATIOS_FILE, line, "all_sales_to_top20", fields[2], "a number", report);
        if let (Some(year), Some(stock_to_top20), Some(all_sales_to_top20)) = (year, stock, all_sales) {
            parsed.ratios.push((
                line,
                ScalingRatios {
                    year,
                    stock_to_top20,
                    all_sales_to_top20,
                },
            ));
        }
    }
}

fn check_year(file: &str, line: u64, year: u32, report: &mut ValidationReport) {
    if !(YEAR_MIN..=YEAR_MAX).contains(&year) {
        report.push_error(
            file,
            line,
            DiagnosticCode::YearRange,
            format!("year {year} outside accepted range {YEAR_MIN}..={YEAR_MAX}"),
        );
    }
}

fn check_finite(
    file: &str,
    line: u64,
    column: &str,
    value: f64,
    report: &mut ValidationReport,
) -> bool {
    if !value.is_finite() {
        report.push_error(
            file,
            line,
            DiagnosticCode::UnitViolation,
            format!("column {column}: value must be finite, got {value}"),
        );
        return false;
    }
    true
}

/// Round only for display, so messages read like the inputs.
fn display_num(value: f64) -> f64 {
    (value * 1e9).round() / 1e9
}

fn validate(mut parsed: Parsed) -> (ValidationReport, RawMaps) {
    let mut report = std::mem::take(&mut parsed.report);

    // versions.csv: row domains.
    for (line, v) in &parsed.versions {
        let line = *line;
        check_year(VERSIONS_FILE, line, v.year, &mut report);
        if check_finite(VERSIONS_FILE, line, "battery_kwh", v.battery_kwh, &mut report)
            && v.battery_kwh <= 0.0
        {
            report.push_error(
                VERSIONS_FILE,
                line,
                DiagnosticCode::UnitViolation,
                format!("column battery_kwh: must be positive, got {}", display_num(v.battery_kwh)),
            );
        }
        if check_finite(VERSIONS_FILE, line, "nedc_km", v.nedc_km, &mut report) && v.nedc_km <= 0.0 {
            report.push_error(
                VERSIONS_FILE,
                line,
                DiagnosticCode::UnitViolation,
                format!("column nedc_km: must be positive, got {}", display_num(v.nedc_km)),
            );
        }
        if check_finite(VERSIONS_FILE, line, "share", v.sales_share, &mut report)
            && !(0.0..=1.0).contains(&v.sales_share)
        {
            report.push_error(
                VERSIONS_FILE,
                line,
                DiagnosticCode::UnitViolation,
                format!("column share: must lie in [0, 1], got {}", display_num(v.sales_share)),
            );
        }
        for (column, value) in [("lambda", v.mild_degradation), ("rho", v.harsh_degradation)] {
            if !check_finite(VERSIONS_FILE, line, column, value, &mut report) {
                continue;
            }
            if !(value > 0.0 && value <= DEGRADATION_HARD_MAX) {
                report.push_error(
                    VERSIONS_FILE,
                    line,
                    DiagnosticCode::UnitViolation,
                    format!(
                        "column {column}: must lie in (0, {DEGRADATION_HARD_MAX}], got {}",
                        display_num(value)
                    ),
                );
            } else if !(value > DEGRADATION_WARN_MIN && value <= DEGRADATION_WARN_MAX) {
                report.push_warning(
                    VERSIONS_FILE,
                    line,
                    DiagnosticCode::DegradationRange,
                    format!(
                        "column {column}: {} is outside the expected range ({DEGRADATION_WARN_MIN}, {DEGRADATION_WARN_MAX}]",
                        display_num(value)
                    ),
                );
            }
        }
    }

    // sales.csv: row domains.
    for (line, s) in &parsed.sales {
        check_year(SALES_FILE, *line, s.year, &mut report);
        if s.units == 0 {
            report.push_warning(
                SALES_FILE,
                *line,
                DiagnosticCode::ZeroSales,
                format!("model {} sold 0 units in zone {} in {}", s.model_id, s.zone_id, s.year),
            );
        }
    }

    // zones.csv: row domains.
    for (line, z) in &parsed.zones {
        let line = *line;
        check_year(ZONES_FILE, line, z.year, &mut report);
        if check_finite(ZONES_FILE, line, "annual_mileage_km", z.annual_mileage_km, &mut report)
            && z.annual_mileage_km < 0.0
        {
            report.push_error(
                ZONES_FILE,
                line,
                DiagnosticCode::UnitViolation,
                format!(
                    "column annual_mileage_km: must be non-negative, got {}",
                    display_num(z.annual_mileage_km)
                ),
            );
        }
        if check_finite(ZONES_FILE, line, "mild_season_fraction", z.mild_season_fraction, &mut report)
            && !(0.0..=1.0).contains(&z.mild_season_fraction)
        {
            report.push_error(
                ZONES_FILE,
                line,
                DiagnosticCode::UnitViolation,
                format!(
                    "column mild_season_fraction: must lie in [0, 1], got {}",
                    display_num(z.mild_season_fraction)
                ),
            );
        }
        if check_finite(
            ZONES_FILE,
            line,
            "emission_factor_kgco2_per_kwh",
            z.emission_factor_kg_per_kwh,
            &mut report,
        ) && z.emission_factor_kg_per_kwh < 0.0
        {
            report.push_error(
                ZONES_FILE,
                line,
                DiagnosticCode::UnitViolation,
                format!(
                    "column emission_factor_kgco2_per_kwh: must be non-negative, got {}",
                    display_num(z.emission_factor_kg_per_kwh)
                ),
            );
        }
    }

    // ratios.csv: row domains.
    for (line, r) in &parsed.ratios {
        let line = *line;
        check_year(RATIOS_FILE, line, r.year, &mut report);
        let stock_ok = check_finite(RATIOS_FILE, line, "stock_to_top20", r.stock_to_top20, &mut report);
        let sales_ok = check_finite(
            RATIOS_FILE,
            line,
            "all_sales_to_top20",
            r.all_sales_to_top20,
            &mut report,
        );
        if stock_ok && sales_ok && !(r.stock_to_top20 >= r.all_sales_to_top20 && r.all_sales_to_top20 >= 1.0) {
            report.push_error(
                RATIOS_FILE,
                line,
                DiagnosticCode::UnitViolation,
                format!(
                    "ratios must satisfy stock_to_top20 >= all_sales_to_top20 >= 1, got {} and {}",
                    display_num(r.stock_to_top20),
                    display_num(r.all_sales_to_top20)
                ),
            );
        }
    }

    // Deduplicate into canonical maps; first row wins, later rows error.
    let mut versions: BTreeMap<(String, u32), Vec<VehicleVersion<f64>>> = BTreeMap::new();
    let mut version_keys: BTreeMap<(String, String, u32), u64> = BTreeMap::new();
    let mut version_group_line: BTreeMap<(String, u32), u64> = BTreeMap::new();
    for (line, v) in &parsed.versions {
        let key = (v.model_id.clone(), v.version_id.clone(), v.year);
        if let Some(first) = version_keys.get(&key) {
            report.push_error(
                VERSIONS_FILE,
                *line,
                DiagnosticCode::DuplicateKey,
                format!(
                    "duplicate version ({}, {}, {}); first defined at row {first}",
                    v.model_id, v.version_id, v.year
                ),
            );
            continue;
        }
        version_keys.insert(key, *line);
        let group = (v.model_id.clone(), v.year);
        version_group_line.entry(group.clone()).or_insert(*line);
        versions.entry(group).or_default().push(v.clone());
    }
    for group in versions.values_mut() {
        group.sort_by(|a, b| a.version_id.cmp(&b.version_id));
    }

    let mut sales: BTreeMap<(u32, String, String), u64> = BTreeMap::new();
    let mut sales_lines: BTreeMap<(u32, String, String), u64> = BTreeMap::new();
    for (line, s) in &parsed.sales {
        let key = (s.year, s.zone_id.clone(), s.model_id.clone());
        if let Some(first) = sales_lines.get(&key) {
            report.push_error(
                SALES_FILE,
                *line,
                DiagnosticCode::DuplicateKey,
                format!(
                    "duplicate sales key ({}, {}, {}); first defined at row {first}",
                    s.model_id, s.zone_id, s.year
                ),
            );
            continue;
        }
        sales_lines.insert(key.clone(), *line);
        sales.insert(key, s.units);
    }

    let mut zones: BTreeMap<(String, u32), ZoneParameters<f64>> = BTreeMap::new();
    let mut zone_lines: BTreeMap<(String, u32), u64> = BTreeMap::new();
    for (line, z) in &parsed.zones {
        let key = (z.zone_id.clone(), z.year);
        if let Some(first) = zone_lines.get(&key) {
            report.push_error(
                ZONES_FILE,
                *line,
                DiagnosticCode::DuplicateKey,
                format!(
                    "duplicate zone parameters ({}, {}); first defined at row {first}",
                    z.zone_id, z.year
                ),
            );
            continue;
        }
        zone_lines.insert(key.clone(), *line);
        zones.insert(key, z.clone());
    }

    let mut scaling: BTreeMap<u32, ScalingRatios<f64>> = BTreeMap::new();
    let mut ratio_lines: BTreeMap<u32, u64> = BTreeMap::new();
    for (line, r) in &parsed.ratios {
        if let Some(first) = ratio_lines.get(&r.year) {
            report.push_error(
                RATIOS_FILE,
                *line,
                DiagnosticCode::DuplicateKey,
                format!("duplicate ratios for year {}; first defined at row {first}", r.year),
            );
            continue;
        }
        ratio_lines.insert(r.year, *line);
        scaling.insert(r.year, r.clone());
    }

    // Cross-references: sales rows must resolve to zone parameters and to at
    // least one version of the model for that year.
    for (line, s) in &parsed.sales {
        if !zones.contains_key(&(s.zone_id.clone(), s.year)) {
            report.push_error(
                SALES_FILE,
                *line,
                DiagnosticCode::DanglingZone,
                format!("no zone parameters for zone {} in {}", s.zone_id, s.year),
            );
        }
        if !versions.contains_key(&(s.model_id.clone(), s.year)) {
            report.push_error(
                SALES_FILE,
                *line,
                DiagnosticCode::DanglingModel,
                format!("no versions defined for model {} in {}", s.model_id, s.year),
            );
        }
    }

    // Version shares per model-year must sum to 1.
    for (group, group_versions) in &versions {
        if parsed.poisoned_models.contains(group) {
            continue;
        }
        let sum: f64 = group_versions.iter().map(|v| v.sales_share).sum();
        let deviation = (sum - 1.0).abs();
        if deviation.is_nan() || deviation > SHARE_SUM_TOLERANCE {
            let line = version_group_line.get(group).copied().unwrap_or(0);
            report.push_error(
                VERSIONS_FILE,
                line,
                DiagnosticCode::ShareSum,
                format!(
                    "version shares for model {} year {} sum to {}, expected 1 \u{b1} 1e-6",
                    group.0,
                    group.1,
                    display_num(sum)
                ),
            );
        }
    }

    report.sort();
    let raw = RawMaps {
        versions,
        sales,
        zones,
        scaling,
        checksums: parsed.checksums,
        directory: parsed.directory,
    };
    (report, raw)
}

fn build<S: Scalar>(raw: RawMaps) -> FleetDataset<S> {
    let convert_version = |v: VehicleVersion<f64>| VehicleVersion {
        model_id: v.model_id,
        version_id: v.version_id,
        year: v.year,
        battery_kwh: from_f64::<S>(v.battery_kwh),
        nedc_km: from_f64::<S>(v.nedc_km),
        sales_share: from_f64::<S>(v.sales_share),
        mild_degradation: from_f64::<S>(v.mild_degradation),
        harsh_degradation: from_f64::<S>(v.harsh_degradation),
    };
    let convert_zone = |z: ZoneParameters<f64>| ZoneParameters {
        zone_id: z.zone_id,
        year: z.year,
        annual_mileage_km: from_f64::<S>(z.annual_mileage_km),
        mild_season_fraction: from_f64::<S>(z.mild_season_fraction),
        emission_factor_kg_per_kwh: from_f64::<S>(z.emission_factor_kg_per_kwh),
    };
    let convert_ratios = |r: ScalingRatios<f64>| ScalingRatios {
        year: r.year,
        stock_to_top20: from_f64::<S>(r.stock_to_top20),
        all_sales_to_top20: from_f64::<S>(r.all_sales_to_top20),
    };

    FleetDataset {
        versions: raw
            .versions
            .into_iter()
            .map(|(k, vs)| (k, vs.into_iter().map(convert_version).collect()))
            .collect(),
        sales: raw.sales,
        zones: raw
            .zones
            .into_iter()
            .map(|(k, z)| (k, convert_zone(z)))
            .collect(),
        scaling: raw
            .scaling
            .into_iter()
            .map(|(k, r)| (k, convert_ratios(r)))
            .collect(),
        provenance: Provenance {
            directory: raw.directory,
            checksums: raw.checksums,
        },
    }
}
