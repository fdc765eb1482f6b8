//! Report rendering: serialize computed results as JSON, CSV, or Markdown.
//!
//! Compute output carries the full nested tree at full precision. Report
//! tables are presentation artifacts: energy rounds to 0.1 GWh, emissions
//! to 0.01 Mt, percentages to 0.1 points. Every artifact starts with a
//! provenance header (tool version, dataset checksums, options); nothing in
//! the payload depends on wall-clock time, so reruns are byte-identical.
//!
//! CSV output uses the same dialect the loader reads: UTF-8, comma,
//! `#` comment lines, one header row.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::analytics::{
    energy_intensity, fleet_count, growth_rate, scale_to_population, uncertainty_band,
    AnalyticsError, FleetBasis, ResultTree, ScalingTarget, Scope, YearNode,
};
use crate::dataset::FleetDataset;
use crate::scalar::Scalar;

pub const TOOL_NAME: &str = "bevcharge";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Deepest level of detail a report includes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportLevel {
    National,
    Zone,
    Model,
    Version,
}

impl ReportLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            ReportLevel::National => "national",
            ReportLevel::Zone => "zone",
            ReportLevel::Model => "model",
            ReportLevel::Version => "version",
        }
    }
}

impl std::fmt::Display for ReportLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ReportLevel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "national" => Ok(ReportLevel::National),
            "zone" => Ok(ReportLevel::Zone),
            "model" => Ok(ReportLevel::Model),
            "version" => Ok(ReportLevel::Version),
            other => Err(format!(
                "unknown level {other:?}; expected national, zone, model, or version"
            )),
        }
    }
}

/// Serialization format of a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    Json,
    Csv,
    Md,
}

impl ReportFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
            ReportFormat::Md => "md",
        }
    }
}

impl std::str::FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "md" => Ok(ReportFormat::Md),
            other => Err(format!("unknown format {other:?}; expected json, csv, or md")),
        }
    }
}

/// Optional derivations a report includes beyond the totals tables.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    pub growth: bool,
    pub intensity: bool,
    pub scaling: Option<ScalingTarget>,
    /// Band half-width fraction; None leaves bands out.
    pub uncertainty: Option<f64>,
    pub fleet_basis: FleetBasis,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            growth: false,
            intensity: false,
            scaling: None,
            uncertainty: None,
            fleet_basis: FleetBasis::Cumulative,
        }
    }
}

/// What to report: level of detail, format, years, derivations.
/// Years are sorted, deduplicated, and never empty.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportSpec {
    pub level: ReportLevel,
    pub format: ReportFormat,
    pub years: Vec<u32>,
    pub options: ReportOptions,
}

impl ReportSpec {
    pub fn new(
        level: ReportLevel,
        format: ReportFormat,
        mut years: Vec<u32>,
        options: ReportOptions,
    ) -> Result<Self, ReportError> {
        years.sort_unstable();
        years.dedup();
        if years.is_empty() {
            return Err(ReportError::EmptyYears);
        }
        Ok(ReportSpec {
            level,
            format,
            years,
            options,
        })
    }
}

/// Rendering or writing failed.
#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report years must be non-empty")]
    EmptyYears,
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error("cannot write {}: {source}", path.display())]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// A rendered report, ready to be written.
#[derive(Debug, Clone, PartialEq)]
pub enum RenderedReport {
    Markdown(String),
    /// One CSV document per table, as (table name, contents).
    CsvTables(Vec<(String, String)>),
    Json(String),
}

/// One presentation table, format-independent.
#[derive(Debug, Clone, PartialEq, Serialize)]
struct Table {
    name: &'static str,
    title: String,
    columns: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

fn f<S: Scalar>(value: S) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

fn fmt_gwh<S: Scalar>(kwh: S) -> String {
    format!("{:.1}", f(kwh) / 1e6)
}

fn fmt_mt<S: Scalar>(kg: S) -> String {
    format!("{:.2}", f(kg) / 1e9)
}

fn fmt_pct(p: f64) -> String {
    format!("{:.1}", p)
}

/// Full-precision scalar text; round-trips through f64 parsing.
fn fmt_exact<S: Scalar>(value: S) -> String {
    format!("{}", f(value))
}

fn years_list(years: &[u32]) -> String {
    years
        .iter()
        .map(|y| y.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn provenance_lines<S: Scalar>(dataset: &FleetDataset<S>, options: &str) -> Vec<String> {
    let p = dataset.provenance();
    let mut lines = vec![
        format!("{TOOL_NAME} {TOOL_VERSION}"),
        format!("dataset: {}", p.directory.display()),
    ];
    for (file, digest) in &p.checksums {
        lines.push(format!("sha256 {file}: {digest}"));
    }
    lines.push(format!("options: {options}"));
    lines
}

fn report_options_line(spec: &ReportSpec) -> String {
    let mut parts = vec![
        format!("level={}", spec.level),
        format!("years={}", years_list(&spec.years)),
        format!("fleet-basis={}", spec.options.fleet_basis),
    ];
    if let Some(u) = spec.options.uncertainty {
        parts.push(format!("uncertainty={u}"));
    }
    if let Some(target) = spec.options.scaling {
        parts.push(format!("scale={target}"));
    }
    if spec.options.growth {
        parts.push("growth".to_string());
    }
    if spec.options.intensity {
        parts.push("intensity".to_string());
    }
    parts.join(" ")
}

/// Scope label of a tree path: `zone`, `zone/model`, `zone/model/version`.
fn scope_path(parts: &[&str]) -> String {
    parts.join("/")
}

/// One scope of one year, flattened out of the tree in pre-order.
struct ScopeRow {
    level: &'static str,
    scope: String,
    year: u32,
    energy_kwh: f64,
    emissions_kg: f64,
}

fn year_node<S: Scalar>(tree: &ResultTree<S>, year: u32) -> Result<&YearNode<S>, ReportError> {
    tree.year(year)
        .ok_or_else(|| {
            AnalyticsError::NoDataYear {
                year,
                available: tree.years.iter().map(|y| y.year).collect(),
            }
            .into()
        })
}

/// Flatten one year down to `level`, national first, then depth-first in
/// canonical child order.
fn scope_rows<S: Scalar>(node: &YearNode<S>, level: ReportLevel) -> Vec<ScopeRow> {
    let year = node.year;
    let mut rows = vec![ScopeRow {
        level: "national",
        scope: "national".to_string(),
        year,
        energy_kwh: f(node.energy.kwh()),
        emissions_kg: f(node.emissions.kg()),
    }];
    for zone in &node.zones {
        if ReportLevel::Zone <= level {
            rows.push(ScopeRow {
                level: "zone",
                scope: zone.zone_id.clone(),
                year,
                energy_kwh: f(zone.energy.kwh()),
                emissions_kg: f(zone.emissions.kg()),
            });
        }
        for model in &zone.models {
            if ReportLevel::Model <= level {
                rows.push(ScopeRow {
                    level: "model",
                    scope: scope_path(&[&zone.zone_id, &model.model_id]),
                    year,
                    energy_kwh: f(model.energy.kwh()),
                    emissions_kg: f(model.emissions.kg()),
                });
            }
            if ReportLevel::Version <= level {
                for version in &model.versions {
                    rows.push(ScopeRow {
                        level: "version",
                        scope: scope_path(&[&zone.zone_id, &model.model_id, &version.version_id]),
                        year,
                        energy_kwh: f(version.energy.kwh()),
                        emissions_kg: f(version.emissions.kg()),
                    });
                }
            }
        }
    }
    rows
}

/// Shared shape of the totals and emissions tables: one value column plus
/// optional band columns filled on national rows.
fn series_table<S: Scalar>(
    tree: &ResultTree<S>,
    spec: &ReportSpec,
    name: &'static str,
    title: &str,
    value_columns: [&'static str; 3],
    pick: impl Fn(&ScopeRow) -> f64,
    format: impl Fn(f64) -> String,
) -> Result<Table, ReportError> {
    let mut columns = vec!["level", "scope", "year", value_columns[0]];
    if spec.options.uncertainty.is_some() {
        columns.push(value_columns[1]);
        columns.push(value_columns[2]);
    }
    let mut rows = Vec::new();
    for year in &spec.years {
        for scope_row in scope_rows(year_node(tree, *year)?, spec.level) {
            let value = pick(&scope_row);
            let mut row = vec![
                scope_row.level.to_string(),
                scope_row.scope,
                scope_row.year.to_string(),
                format(value),
            ];
            if let Some(u) = spec.options.uncertainty {
                if scope_row.level == "national" {
                    let band = uncertainty_band(value, u)?;
                    row.push(format(band.low));
                    row.push(format(band.high));
                } else {
                    row.push(String::new());
                    row.push(String::new());
                }
            }
            rows.push(row);
        }
    }
    Ok(Table {
        name,
        title: title.to_string(),
        columns,
        rows,
    })
}

fn totals_table<S: Scalar>(tree: &ResultTree<S>, spec: &ReportSpec) -> Result<Table, ReportError> {
    series_table(
        tree,
        spec,
        "totals",
        "Electricity consumption (GWh)",
        ["energy_gwh", "energy_low_gwh", "energy_high_gwh"],
        |r| r.energy_kwh,
        |kwh| format!("{:.1}", kwh / 1e6),
    )
}

fn emissions_table<S: Scalar>(tree: &ResultTree<S>, spec: &ReportSpec) -> Result<Table, ReportError> {
    series_table(
        tree,
        spec,
        "emissions",
        "Carbon emissions (MtCO2)",
        ["emissions_mt", "emissions_low_mt", "emissions_high_mt"],
        |r| r.emissions_kg,
        |kg| format!("{:.2}", kg / 1e9),
    )
}

/// Share of each model in its zone-year's energy. Zone-years with zero
/// energy have no defined shares and produce no rows.
fn contribution_table<S: Scalar>(
    tree: &ResultTree<S>,
    years: &[u32],
) -> Result<Table, ReportError> {
    let mut rows = Vec::new();
    for year in years {
        let node = year_node(tree, *year)?;
        for zone in &node.zones {
            let total = f(zone.energy.kwh());
            if total <= 0.0 {
                continue;
            }
            for model in &zone.models {
                let share = 100.0 * f(model.energy.kwh()) / total;
                rows.push(vec![
                    zone.zone_id.clone(),
                    year.to_string(),
                    model.model_id.clone(),
                    fmt_pct(share),
                ]);
            }
        }
    }
    Ok(Table {
        name: "contribution",
        title: "Model contribution to zone electricity consumption (%)".to_string(),
        columns: vec!["zone", "year", "model", "share_pct"],
        rows,
    })
}

/// Percentage change between consecutive reported years, per scope. Scopes
/// without a positive base value are omitted.
fn growth_table<S: Scalar>(
    tree: &ResultTree<S>,
    years: &[u32],
    level: ReportLevel,
) -> Result<Table, ReportError> {
    let mut rows = Vec::new();
    for pair in years.windows(2) {
        let (from_year, to_year) = (pair[0], pair[1]);
        let base: std::collections::BTreeMap<(&'static str, String), (f64, f64)> =
            scope_rows(year_node(tree, from_year)?, level)
                .into_iter()
                .map(|r| ((r.level, r.scope), (r.energy_kwh, r.emissions_kg)))
                .collect();
        for current in scope_rows(year_node(tree, to_year)?, level) {
            let Some((base_energy, base_emissions)) = base.get(&(current.level, current.scope.clone()))
            else {
                continue;
            };
            let lacks_base = |v: f64| v.is_nan() || v <= 0.0;
            if lacks_base(*base_energy) || lacks_base(*base_emissions) {
                continue;
            }
            let energy_growth = growth_rate(*base_energy, current.energy_kwh)?;
            let emissions_growth = growth_rate(*base_emissions, current.emissions_kg)?;
            rows.push(vec![
                current.level.to_string(),
                current.scope,
                from_year.to_string(),
                to_year.to_string(),
                fmt_pct(energy_growth),
                fmt_pct(emissions_growth),
            ]);
        }
    }
    Ok(Table {
        name: "growth",
        title: "Annual change (%)".to_string(),
        columns: vec![
            "level",
            "scope",
            "from_year",
            "to_year",
            "energy_growth_pct",
            "emissions_growth_pct",
        ],
        rows,
    })
}

/// Per-vehicle intensities for the national scope and every zone.
fn intensity_table<S: Scalar>(
    dataset: &FleetDataset<S>,
    tree: &ResultTree<S>,
    years: &[u32],
    basis: FleetBasis,
) -> Result<Table, ReportError> {
    let mut rows = Vec::new();
    for year in years {
        let node = year_node(tree, *year)?;
        let mut scopes = vec![(Scope::National, node.energy, node.emissions)];
        for zone in &node.zones {
            scopes.push((Scope::Zone(zone.zone_id.clone()), zone.energy, zone.emissions));
        }
        for (scope, energy, emissions) in scopes {
            let count = fleet_count(dataset, &scope, *year, basis);
            let result = energy_intensity(scope, *year, energy, emissions, count)?;
            rows.push(vec![
                result.scope.to_string(),
                year.to_string(),
                format!("{:.1}", f(result.energy_intensity)),
                format!("{:.1}", f(result.carbon_intensity)),
                result.fleet_count.to_string(),
                basis.to_string(),
            ]);
        }
    }
    Ok(Table {
        name: "intensity",
        title: "Per-vehicle intensity".to_string(),
        columns: vec![
            "scope",
            "year",
            "energy_intensity_kwh_per_vehicle",
            "carbon_intensity_kg_per_vehicle",
            "fleet_count",
            "fleet_basis",
        ],
        rows,
    })
}

/// Population-scaled totals per year, national and per zone. Zone rows are
/// uniform-ratio estimates.
fn scaled_table<S: Scalar>(
    dataset: &FleetDataset<S>,
    tree: &ResultTree<S>,
    years: &[u32],
    target: ScalingTarget,
) -> Result<Table, ReportError> {
    let mut rows = Vec::new();
    for year in years {
        let node = year_node(tree, *year)?;
        let ratios = dataset
            .scaling_for(*year)
            .ok_or(AnalyticsError::NoRatio { year: *year })?;
        let scaled = scale_to_population(node, ratios, target)?;
        rows.push(vec![
            "national".to_string(),
            year.to_string(),
            target.to_string(),
            fmt_exact(scaled.ratio),
            fmt_gwh(scaled.energy.kwh()),
            fmt_mt(scaled.emissions.kg()),
            "true".to_string(),
        ]);
        for zone in &scaled.zones {
            rows.push(vec![
                zone.zone_id.clone(),
                year.to_string(),
                target.to_string(),
                fmt_exact(scaled.ratio),
                fmt_gwh(zone.energy.kwh()),
                fmt_mt(zone.emissions.kg()),
                "true".to_string(),
            ]);
        }
    }
    Ok(Table {
        name: "scaled",
        title: format!("Population-scaled totals ({target} basis)"),
        columns: vec![
            "scope",
            "year",
            "target",
            "ratio",
            "energy_gwh",
            "emissions_mt",
            "uniform_ratio",
        ],
        rows,
    })
}

fn build_tables<S: Scalar>(
    dataset: &FleetDataset<S>,
    tree: &ResultTree<S>,
    spec: &ReportSpec,
) -> Result<Vec<Table>, ReportError> {
    let mut tables = vec![
        totals_table(tree, spec)?,
        emissions_table(tree, spec)?,
        contribution_table(tree, &spec.years)?,
    ];
    if spec.options.growth {
        tables.push(growth_table(tree, &spec.years, spec.level)?);
    }
    if spec.options.intensity {
        tables.push(intensity_table(dataset, tree, &spec.years, spec.options.fleet_basis)?);
    }
    if let Some(target) = spec.options.scaling {
        tables.push(scaled_table(dataset, tree, &spec.years, target)?);
    }
    Ok(tables)
}

fn render_csv_table(table: &Table, header_lines: &[String]) -> String {
    let mut out = Vec::new();
    for line in header_lines {
        out.extend_from_slice(b"# ");
        out.extend_from_slice(line.as_bytes());
        out.push(b'\n');
    }
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(&table.columns).expect("in-memory write");
    for row in &table.rows {
        writer.write_record(row).expect("in-memory write");
    }
    let out = writer.into_inner().expect("in-memory flush");
    String::from_utf8(out).expect("CSV output is UTF-8")
}

fn md_escape(cell: &str) -> String {
    cell.replace('|', "\\|")
}

fn render_md(tables: &[Table], header_lines: &[String]) -> String {
    let mut out = String::new();
    out.push_str("# Fleet electricity and emissions report\n\n");
    for line in header_lines {
        out.push_str("- ");
        out.push_str(line);
        out.push('\n');
    }
    for table in tables {
        out.push('\n');
        out.push_str("## ");
        out.push_str(&table.title);
        out.push_str("\n\n");
        out.push('|');
        for column in &table.columns {
            out.push_str(&format!(" {column} |"));
        }
        out.push('\n');
        out.push('|');
        for _ in &table.columns {
            out.push_str(" --- |");
        }
        out.push('\n');
        for row in &table.rows {
            out.push('|');
            for cell in row {
                out.push_str(&format!(" {} |", md_escape(cell)));
            }
            out.push('\n');
        }
    }
    out
}

#[derive(Serialize)]
struct JsonReport<'a> {
    tool: ToolInfo,
    dataset: &'a crate::dataset::Provenance,
    options: String,
    tables: &'a [Table],
}

#[derive(Serialize)]
struct ToolInfo {
    name: &'static str,
    version: &'static str,
}

/// Render the report described by `spec` from an already-computed tree.
/// The tree must contain every year the spec asks for.
pub fn render_report<S: Scalar>(
    dataset: &FleetDataset<S>,
    tree: &ResultTree<S>,
    spec: &ReportSpec,
) -> Result<RenderedReport, ReportError> {
    let tables = build_tables(dataset, tree, spec)?;
    let header = provenance_lines(dataset, &report_options_line(spec));
    match spec.format {
        ReportFormat::Md => Ok(RenderedReport::Markdown(render_md(&tables, &header))),
        ReportFormat::Csv => Ok(RenderedReport::CsvTables(
            tables
                .iter()
                .map(|t| (t.name.to_string(), render_csv_table(t, &header)))
                .collect(),
        )),
        ReportFormat::Json => {
            let doc = JsonReport {
                tool: ToolInfo {
                    name: TOOL_NAME,
                    version: TOOL_VERSION,
                },
                dataset: dataset.provenance(),
                options: report_options_line(spec),
                tables: &tables,
            };
            let mut text = serde_json::to_string_pretty(&doc)?;
            text.push('\n');
            Ok(RenderedReport::Json(text))
        }
    }
}

#[derive(Serialize)]
struct ComputeDocument<'a, S> {
    tool: ToolInfo,
    dataset: &'a crate::dataset::Provenance,
    years: &'a [YearNode<S>],
}

/// Serialize a computed tree with provenance as pretty JSON. The document
/// layout is published in `docs/result-tree.schema.json`.
pub fn render_compute_json<S: Scalar + Serialize>(
    dataset: &FleetDataset<S>,
    tree: &ResultTree<S>,
) -> Result<String, ReportError> {
    let doc = ComputeDocument {
        tool: ToolInfo {
            name: TOOL_NAME,
            version: TOOL_VERSION,
        },
        dataset: dataset.provenance(),
        years: &tree.years,
    };
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    Ok(text)
}

/// Serialize a computed tree as CSV: one row per (level, scope, year,
/// metric), full precision.
pub fn render_compute_csv<S: Scalar>(
    dataset: &FleetDataset<S>,
    tree: &ResultTree<S>,
) -> String {
    let mut table = Table {
        name: "compute",
        title: String::new(),
        columns: vec!["level", "scope", "year", "metric", "value", "unit"],
        rows: Vec::new(),
    };
    let mut push = |level: &str, scope: String, year: u32, metric: &str, value: String, unit: &str| {
        table.rows.push(vec![
            level.to_string(),
            scope,
            year.to_string(),
            metric.to_string(),
            value,
            unit.to_string(),
        ]);
    };
    for node in &tree.years {
        let year = node.year;
        push("national", "national".into(), year, "energy", fmt_exact(node.energy.kwh()), "kwh");
        push(
            "national",
            "national".into(),
            year,
            "emissions",
            fmt_exact(node.emissions.kg()),
            "kg",
        );
        for zone in &node.zones {
            push("zone", zone.zone_id.clone(), year, "energy", fmt_exact(zone.energy.kwh()), "kwh");
            push(
                "zone",
                zone.zone_id.clone(),
                year,
                "emissions",
                fmt_exact(zone.emissions.kg()),
                "kg",
            );
            for model in &zone.models {
                let scope = scope_path(&[&zone.zone_id, &model.model_id]);
                push("model", scope.clone(), year, "units", model.units.to_string(), "vehicles");
                push("model", scope.clone(), year, "energy", fmt_exact(model.energy.kwh()), "kwh");
                push(
                    "model",
                    scope.clone(),
                    year,
                    "emissions",
                    fmt_exact(model.emissions.kg()),
                    "kg",
                );
                for version in &model.versions {
                    let scope = scope_path(&[&zone.zone_id, &model.model_id, &version.version_id]);
                    push(
                        "version",
                        scope.clone(),
                        year,
                        "mild_energy",
                        fmt_exact(version.mild_energy.kwh()),
                        "kwh",
                    );
                    push(
                        "version",
                        scope.clone(),
                        year,
                        "harsh_energy",
                        fmt_exact(version.harsh_energy.kwh()),
                        "kwh",
                    );
                    push("version", scope.clone(), year, "energy", fmt_exact(version.energy.kwh()), "kwh");
                    push(
                        "version",
                        scope,
                        year,
                        "emissions",
                        fmt_exact(version.emissions.kg()),
                        "kg",
                    );
                }
            }
        }
    }
    let years: Vec<u32> = tree.years.iter().map(|y| y.year).collect();
    let header = provenance_lines(dataset, &format!("years={}", years_list(&years)));
    render_csv_table(&table, &header)
}

/// A parsed CSV artifact: header row plus data rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    /// Index of a named column.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

/// Read a CSV artifact with the same dialect the loader uses. Every table
/// this module emits parses back through here.
pub fn parse_csv_table(bytes: &[u8]) -> Result<CsvTable, csv::Error> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut records = Vec::new();
    for record in reader.records() {
        let record = record?;
        records.push(record.iter().map(str::to_string).collect::<Vec<String>>());
    }
    let header = if records.is_empty() { Vec::new() } else { records.remove(0) };
    Ok(CsvTable {
        header,
        rows: records,
    })
}

/// Write `contents` to `path` atomically: temp file in the same directory,
/// then rename. Readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), ReportError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let to_err = |source: std::io::Error| ReportError::Write {
        path: path.to_path_buf(),
        source,
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(to_err)?;
    tmp.write_all(contents.as_bytes()).map_err(to_err)?;
    tmp.persist(path).map_err(|e| ReportError::Write {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}
