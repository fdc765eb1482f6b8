//! Bottom-up charging-demand and emissions accounting for battery-electric
//! vehicle fleets.
//!
//! The engine enumerates what a tracked fleet consumes from the grid: each
//! model version's seasonal electricity use follows from its battery energy,
//! rated range, and seasonal range degradation; sales volumes and zone
//! driving parameters turn that into version, model, climate-zone, and
//! national totals per year; zone grid emission factors turn energy into
//! operational CO2. On top of the accounting sit derived metrics:
//! per-vehicle intensities, annual growth rates, scaling from the tracked
//! fleet to a wider population, and presentation uncertainty bands.
//!
//! Modules:
//! - [`units`]: non-negative energy and emission quantities in base units.
//! - [`model`]: the per-version accounting arithmetic and its fold rules.
//! - [`dataset`]: CSV ingestion, validation diagnostics, frozen datasets.
//! - [`analytics`]: the nested result tree and derived metrics.
//! - [`report`]: JSON/CSV/Markdown artifacts with provenance headers.
//!
//! All arithmetic is generic over the scalar type via [`scalar::Scalar`]
//! (`f64` or `f32`); the aliases below fix the default double-precision
//! instantiation. Aggregation always folds in canonical key order, so
//! results are independent of input-file row order and of how many threads
//! evaluate the leaves.

pub mod analytics;
pub mod dataset;
pub mod model;
pub mod report;
pub mod scalar;
pub mod units;

pub use scalar::Scalar;

/// Double-precision energy quantity (kWh base unit).
pub type Energy = units::EnergyQuantity<f64>;
/// Double-precision emission quantity (kgCO2 base unit).
pub type Emission = units::EmissionQuantity<f64>;
/// Double-precision validated dataset.
pub type Dataset = dataset::FleetDataset<f64>;
/// Double-precision nested result tree.
pub type Tree = analytics::ResultTree<f64>;
