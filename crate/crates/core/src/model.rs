//! Domain types and the pure fleet-accounting arithmetic.
//!
//! A fleet is partitioned by model, version, climate zone and year. Each
//! version's seasonal electricity use follows from its rated range, battery
//! energy and a seasonal range-degradation coefficient; totals fold upward
//! version -> model -> zone -> nation. Emissions apply the zone-year grid
//! emission factor to zone energy.
//!
//! All operations are pure and safe to evaluate concurrently; every
//! aggregation folds in canonical key order (lexicographic ids) so results
//! never depend on input order or scheduling.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{from_u64, Scalar};
use crate::units::{EmissionQuantity, EnergyQuantity, QuantityError};

/// Version shares of one (model, year) must sum to 1 within this tolerance.
pub const SHARE_SUM_TOLERANCE: f64 = 1e-6;

/// Hard upper bound for seasonal degradation coefficients.
pub const DEGRADATION_HARD_MAX: f64 = 1.5;

/// Degradation outside (0.5, 1.0] is accepted but flagged as a warning.
pub const DEGRADATION_WARN_MIN: f64 = 0.5;
pub const DEGRADATION_WARN_MAX: f64 = 1.0;

/// One purchasable variant of a model in one calendar year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleVersion<S> {
    pub model_id: String,
    pub version_id: String,
    pub year: u32,
    /// Battery energy per full charge, kWh.
    pub battery_kwh: S,
    /// Rated range per full charge, km.
    pub nedc_km: S,
    /// National share of the model's sales taken by this version.
    pub sales_share: S,
    /// Range-degradation coefficient applied in spring/autumn.
    pub mild_degradation: S,
    /// Range-degradation coefficient applied in summer/winter.
    pub harsh_degradation: S,
}

/// Units of one model sold in one climate zone in one year.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SalesRecord {
    pub model_id: String,
    pub zone_id: String,
    pub year: u32,
    pub units: u64,
}

/// Per-zone-per-year driving and grid parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneParameters<S> {
    pub zone_id: String,
    pub year: u32,
    /// Average distance driven per vehicle over the whole year, km.
    pub annual_mileage_km: S,
    /// Share of annual mileage driven in spring/autumn, in [0, 1].
    pub mild_season_fraction: S,
    /// Grid carbon intensity, kgCO2 per kWh.
    pub emission_factor_kg_per_kwh: S,
}

/// Seasonal split of one version's annual consumption.
///
/// `annual` is constructed as `mild + harsh`, so the identity holds
/// bit-exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeasonalConsumption<S> {
    pub mild: EnergyQuantity<S>,
    pub harsh: EnergyQuantity<S>,
    pub annual: EnergyQuantity<S>,
}

impl<S: Scalar> SeasonalConsumption<S> {
    pub fn new(mild: EnergyQuantity<S>, harsh: EnergyQuantity<S>) -> Self {
        SeasonalConsumption {
            mild,
            harsh,
            annual: mild + harsh,
        }
    }
}

/// Violated precondition or invariant of a model operation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("mismatched years: version {version}, sales {sales}, zone parameters {zone}")]
    YearMismatch { version: u32, sales: u32, zone: u32 },
    #[error("sales record for model {sales_model} paired with version of model {version_model}")]
    ModelMismatch {
        version_model: String,
        sales_model: String,
    },
    #[error("sales record in zone {sales_zone} paired with parameters for zone {param_zone}")]
    ZoneMismatch {
        sales_zone: String,
        param_zone: String,
    },
    #[error("{op} produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("version shares for model {model_id} year {year} sum to {sum}, expected 1")]
    ShareSum {
        model_id: String,
        year: u32,
        sum: f64,
    },
    #[error("no versions supplied")]
    NoVersions,
    #[error("duplicate zone {zone_id} in national aggregation")]
    DuplicateZone { zone_id: String },
    #[error(transparent)]
    Quantity(#[from] QuantityError),
}

fn check_alignment<S: Scalar>(
    version: &VehicleVersion<S>,
    sales: &SalesRecord,
    zone: &ZoneParameters<S>,
) -> Result<(), ModelError> {
    if version.year != sales.year || sales.year != zone.year {
        return Err(ModelError::YearMismatch {
            version: version.year,
            sales: sales.year,
            zone: zone.year,
        });
    }
    if version.model_id != sales.model_id {
        return Err(ModelError::ModelMismatch {
            version_model: version.model_id.clone(),
            sales_model: sales.model_id.clone(),
        });
    }
    if sales.zone_id != zone.zone_id {
        return Err(ModelError::ZoneMismatch {
            sales_zone: sales.zone_id.clone(),
            param_zone: zone.zone_id.clone(),
        });
    }
    Ok(())
}

fn seasonal_energy<S: Scalar>(
    version: &VehicleVersion<S>,
    sales: &SalesRecord,
    seasonal_mileage_km: S,
    degradation: S,
    op: &'static str,
) -> Result<EnergyQuantity<S>, ModelError> {
    let per_vehicle_kwh = seasonal_mileage_km * version.battery_kwh / (degradation * version.nedc_km);
    let kwh = version.sales_share * from_u64::<S>(sales.units) * per_vehicle_kwh;
    if !kwh.is_finite() {
        return Err(ModelError::NonFinite { op });
    }
    Ok(EnergyQuantity::from_kwh(kwh)?)
}

/// Spring/autumn consumption of one version in one zone-year, kWh:
/// `share * units * (f * mileage * battery) / (mild_degradation * range)`.
pub fn mild_season_energy<S: Scalar>(
    version: &VehicleVersion<S>,
    sales: &SalesRecord,
    zone: &ZoneParameters<S>,
) -> Result<EnergyQuantity<S>, ModelError> {
    check_alignment(version, sales, zone)?;
    let mileage = zone.mild_season_fraction * zone.annual_mileage_km;
    seasonal_energy(version, sales, mileage, version.mild_degradation, "mild_season_energy")
}

/// Summer/winter consumption of one version in one zone-year, kWh:
/// `share * units * ((1 - f) * mileage * battery) / (harsh_degradation * range)`.
pub fn harsh_season_energy<S: Scalar>(
    version: &VehicleVersion<S>,
    sales: &SalesRecord,
    zone: &ZoneParameters<S>,
) -> Result<EnergyQuantity<S>, ModelError> {
    check_alignment(version, sales, zone)?;
    let mileage = (S::one() - zone.mild_season_fraction) * zone.annual_mileage_km;
    seasonal_energy(version, sales, mileage, version.harsh_degradation, "harsh_season_energy")
}

/// Annual consumption of one version as the sum of its two seasons.
pub fn version_annual_energy<S: Scalar>(
    version: &VehicleVersion<S>,
    sales: &SalesRecord,
    zone: &ZoneParameters<S>,
) -> Result<SeasonalConsumption<S>, ModelError> {
    let mild = mild_season_energy(version, sales, zone)?;
    let harsh = harsh_season_energy(version, sales, zone)?;
    Ok(SeasonalConsumption::new(mild, harsh))
}

/// Validate that version shares of one model-year sum to 1.
pub fn check_share_sum<S: Scalar>(versions: &[VehicleVersion<S>]) -> Result<(), ModelError> {
    let first = versions.first().ok_or(ModelError::NoVersions)?;
    let sum = versions
        .iter()
        .fold(S::zero(), |acc, v| acc + v.sales_share)
        .to_f64()
        .unwrap_or(f64::NAN);
    let deviation = (sum - 1.0).abs();
    if deviation.is_nan() || deviation > SHARE_SUM_TOLERANCE {
        return Err(ModelError::ShareSum {
            model_id: first.model_id.clone(),
            year: first.year,
            sum,
        });
    }
    Ok(())
}

/// Annual consumption of one model in one zone-year: the version annual
/// values folded in version-id order.
pub fn model_energy<S: Scalar>(
    versions: &[VehicleVersion<S>],
    sales: &SalesRecord,
    zone: &ZoneParameters<S>,
) -> Result<EnergyQuantity<S>, ModelError> {
    let first = versions.first().ok_or(ModelError::NoVersions)?;
    for v in versions {
        if v.model_id != first.model_id {
            return Err(ModelError::ModelMismatch {
                version_model: v.model_id.clone(),
                sales_model: first.model_id.clone(),
            });
        }
        if v.year != first.year {
            return Err(ModelError::YearMismatch {
                version: v.year,
                sales: sales.year,
                zone: zone.year,
            });
        }
    }
    check_share_sum(versions)?;

    let mut ordered: Vec<&VehicleVersion<S>> = versions.iter().collect();
    ordered.sort_by(|a, b| a.version_id.cmp(&b.version_id));
    let mut total = EnergyQuantity::zero();
    for version in ordered {
        total = total + version_annual_energy(version, sales, zone)?.annual;
    }
    Ok(total)
}

/// Zone-year consumption: model totals folded in model-id order.
pub fn zone_energy<S: Scalar>(model_results: &[(String, EnergyQuantity<S>)]) -> EnergyQuantity<S> {
    let mut ordered: Vec<&(String, EnergyQuantity<S>)> = model_results.iter().collect();
    ordered.sort_by(|a, b| a.0.cmp(&b.0));
    ordered
        .into_iter()
        .fold(EnergyQuantity::zero(), |acc, (_, e)| acc + *e)
}

/// National consumption for one year: zone totals folded in zone-id order.
/// Each zone may appear at most once.
pub fn national_energy<S: Scalar>(
    zone_results: &[(String, EnergyQuantity<S>)],
) -> Result<EnergyQuantity<S>, ModelError> {
    let mut ordered: Vec<&(String, EnergyQuantity<S>)> = zone_results.iter().collect();
    ordered.sort_by(|a, b| a.0.cmp(&b.0));
    for pair in ordered.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(ModelError::DuplicateZone {
                zone_id: pair[0].0.clone(),
            });
        }
    }
    Ok(ordered
        .into_iter()
        .fold(EnergyQuantity::zero(), |acc, (_, e)| acc + *e))
}

/// Operational emissions of a zone-year: grid factor times zone energy.
pub fn zone_emissions<S: Scalar>(
    energy: EnergyQuantity<S>,
    zone: &ZoneParameters<S>,
) -> EmissionQuantity<S> {
    let kg = zone.emission_factor_kg_per_kwh * energy.kwh();
    EmissionQuantity::from_kg(kg).expect("emission factor must be non-negative and finite")
}

/// National emissions for one year: zone values folded in zone-id order.
pub fn national_emissions<S: Scalar>(
    zone_values: &[(String, EmissionQuantity<S>)],
) -> Result<EmissionQuantity<S>, ModelError> {
    let mut ordered: Vec<&(String, EmissionQuantity<S>)> = zone_values.iter().collect();
    ordered.sort_by(|a, b| a.0.cmp(&b.0));
    for pair in ordered.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(ModelError::DuplicateZone {
                zone_id: pair[0].0.clone(),
            });
        }
    }
    Ok(ordered
        .into_iter()
        .fold(EmissionQuantity::zero(), |acc, (_, x)| acc + *x))
}
