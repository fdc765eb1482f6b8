//! Derived metrics on top of the accounting engine: the nested result tree,
//! per-vehicle intensities, annual growth rates, population scaling, and
//! uncertainty bands.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

use crate::dataset::FleetDataset;
use crate::model::{self, ModelError, SalesRecord};
use crate::scalar::{from_f64, from_u64, Scalar};
use crate::units::{EmissionQuantity, EnergyQuantity};

/// Default half-width of the uncertainty band.
pub const DEFAULT_BAND_FRACTION: f64 = 0.10;

/// Exogenous ratios relating the tracked fleet to the full population for
/// one year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRatios<S> {
    pub year: u32,
    /// Vehicle stock divided by tracked sales; >= all_sales_to_top20.
    pub stock_to_top20: S,
    /// All-brand sales divided by tracked sales; >= 1.
    pub all_sales_to_top20: S,
}

/// Which population a scaled estimate should represent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingTarget {
    Stock,
    AllSales,
}

impl ScalingTarget {
    pub fn as_str(self) -> &'static str {
        match self {
            ScalingTarget::Stock => "stock",
            ScalingTarget::AllSales => "all-sales",
        }
    }
}

impl fmt::Display for ScalingTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScalingTarget {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stock" => Ok(ScalingTarget::Stock),
            "all-sales" => Ok(ScalingTarget::AllSales),
            other => Err(format!("unknown scaling target {other:?}; expected stock or all-sales")),
        }
    }
}

/// How the per-vehicle denominator is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FleetBasis {
    /// Sales accumulated from the first dataset year through the target
    /// year; approximates the on-road fleet.
    #[default]
    Cumulative,
    /// Sales of the target year only.
    SingleYear,
}

impl FleetBasis {
    pub fn as_str(self) -> &'static str {
        match self {
            FleetBasis::Cumulative => "cumulative",
            FleetBasis::SingleYear => "single-year",
        }
    }
}

impl fmt::Display for FleetBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FleetBasis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cumulative" => Ok(FleetBasis::Cumulative),
            "single-year" => Ok(FleetBasis::SingleYear),
            other => Err(format!(
                "unknown fleet basis {other:?}; expected cumulative or single-year"
            )),
        }
    }
}

/// What a derived metric ranges over.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    National,
    Zone(String),
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::National => f.write_str("national"),
            Scope::Zone(zone_id) => f.write_str(zone_id),
        }
    }
}

/// Per-vehicle electricity use and emissions of one scope-year.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntensityResult<S> {
    pub scope: Scope,
    pub year: u32,
    /// kWh per vehicle.
    pub energy_intensity: S,
    /// kgCO2 per vehicle.
    pub carbon_intensity: S,
    /// Vehicles used as denominator.
    pub fleet_count: u64,
}

/// Symmetric presentation band around a mid value; not a statistical
/// interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyBand<S> {
    pub low: S,
    pub mid: S,
    pub high: S,
}

/// A derived-metric precondition was violated.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("fleet count is zero for {scope} in {year}")]
    ZeroFleet { scope: String, year: u32 },
    #[error("growth rate undefined for non-positive base {previous}")]
    UndefinedBase { previous: f64 },
    #[error("no scaling ratios available for year {year}")]
    NoRatio { year: u32 },
    #[error("no data for year {year}; dataset covers {available:?}")]
    NoDataYear { year: u32, available: Vec<u32> },
    #[error("uncertainty fraction {fraction} outside [0, 1)")]
    BandFraction { fraction: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl AnalyticsError {
    pub fn code(&self) -> &'static str {
        match self {
            AnalyticsError::ZeroFleet { .. } => "ZERO_FLEET",
            AnalyticsError::UndefinedBase { .. } => "UNDEFINED_BASE",
            AnalyticsError::NoRatio { .. } => "NO_RATIO",
            AnalyticsError::NoDataYear { .. } => "NO_DATA_YEAR",
            AnalyticsError::BandFraction { .. } => "BAND_FRACTION",
            AnalyticsError::Model(_) => "MODEL",
        }
    }
}

/// Seasonal and annual consumption of one version in one zone-year, with
/// its emissions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VersionNode<S> {
    pub version_id: String,
    #[serde(rename = "mild_energy_kwh")]
    pub mild_energy: EnergyQuantity<S>,
    #[serde(rename = "harsh_energy_kwh")]
    pub harsh_energy: EnergyQuantity<S>,
    #[serde(rename = "energy_kwh")]
    pub energy: EnergyQuantity<S>,
    #[serde(rename = "emissions_kg")]
    pub emissions: EmissionQuantity<S>,
}

/// One model in one zone-year: the fold of its version nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelNode<S> {
    pub model_id: String,
    pub units: u64,
    #[serde(rename = "energy_kwh")]
    pub energy: EnergyQuantity<S>,
    #[serde(rename = "emissions_kg")]
    pub emissions: EmissionQuantity<S>,
    pub versions: Vec<VersionNode<S>>,
}

/// One zone-year: the fold of its model nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZoneNode<S> {
    pub zone_id: String,
    #[serde(rename = "energy_kwh")]
    pub energy: EnergyQuantity<S>,
    #[serde(rename = "emissions_kg")]
    pub emissions: EmissionQuantity<S>,
    pub models: Vec<ModelNode<S>>,
}

/// National totals of one year: the fold of its zone nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YearNode<S> {
    pub year: u32,
    #[serde(rename = "energy_kwh")]
    pub energy: EnergyQuantity<S>,
    #[serde(rename = "emissions_kg")]
    pub emissions: EmissionQuantity<S>,
    #[serde(rename = "energy_band_kwh", skip_serializing_if = "Option::is_none")]
    pub energy_band: Option<UncertaintyBand<S>>,
    #[serde(rename = "emissions_band_kg", skip_serializing_if = "Option::is_none")]
    pub emissions_band: Option<UncertaintyBand<S>>,
    pub zones: Vec<ZoneNode<S>>,
}

/// Nested totals for the requested years, ascending. Every internal node
/// equals the fold of its children in canonical child order, bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultTree<S> {
    pub years: Vec<YearNode<S>>,
}

impl<S: Scalar> ResultTree<S> {
    pub fn year(&self, year: u32) -> Option<&YearNode<S>> {
        self.years.iter().find(|y| y.year == year)
    }

    /// Attach symmetric bands to every year's national totals.
    pub fn with_uncertainty(mut self, fraction: S) -> Result<Self, AnalyticsError> {
        for year in &mut self.years {
            year.energy_band = Some(uncertainty_band(year.energy.kwh(), fraction)?);
            year.emissions_band = Some(uncertainty_band(year.emissions.kg(), fraction)?);
        }
        Ok(self)
    }
}

/// One zone of a population-scaled year.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaledZone<S> {
    pub zone_id: String,
    #[serde(rename = "energy_kwh")]
    pub energy: EnergyQuantity<S>,
    #[serde(rename = "emissions_kg")]
    pub emissions: EmissionQuantity<S>,
}

/// A year's totals multiplied up to a wider population.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaledResult<S> {
    pub year: u32,
    pub target: ScalingTarget,
    pub ratio: S,
    #[serde(rename = "energy_kwh")]
    pub energy: EnergyQuantity<S>,
    #[serde(rename = "emissions_kg")]
    pub emissions: EmissionQuantity<S>,
    /// Zone values use the single national ratio; they are uniform-ratio
    /// estimates, not zone-resolved observations.
    pub uniform_ratio: bool,
    pub zones: Vec<ScaledZone<S>>,
}

/// Annual percentage change from `previous` to `current`.
pub fn growth_rate<S: Scalar>(previous: S, current: S) -> Result<S, AnalyticsError> {
    if previous.is_nan() || previous <= S::zero() {
        return Err(AnalyticsError::UndefinedBase {
            previous: previous.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(from_f64::<S>(100.0) * (current - previous) / previous)
}

/// Symmetric band `mid * (1 -+ fraction)`; `fraction` must lie in [0, 1).
pub fn uncertainty_band<S: Scalar>(mid: S, fraction: S) -> Result<UncertaintyBand<S>, AnalyticsError> {
    let f = fraction.to_f64().unwrap_or(f64::NAN);
    if !(0.0..1.0).contains(&f) {
        return Err(AnalyticsError::BandFraction { fraction: f });
    }
    Ok(UncertaintyBand {
        low: mid * (S::one() - fraction),
        mid,
        high: mid * (S::one() + fraction),
    })
}

/// Per-vehicle intensities of one scope-year.
pub fn energy_intensity<S: Scalar>(
    scope: Scope,
    year: u32,
    energy: EnergyQuantity<S>,
    emissions: EmissionQuantity<S>,
    fleet_count: u64,
) -> Result<IntensityResult<S>, AnalyticsError> {
    if fleet_count == 0 {
        return Err(AnalyticsError::ZeroFleet {
            scope: scope.to_string(),
            year,
        });
    }
    let denominator = from_u64::<S>(fleet_count);
    Ok(IntensityResult {
        scope,
        year,
        energy_intensity: energy.kwh() / denominator,
        carbon_intensity: emissions.kg() / denominator,
        fleet_count,
    })
}

/// Vehicles behind a scope-year under the chosen basis.
pub fn fleet_count<S: Scalar>(
    dataset: &FleetDataset<S>,
    scope: &Scope,
    year: u32,
    basis: FleetBasis,
) -> u64 {
    dataset
        .sales_records()
        .filter(|s| match basis {
            FleetBasis::Cumulative => s.year <= year,
            FleetBasis::SingleYear => s.year == year,
        })
        .filter(|s| match scope {
            Scope::National => true,
            Scope::Zone(zone_id) => &s.zone_id == zone_id,
        })
        .map(|s| s.units)
        .sum()
}

/// Multiply a year's totals up to the selected population. One national
/// ratio applies uniformly to every zone.
pub fn scale_to_population<S: Scalar>(
    year_node: &YearNode<S>,
    ratios: &ScalingRatios<S>,
    target: ScalingTarget,
) -> Result<ScaledResult<S>, AnalyticsError> {
    if ratios.year != year_node.year {
        return Err(AnalyticsError::NoRatio { year: year_node.year });
    }
    let ratio = match target {
        ScalingTarget::Stock => ratios.stock_to_top20,
        ScalingTarget::AllSales => ratios.all_sales_to_top20,
    };
    Ok(ScaledResult {
        year: year_node.year,
        target,
        ratio,
        energy: year_node.energy * ratio,
        emissions: year_node.emissions * ratio,
        uniform_ratio: true,
        zones: year_node
            .zones
            .iter()
            .map(|z| ScaledZone {
                zone_id: z.zone_id.clone(),
                energy: z.energy * ratio,
                emissions: z.emissions * ratio,
            })
            .collect(),
    })
}

/// Evaluate the full nested accounting for the requested years.
///
/// Years may arrive in any order and with repeats; the tree is ascending
/// and deduplicated. Every requested year must have sales data. Leaf cells
/// are evaluated in parallel; all folds run in canonical key order, so the
/// result is identical for any worker count.
pub fn build_result_tree<S: Scalar>(
    dataset: &FleetDataset<S>,
    years: &[u32],
) -> Result<ResultTree<S>, AnalyticsError> {
    let available = dataset.years();
    let requested: BTreeSet<u32> = years.iter().copied().collect();
    for year in &requested {
        if !available.contains(year) {
            return Err(AnalyticsError::NoDataYear {
                year: *year,
                available,
            });
        }
    }

    // Leaf tasks in canonical (year, zone, model) order; dataset iteration
    // already yields them sorted.
    let tasks: Vec<SalesRecord> = requested
        .iter()
        .flat_map(|year| dataset.sales_in_year(*year))
        .collect();

    let leaves: Vec<ModelNode<S>> = tasks
        .par_iter()
        .map(|sale| build_model_node(dataset, sale))
        .collect::<Result<_, _>>()?;

    let mut years_out: Vec<YearNode<S>> = Vec::with_capacity(requested.len());
    for (sale, leaf) in tasks.iter().zip(leaves) {
        if years_out.last().map(|y| y.year) != Some(sale.year) {
            years_out.push(YearNode {
                year: sale.year,
                energy: EnergyQuantity::zero(),
                emissions: EmissionQuantity::zero(),
                energy_band: None,
                emissions_band: None,
                zones: Vec::new(),
            });
        }
        let year_node = years_out.last_mut().expect("year node exists");
        if year_node.zones.last().map(|z| z.zone_id.as_str()) != Some(sale.zone_id.as_str()) {
            year_node.zones.push(ZoneNode {
                zone_id: sale.zone_id.clone(),
                energy: EnergyQuantity::zero(),
                emissions: EmissionQuantity::zero(),
                models: Vec::new(),
            });
        }
        let zone_node = year_node.zones.last_mut().expect("zone node exists");
        zone_node.energy = zone_node.energy + leaf.energy;
        zone_node.emissions = zone_node.emissions + leaf.emissions;
        zone_node.models.push(leaf);
    }

    // Year totals fold the completed zone totals, not the model leaves, so
    // that every parent equals the sum of its direct children bit-exactly.
    for year_node in &mut years_out {
        let (energy, emissions) = year_node.zones.iter().fold(
            (EnergyQuantity::zero(), EmissionQuantity::zero()),
            |(e, x), zone| (e + zone.energy, x + zone.emissions),
        );
        year_node.energy = energy;
        year_node.emissions = emissions;
    }

    Ok(ResultTree { years: years_out })
}

/// One (model, zone, year) cell: version leaves folded in version-id order.
fn build_model_node<S: Scalar>(
    dataset: &FleetDataset<S>,
    sale: &SalesRecord,
) -> Result<ModelNode<S>, AnalyticsError> {
    let versions = dataset
        .versions(&sale.model_id, sale.year)
        .ok_or(ModelError::NoVersions)?;
    let zone = dataset
        .zone(&sale.zone_id, sale.year)
        .ok_or_else(|| ModelError::ZoneMismatch {
            sales_zone: sale.zone_id.clone(),
            param_zone: "<missing>".to_string(),
        })?;

    let mut node = ModelNode {
        model_id: sale.model_id.clone(),
        units: sale.units,
        energy: EnergyQuantity::zero(),
        emissions: EmissionQuantity::zero(),
        versions: Vec::with_capacity(versions.len()),
    };
    for version in versions {
        let consumption = model::version_annual_energy(version, sale, zone)?;
        let emissions = model::zone_emissions(consumption.annual, zone);
        node.energy = node.energy + consumption.annual;
        node.emissions = node.emissions + emissions;
        node.versions.push(VersionNode {
            version_id: version.version_id.clone(),
            mild_energy: consumption.mild,
            harsh_energy: consumption.harsh,
            energy: consumption.annual,
            emissions,
        });
    }
    Ok(node)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{VehicleVersion, ZoneParameters};
    use approx::assert_relative_eq;

    fn dataset() -> FleetDataset<f64> {
        let mut versions = Vec::new();
        let mut sales = Vec::new();
        let mut zones = Vec::new();
        for year in [2021u32, 2022] {
            for (model, battery, nedc) in [("m1", 60.0, 450.0), ("m2", 30.0, 300.0)] {
                versions.push(VehicleVersion {
                    model_id: model.into(),
                    version_id: "std".into(),
                    year,
                    battery_kwh: battery,
                    nedc_km: nedc,
                    sales_share: 0.7,
                    mild_degradation: 0.9,
                    harsh_degradation: 0.7,
                });
                versions.push(VehicleVersion {
                    model_id: model.into(),
                    version_id: "long".into(),
                    year,
                    battery_kwh: battery * 1.3,
                    nedc_km: nedc * 1.2,
                    sales_share: 0.3,
                    mild_degradation: 0.92,
                    harsh_degradation: 0.72,
                });
            }
            for (zone, mileage, factor) in [("north", 11000.0, 0.66), ("south", 13000.0, 0.54)] {
                zones.push(ZoneParameters {
                    zone_id: zone.into(),
                    year,
                    annual_mileage_km: mileage,
                    mild_season_fraction: 0.5,
                    emission_factor_kg_per_kwh: factor,
                });
                for (model, units) in [("m1", 1000u64), ("m2", 2500)] {
                    sales.push(SalesRecord {
                        model_id: model.into(),
                        zone_id: zone.into(),
                        year,
                        units: if year == 2022 { units * 2 } else { units },
                    });
                }
            }
        }
        FleetDataset::from_parts(versions, sales, zones, vec![]).unwrap()
    }

    #[test]
    fn growth_rate_reference_values() {
        assert_relative_eq!(growth_rate(187.0_f64, 465.52).unwrap(), 148.9, epsilon = 0.05);
        assert!((growth_rate(187.0_f64, 465.52).unwrap() - 149.0).abs() < 0.2);
        assert!((growth_rate(465.52_f64, 760.9).unwrap() - 63.4).abs() < 0.2);
        assert_eq!(growth_rate(42.0, 42.0).unwrap(), 0.0);
        assert_eq!(growth_rate(100.0, 50.0).unwrap(), -50.0);
    }

    #[test]
    fn growth_rate_requires_positive_base() {
        assert!(matches!(
            growth_rate(0.0, 10.0),
            Err(AnalyticsError::UndefinedBase { .. })
        ));
        let err = growth_rate(-5.0, 10.0).unwrap_err();
        assert_eq!(err.code(), "UNDEFINED_BASE");
    }

    #[test]
    fn band_reference_values() {
        let band = uncertainty_band(601.2, 0.10).unwrap();
        assert_relative_eq!(band.low, 541.08, max_relative = 1e-12);
        assert_eq!(band.mid, 601.2);
        assert_relative_eq!(band.high, 661.32, max_relative = 1e-12);

        let degenerate = uncertainty_band(601.2, 0.0).unwrap();
        assert_eq!((degenerate.low, degenerate.mid, degenerate.high), (601.2, 601.2, 601.2));
    }

    #[test]
    fn band_fraction_domain() {
        assert!(matches!(
            uncertainty_band(1.0, 1.0),
            Err(AnalyticsError::BandFraction { .. })
        ));
        assert!(uncertainty_band(1.0, -0.1).is_err());
        assert!(uncertainty_band(1.0, 0.999).is_ok());
    }

    #[test]
    fn intensity_reference_values() {
        let energy = EnergyQuantity::<f64>::from_gwh(3053.6).unwrap();
        let emissions = EmissionQuantity::<f64>::from_megatons(1.73).unwrap();
        let r = energy_intensity(Scope::National, 2022, energy, emissions, 2_788_700).unwrap();
        assert_eq!(r.energy_intensity.round(), 1095.0);
        assert_eq!(r.carbon_intensity.round(), 620.0);
        assert!((r.carbon_intensity - 621.0).abs() / 621.0 < 0.005);
    }

    #[test]
    fn intensity_identity_and_zero_fleet() {
        let one_kwh = EnergyQuantity::from_kwh(1.0).unwrap();
        let r = energy_intensity(Scope::National, 2020, one_kwh, EmissionQuantity::zero(), 1).unwrap();
        assert_eq!(r.energy_intensity, 1.0);

        let err = energy_intensity(
            Scope::Zone("north".into()),
            2020,
            one_kwh,
            EmissionQuantity::zero(),
            0,
        )
        .unwrap_err();
        assert_eq!(err.code(), "ZERO_FLEET");
    }

    #[test]
    fn intensity_round_trips_against_scope_total() {
        let ds = dataset();
        let tree = build_result_tree(&ds, &[2022]).unwrap();
        let year = tree.year(2022).unwrap();
        let fleet = fleet_count(&ds, &Scope::National, 2022, FleetBasis::Cumulative);
        assert_eq!(fleet, 2 * (1000 + 2500) * 3); // both years, both zones
        let r = energy_intensity(Scope::National, 2022, year.energy, year.emissions, fleet).unwrap();
        assert_relative_eq!(
            r.energy_intensity * fleet as f64,
            year.energy.kwh(),
            max_relative = 1e-9
        );
        assert_relative_eq!(
            r.carbon_intensity * fleet as f64,
            year.emissions.kg(),
            max_relative = 1e-9
        );
    }

    #[test]
    fn fleet_count_bases() {
        let ds = dataset();
        let national_2021 = fleet_count(&ds, &Scope::National, 2021, FleetBasis::Cumulative);
        assert_eq!(national_2021, 7000);
        assert_eq!(fleet_count(&ds, &Scope::National, 2021, FleetBasis::SingleYear), 7000);
        assert_eq!(fleet_count(&ds, &Scope::National, 2022, FleetBasis::Cumulative), 21000);
        assert_eq!(fleet_count(&ds, &Scope::National, 2022, FleetBasis::SingleYear), 14000);
        assert_eq!(
            fleet_count(&ds, &Scope::Zone("north".into()), 2022, FleetBasis::Cumulative),
            10500
        );
        assert_eq!(fleet_count(&ds, &Scope::Zone("absent".into()), 2022, FleetBasis::Cumulative), 0);
    }

    #[test]
    fn tree_parents_equal_child_sums_exactly() {
        let tree = build_result_tree(&dataset(), &[2021, 2022]).unwrap();
        assert_eq!(tree.years.len(), 2);
        for year in &tree.years {
            let mut year_energy = 0.0;
            let mut year_emissions = 0.0;
            for zone in &year.zones {
                let mut zone_energy = 0.0;
                let mut zone_emissions = 0.0;
                for model in &zone.models {
                    let mut model_energy = 0.0;
                    let mut model_emissions = 0.0;
                    for version in &model.versions {
                        assert_eq!(
                            version.energy.kwh(),
                            version.mild_energy.kwh() + version.harsh_energy.kwh()
                        );
                        model_energy += version.energy.kwh();
                        model_emissions += version.emissions.kg();
                    }
                    assert_eq!(model.energy.kwh(), model_energy);
                    assert_eq!(model.emissions.kg(), model_emissions);
                    zone_energy += model.energy.kwh();
                    zone_emissions += model.emissions.kg();
                }
                assert_eq!(zone.energy.kwh(), zone_energy);
                assert_eq!(zone.emissions.kg(), zone_emissions);
                year_energy += zone.energy.kwh();
                year_emissions += zone.emissions.kg();
            }
            assert_eq!(year.energy.kwh(), year_energy);
            assert_eq!(year.emissions.kg(), year_emissions);
        }
    }

    #[test]
    fn tree_zone_emissions_match_direct_factor_application() {
        let ds = dataset();
        let tree = build_result_tree(&ds, &[2021]).unwrap();
        for zone_node in &tree.year(2021).unwrap().zones {
            let params = ds.zone(&zone_node.zone_id, 2021).unwrap();
            let direct = model::zone_emissions(zone_node.energy, params);
            assert_relative_eq!(zone_node.emissions.kg(), direct.kg(), max_relative = 1e-12);
        }
    }

    #[test]
    fn tree_rejects_absent_year_and_accepts_empty_filter() {
        let ds = dataset();
        let err = build_result_tree(&ds, &[2019]).unwrap_err();
        assert_eq!(err.code(), "NO_DATA_YEAR");
        assert!(matches!(err, AnalyticsError::NoDataYear { year: 2019, .. }));

        let empty = build_result_tree(&ds, &[]).unwrap();
        assert!(empty.years.is_empty());
    }

    #[test]
    fn tree_year_order_is_ascending_and_deduplicated() {
        let tree = build_result_tree(&dataset(), &[2022, 2021, 2022]).unwrap();
        let years: Vec<u32> = tree.years.iter().map(|y| y.year).collect();
        assert_eq!(years, vec![2021, 2022]);
    }

    #[test]
    fn with_uncertainty_preserves_mid_and_orders_bounds() {
        let tree = build_result_tree(&dataset(), &[2021])
            .unwrap()
            .with_uncertainty(0.10)
            .unwrap();
        let year = tree.year(2021).unwrap();
        let band = year.energy_band.as_ref().unwrap();
        assert_eq!(band.mid, year.energy.kwh());
        assert!(band.low < band.mid && band.mid < band.high);
        assert_relative_eq!(band.mid - band.low, band.high - band.mid, max_relative = 1e-9);
    }

    #[test]
    fn scaling_reference_values_and_identity() {
        let ratios = ScalingRatios {
            year: 2020,
            stock_to_top20: 7.9,
            all_sales_to_top20: 2.1,
        };
        let year_node = YearNode {
            year: 2020,
            energy: EnergyQuantity::<f64>::from_gwh(601.2).unwrap(),
            emissions: EmissionQuantity::from_megatons(0.35).unwrap(),
            energy_band: None,
            emissions_band: None,
            zones: vec![],
        };
        let scaled = scale_to_population(&year_node, &ratios, ScalingTarget::Stock).unwrap();
        assert_relative_eq!(scaled.energy.gwh(), 4749.48, max_relative = 1e-9);
        assert!((scaled.energy.gwh() - 4774.0).abs() / 4774.0 < 0.01);
        assert!(scaled.uniform_ratio);

        let identity_ratios = ScalingRatios {
            year: 2020,
            stock_to_top20: 1.0,
            all_sales_to_top20: 1.0,
        };
        let same = scale_to_population(&year_node, &identity_ratios, ScalingTarget::AllSales).unwrap();
        assert_eq!(same.energy.kwh(), year_node.energy.kwh());
        assert_eq!(same.emissions.kg(), year_node.emissions.kg());
    }

    #[test]
    fn scaling_commutes_with_zone_summation() {
        let ds = dataset();
        let tree = build_result_tree(&ds, &[2021]).unwrap();
        let year = tree.year(2021).unwrap();
        let ratios = ScalingRatios {
            year: 2021,
            stock_to_top20: 4.2,
            all_sales_to_top20: 1.8,
        };
        let scaled = scale_to_population(year, &ratios, ScalingTarget::Stock).unwrap();
        let zone_sum: f64 = scaled.zones.iter().map(|z| z.energy.kwh()).sum();
        assert_relative_eq!(zone_sum, scaled.energy.kwh(), max_relative = 1e-12);
    }

    #[test]
    fn scaling_requires_matching_year() {
        let year_node = YearNode {
            year: 2022,
            energy: EnergyQuantity::<f64>::from_gwh(1.0).unwrap(),
            emissions: EmissionQuantity::zero(),
            energy_band: None,
            emissions_band: None,
            zones: vec![],
        };
        let ratios = ScalingRatios {
            year: 2021,
            stock_to_top20: 4.2,
            all_sales_to_top20: 1.8,
        };
        let err = scale_to_population(&year_node, &ratios, ScalingTarget::Stock).unwrap_err();
        assert_eq!(err.code(), "NO_RATIO");
    }

    #[test]
    fn tree_is_identical_for_any_worker_count() {
        let ds = dataset();
        let reference = build_result_tree(&ds, &[2021, 2022]).unwrap();
        for threads in [1usize, 2, 8] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            let tree = pool.install(|| build_result_tree(&ds, &[2021, 2022]).unwrap());
            assert_eq!(tree, reference);
        }
    }
}
