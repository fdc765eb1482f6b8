//! Shared helpers for the integration suites: a per-vehicle enumeration
//! oracle that recomputes every tree node the slow way, and a seeded random
//! dataset generator.
//!
//! Compiled once per test target; not every target uses every helper.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use bevcharge::analytics::{ResultTree, ScalingRatios};
use bevcharge::dataset::FleetDataset;
use bevcharge::model::{SalesRecord, VehicleVersion, ZoneParameters};
use rand::prelude::*;
use rand_chacha::ChaCha20Rng;

pub fn fixture_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Raw rows of a generated dataset, before canonical storage.
#[derive(Debug, Clone)]
pub struct RawDataset {
    pub versions: Vec<VehicleVersion<f64>>,
    pub sales: Vec<SalesRecord>,
    pub zones: Vec<ZoneParameters<f64>>,
    pub ratios: Vec<ScalingRatios<f64>>,
}

impl RawDataset {
    pub fn build(&self) -> FleetDataset<f64> {
        FleetDataset::from_parts(
            self.versions.clone(),
            self.sales.clone(),
            self.zones.clone(),
            self.ratios.clone(),
        )
        .expect("generated dataset must validate")
    }

    pub fn total_units(&self) -> u64 {
        self.sales.iter().map(|s| s.units).sum()
    }

    /// Same dataset with every sales count multiplied by `factor`.
    pub fn scaled_sales(&self, factor: u64) -> RawDataset {
        let mut out = self.clone();
        for s in &mut out.sales {
            s.units *= factor;
        }
        out
    }

    /// Same rows in a deterministically shuffled order.
    pub fn permuted(&self, seed: u64) -> RawDataset {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut out = self.clone();
        out.versions.shuffle(&mut rng);
        out.sales.shuffle(&mut rng);
        out.zones.shuffle(&mut rng);
        out
    }
}

/// Randomized dataset within the oracle's tractable envelope: at most
/// `max_models` models with 1-5 versions each, 1-3 zones, 1-3 years, and
/// `max_units` vehicles in total.
pub fn random_dataset(seed: u64, max_models: usize, max_units: u64) -> RawDataset {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let n_models = rng.random_range(1..=max_models);
    let n_zones = rng.random_range(1..=3usize);
    let year_lo = rng.random_range(2019..=2021u32);
    let n_years = rng.random_range(1..=3u32);
    let years: Vec<u32> = (year_lo..year_lo + n_years).collect();

    let mut versions = Vec::new();
    let mut zones = Vec::new();
    let mut cells: Vec<(String, String, u32)> = Vec::new();

    for z in 0..n_zones {
        let zone_id = format!("zone{z}");
        for &year in &years {
            zones.push(ZoneParameters {
                zone_id: zone_id.clone(),
                year,
                annual_mileage_km: rng.random_range(5_000.0..20_000.0),
                mild_season_fraction: rng.random_range(0.0..=1.0),
                emission_factor_kg_per_kwh: rng.random_range(0.3..1.0),
            });
        }
    }

    for m in 0..n_models {
        let model_id = format!("model{m:02}");
        for &year in &years {
            let n_versions = rng.random_range(1..=5usize);
            let weights: Vec<f64> = (0..n_versions).map(|_| rng.random_range(0.1..1.0)).collect();
            let total: f64 = weights.iter().sum();
            for (v, w) in weights.iter().enumerate() {
                versions.push(VehicleVersion {
                    model_id: model_id.clone(),
                    version_id: format!("v{v}"),
                    year,
                    battery_kwh: rng.random_range(10.0..100.0),
                    nedc_km: rng.random_range(100.0..700.0),
                    sales_share: w / total,
                    mild_degradation: rng.random_range(0.51..=1.0),
                    harsh_degradation: rng.random_range(0.51..=1.0),
                });
            }
            for z in 0..n_zones {
                cells.push((model_id.clone(), format!("zone{z}"), year));
            }
        }
    }

    // Split a global unit budget over the cells; zero cells are dropped.
    let budget = rng.random_range(max_units / 2..=max_units);
    let weights: Vec<f64> = (0..cells.len()).map(|_| rng.random_range(0.0..1.0)).collect();
    let total: f64 = weights.iter().sum::<f64>().max(f64::MIN_POSITIVE);
    let mut sales = Vec::new();
    for ((model_id, zone_id, year), w) in cells.into_iter().zip(weights) {
        let units = (budget as f64 * w / total).floor() as u64;
        if units > 0 {
            sales.push(SalesRecord { model_id, zone_id, year, units });
        }
    }
    if sales.is_empty() {
        // Degenerate draw; keep the dataset non-empty so year filters resolve.
        sales.push(SalesRecord {
            model_id: "model00".into(),
            zone_id: "zone0".into(),
            year: years[0],
            units: 1,
        });
    }

    let ratios = years
        .iter()
        .map(|&year| {
            let all_sales = rng.random_range(1.0..3.0);
            ScalingRatios {
                year,
                stock_to_top20: all_sales + rng.random_range(0.0..5.0),
                all_sales_to_top20: all_sales,
            }
        })
        .collect();

    RawDataset { versions, sales, zones, ratios }
}

/// (year, zone, model, version) identifying one leaf.
pub type VersionKey = (u32, String, String, String);
/// (mild, harsh, annual, emissions) of one leaf.
pub type VersionValue = (f64, f64, f64, f64);

/// Node values recomputed by enumerating every sold vehicle one at a time.
#[derive(Debug, Default)]
pub struct OracleTree {
    pub versions: BTreeMap<VersionKey, VersionValue>,
    /// (year, zone, model) -> (energy, emissions)
    pub models: BTreeMap<(u32, String, String), (f64, f64)>,
    /// (year, zone) -> (energy, emissions)
    pub zones: BTreeMap<(u32, String), (f64, f64)>,
    /// year -> (energy, emissions)
    pub years: BTreeMap<u32, (f64, f64)>,
}

/// Computes every node by summing one vehicle at a time, in input-row order,
/// without the engine's quantity types or canonical fold.
pub fn oracle_tree(raw: &RawDataset, years: &[u32]) -> OracleTree {
    let mut out = OracleTree::default();
    for sale in &raw.sales {
        if !years.contains(&sale.year) {
            continue;
        }
        let zone = raw
            .zones
            .iter()
            .find(|z| z.zone_id == sale.zone_id && z.year == sale.year)
            .expect("zone exists");
        for version in &raw.versions {
            if version.model_id != sale.model_id || version.year != sale.year {
                continue;
            }
            let per_mild = zone.mild_season_fraction * zone.annual_mileage_km * version.battery_kwh
                / (version.mild_degradation * version.nedc_km);
            let per_harsh = (1.0 - zone.mild_season_fraction) * zone.annual_mileage_km
                * version.battery_kwh
                / (version.harsh_degradation * version.nedc_km);
            let mut mild = 0.0;
            let mut harsh = 0.0;
            for _ in 0..sale.units {
                mild += version.sales_share * per_mild;
                harsh += version.sales_share * per_harsh;
            }
            let annual = mild + harsh;
            let emissions = zone.emission_factor_kg_per_kwh * annual;

            let v = out
                .versions
                .entry((
                    sale.year,
                    sale.zone_id.clone(),
                    sale.model_id.clone(),
                    version.version_id.clone(),
                ))
                .or_insert((0.0, 0.0, 0.0, 0.0));
            v.0 += mild;
            v.1 += harsh;
            v.2 += annual;
            v.3 += emissions;

            let m = out
                .models
                .entry((sale.year, sale.zone_id.clone(), sale.model_id.clone()))
                .or_insert((0.0, 0.0));
            m.0 += annual;
            m.1 += emissions;

            let z = out.zones.entry((sale.year, sale.zone_id.clone())).or_insert((0.0, 0.0));
            z.0 += annual;
            z.1 += emissions;

            let y = out.years.entry(sale.year).or_insert((0.0, 0.0));
            y.0 += annual;
            y.1 += emissions;
        }
    }
    out
}

pub fn assert_close(label: &str, got: f64, want: f64, max_relative: f64) {
    let scale = want.abs().max(got.abs());
    if scale == 0.0 {
        assert_eq!(got, want, "{label}");
        return;
    }
    let rel = (got - want).abs() / scale;
    assert!(
        rel <= max_relative,
        "{label}: got {got}, want {want}, relative error {rel:e} > {max_relative:e}"
    );
}

/// Asserts every node of an engine tree against the oracle.
pub fn assert_tree_matches_oracle(tree: &ResultTree<f64>, oracle: &OracleTree, tol: f64) {
    for year_node in &tree.years {
        let (oe, ox) = oracle.years.get(&year_node.year).copied().unwrap_or((0.0, 0.0));
        assert_close(&format!("year {}", year_node.year), year_node.energy.kwh(), oe, tol);
        assert_close(&format!("year {} emissions", year_node.year), year_node.emissions.kg(), ox, tol);
        for zone_node in &year_node.zones {
            let key = (year_node.year, zone_node.zone_id.clone());
            let (oe, ox) = oracle.zones.get(&key).copied().unwrap_or((0.0, 0.0));
            assert_close(&format!("zone {key:?}"), zone_node.energy.kwh(), oe, tol);
            assert_close(&format!("zone {key:?} emissions"), zone_node.emissions.kg(), ox, tol);
            for model_node in &zone_node.models {
                let key = (year_node.year, zone_node.zone_id.clone(), model_node.model_id.clone());
                let (oe, ox) = oracle.models.get(&key).copied().unwrap_or((0.0, 0.0));
                assert_close(&format!("model {key:?}"), model_node.energy.kwh(), oe, tol);
                assert_close(&format!("model {key:?} emissions"), model_node.emissions.kg(), ox, tol);
                for version_node in &model_node.versions {
                    let key = (
                        year_node.year,
                        zone_node.zone_id.clone(),
                        model_node.model_id.clone(),
                        version_node.version_id.clone(),
                    );
                    let (om, oh, oa, ox) =
                        oracle.versions.get(&key).copied().unwrap_or((0.0, 0.0, 0.0, 0.0));
                    assert_close(&format!("version {key:?} mild"), version_node.mild_energy.kwh(), om, tol);
                    assert_close(&format!("version {key:?} harsh"), version_node.harsh_energy.kwh(), oh, tol);
                    assert_close(&format!("version {key:?} annual"), version_node.energy.kwh(), oa, tol);
                    assert_close(&format!("version {key:?} emissions"), version_node.emissions.kg(), ox, tol);
                }
            }
        }
    }
    // The oracle must not know nodes the engine lacks.
    let engine_versions: usize = tree
        .years
        .iter()
        .flat_map(|y| &y.zones)
        .flat_map(|z| &z.models)
        .map(|m| m.versions.len())
        .sum();
    assert_eq!(engine_versions, oracle.versions.len(), "node count mismatch");
}
