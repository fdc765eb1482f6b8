//! Non-negative physical quantities in the engine's base units.
//!
//! Everything crosses module boundaries in kilowatt-hours and kilograms of
//! CO2; gigawatt-hours and mega-tons exist only as conversions on these
//! types. The scale factors are the exactly representable integers 1e6 and
//! 1e9, and conversion always divides by them (never multiplies by their
//! inexact reciprocals), so values on the 0.1 GWh / 0.01 Mt reporting grid
//! round-trip bit-exactly.

use std::iter::Sum;
use std::ops::{Add, Mul};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// kWh per GWh.
const KWH_PER_GWH: f64 = 1_000_000.0;
/// kgCO2 per MtCO2.
const KG_PER_MEGATON: f64 = 1_000_000_000.0;

/// Rejected quantity construction.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuantityError {
    #[error("quantity must be non-negative, got {value}")]
    Negative { value: f64 },
    #[error("quantity must be finite")]
    NonFinite,
}

fn check<S: Scalar>(value: S) -> Result<S, QuantityError> {
    if !value.is_finite() {
        return Err(QuantityError::NonFinite);
    }
    if value < S::zero() {
        return Err(QuantityError::Negative {
            value: value.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(value)
}

/// Electrical energy in kilowatt-hours, always `>= 0` and finite.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EnergyQuantity<S>(S);

impl<S: Scalar> EnergyQuantity<S> {
    pub fn zero() -> Self {
        EnergyQuantity(S::zero())
    }

    pub fn from_kwh(value: S) -> Result<Self, QuantityError> {
        check(value).map(EnergyQuantity)
    }

    pub fn from_gwh(value: S) -> Result<Self, QuantityError> {
        let scale = S::from_f64(KWH_PER_GWH).expect("scale factor");
        check(value).map(|v| EnergyQuantity(v * scale))
    }

    pub fn kwh(&self) -> S {
        self.0
    }

    pub fn gwh(&self) -> S {
        self.0 / S::from_f64(KWH_PER_GWH).expect("scale factor")
    }
}

impl<S: Scalar> Add for EnergyQuantity<S> {
    type Output = EnergyQuantity<S>;

    fn add(self, rhs: Self) -> Self {
        EnergyQuantity(self.0 + rhs.0)
    }
}

impl<S: Scalar> Sum for EnergyQuantity<S> {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::zero(), Add::add)
    }
}

/// Scale by a non-negative factor (population ratios, band fractions).
impl<S: Scalar> Mul<S> for EnergyQuantity<S> {
    type Output = EnergyQuantity<S>;

    fn mul(self, factor: S) -> Self {
        debug_assert!(factor >= S::zero(), "scale factor must be non-negative");
        EnergyQuantity(self.0 * factor)
    }
}

/// Carbon emissions in kilograms of CO2, always `>= 0` and finite.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmissionQuantity<S>(S);

impl<S: Scalar> EmissionQuantity<S> {
    pub fn zero() -> Self {
        EmissionQuantity(S::zero())
    }

    pub fn from_kg(value: S) -> Result<Self, QuantityError> {
        check(value).map(EmissionQuantity)
    }

    pub fn from_megatons(value: S) -> Result<Self, QuantityError> {
        let scale = S::from_f64(KG_PER_MEGATON).expect("scale factor");
        check(value).map(|v| EmissionQuantity(v * scale))
    }

    pub fn kg(&self) -> S {
        self.0
    }

    pub fn megatons(&self) -> S {
        self.0 / S::from_f64(KG_PER_MEGATON).expect("scale factor")
    }
}

impl<S: Scalar> Add for EmissionQuantity<S> {
    type Output = EmissionQuantity<S>;

    fn add(self, rhs: Self) -> Self {
        EmissionQuantity(self.0 + rhs.0)
    }
}

impl<S: Scalar> Sum for EmissionQuantity<S> {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::zero(), Add::add)
    }
}

impl<S: Scalar> Mul<S> for EmissionQuantity<S> {
    type Output = EmissionQuantity<S>;

    fn mul(self, factor: S) -> Self {
        debug_assert!(factor >= S::zero(), "scale factor must be non-negative");
        EmissionQuantity(self.0 * factor)
    }
}
