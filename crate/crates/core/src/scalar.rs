//! Floating-point scalar abstraction the accounting engine is generic over.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Scalar type for all quantities and model arithmetic: f32 or f64.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
}

/// Lossless-enough conversion from the f64 values CSV parsing produces.
///
/// `FromPrimitive::from_f64` is total for f32/f64; the unwrap cannot fire
/// for the types this crate admits.
pub(crate) fn from_f64<S: Scalar>(value: f64) -> S {
    S::from_f64(value).expect("float scalar conversion")
}

pub(crate) fn from_u64<S: Scalar>(value: u64) -> S {
    S::from_u64(value).expect("integer to scalar conversion")
}
