//! Scalar abstraction shared by the floating-point parts of the toolkit.
//!
//! Error accumulation and simulation are exact integer code. Only the final
//! statistics, cost weights and network training are parameterised over a
//! floating-point type, so `f32` and `f64` instantiations produce the same
//! integer-level results.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// floating point: f32 or f64
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + Serialize + DeserializeOwned + 'static
{
    /// Lossy conversion from an exact integer accumulator.
    fn from_u128_lossy(v: u128) -> Self {
        Self::from_u128(v).unwrap_or_else(Self::infinity)
    }

    /// Conversion from an `f64` constant.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `2^exp` as a scalar.
pub(crate) fn pow2<T: Scalar>(exp: usize) -> T {
    T::lit(2.0).powi(exp as i32)
}
