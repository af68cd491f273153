//! Floating-point abstraction used by every quantity with units.
//!
//! The engine never does arithmetic that depends on the width of the scalar
//! beyond its precision: random draws are made in `f64` and compared in
//! `f64`, so a trial produces the same outcome sequence whether it is
//! instantiated with `f32` or `f64` (as long as the configuration values are
//! exactly representable in both).

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive};
use serde::{de::DeserializeOwned, Serialize};

/// Scalar type for times, payoffs, and probabilities.
///
/// Blanket-implemented for anything float-like that can round-trip through
/// `f64` and serde, which in practice means `f32` and `f64`.
pub trait Scalar:
    Float + FromPrimitive + Debug + Display + Serialize + DeserializeOwned + Send + Sync + 'static
{
    /// Lossy view of the value as `f64`, used for RNG comparisons and
    /// formatting. Exact for `f32` and `f64`.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar representable as f64")
    }
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + Debug
        + Display
        + Serialize
        + DeserializeOwned
        + Send
        + Sync
        + 'static
{
}

/// Converts an `f64` constant into the working scalar.
///
/// Panics if the conversion is not representable, which cannot happen for
/// the finite literals this crate feeds it.
pub fn from_f64<S: Scalar>(value: f64) -> S {
    S::from_f64(value).expect("finite f64 converts to scalar")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_f32_and_f64() {
        assert_eq!(from_f64::<f32>(0.25), 0.25f32);
        assert_eq!(from_f64::<f64>(0.25), 0.25f64);
        assert_eq!(0.25f32.as_f64(), 0.25f64);
        assert_eq!(3.0f64.as_f64(), 3.0);
    }
}
