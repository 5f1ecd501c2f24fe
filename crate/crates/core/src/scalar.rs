//! Floating-point abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FloatConst, NumAssign, NumCast};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar type the simulator and metrics are generic over.
///
/// Implemented for `f32` and `f64`. Tolerance defaults are written as `f64`
/// literals and narrowed through [`Scalar::lit`], so `f32` users should
/// supply their own (looser) tolerances.
pub trait Scalar:
    Float
    + FloatConst
    + NumAssign
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Number of significant decimal digits needed for a lossless text round trip.
    const ROUND_TRIP_DIGITS: usize;

    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(v: f64) -> Self {
        <Self as NumCast>::from(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_usize(v: usize) -> Self {
        <Self as NumCast>::from(v).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        <f64 as NumCast>::from(self).unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    const ROUND_TRIP_DIGITS: usize = 9;
}

impl Scalar for f64 {
    const ROUND_TRIP_DIGITS: usize = 17;
}

/// Formats `v` in scientific notation with enough digits to parse back bit-exactly.
pub fn format_round_trip<S: Scalar>(v: S) -> String {
    format!("{:.*e}", S::ROUND_TRIP_DIGITS - 1, v)
}
