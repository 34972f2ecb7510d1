//! Floating-point abstraction.
//!
//! All numerical code in this crate is generic over [`Scalar`], which is
//! implemented for `f32` and `f64`. The crate root exports `f64`-concrete
//! type aliases for the common case; pick `f32` explicitly when memory
//! pressure matters more than precision.

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::fmt::{Debug, Display};

/// Floating-point scalar usable by every algorithm in this crate.
///
/// The bound set is deliberately wide so downstream code can be written
/// naturally: `Float` brings the transcendental functions, the `*Primitive`
/// traits allow lossless-enough conversion of literals and counters, and the
/// serde bounds let models containing `T` round-trip through JSON.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssignOps
    + Debug
    + Display
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Convert an `f64` constant, panicking only for values outside the
    /// target type's range (which would be a programming error for the
    /// fixed constants this is used with).
    fn from_f64_const(x: f64) -> Self {
        Self::from_f64(x).expect("constant representable in scalar type")
    }

    /// Convert a `usize` count into the scalar type.
    fn from_usize_const(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    fn sum_generic<T: Scalar>(xs: &[T]) -> T {
        let mut acc = T::zero();
        for &x in xs {
            acc += x;
        }
        acc
    }

    #[test]
    fn both_float_widths_implement_scalar() {
        assert_eq!(sum_generic(&[1.0f32, 2.0, 3.5]), 6.5f32);
        assert_eq!(sum_generic(&[1.0f64, 2.0, 3.5]), 6.5f64);
    }

    #[test]
    fn const_conversions() {
        assert_eq!(f64::from_f64_const(0.25), 0.25);
        assert_eq!(f32::from_usize_const(7), 7.0f32);
    }
}
