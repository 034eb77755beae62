//! Scalar abstraction for the numeric routines.
//!
//! Everything in this crate is generic over [`Scalar`], a blanket trait over
//! `num_traits::Float`, so the whole pipeline runs at f32 or f64. Default
//! tolerances are stated as f64 literals and cast into `T`; they were chosen
//! for f64 and are tighter than f32 can honour, so f32 callers should pass
//! their own where a function takes a tolerance.

use std::fmt;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point element type usable by every routine in this crate.
pub trait Scalar:
    Float + NumAssign + FromPrimitive + Sum + fmt::Debug + fmt::Display + Default + 'static
{
}

impl<T> Scalar for T where
    T: Float + NumAssign + FromPrimitive + Sum + fmt::Debug + fmt::Display + Default + 'static
{
}

/// Converts an f64 constant into `T`.
///
/// Panics if the value is not representable, which cannot happen for the
/// in-range literals this crate uses.
pub fn cast<T: Scalar>(value: f64) -> T {
    T::from_f64(value).expect("constant must be representable in the scalar type")
}
