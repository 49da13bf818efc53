//! Scalar abstraction shared by the numerical modules.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar usable throughout the simulator (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal, panicking only for non-representable values
    /// (never happens for `f32`/`f64`).
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Converts an integer index.
    #[inline]
    fn idx(i: i64) -> Self {
        Self::from_i64(i).expect("integer representable")
    }

    /// Full turn, 2π.
    #[inline]
    fn tau() -> Self {
        Self::TAU()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Sine and cosine of an angle given in degrees.
///
/// The argument is reduced by the nearest multiple of 90° before conversion,
/// so quarter turns give exact zeros and ones.
#[inline]
pub fn sin_cos_deg<T: Real>(deg: T) -> (T, T) {
    let quarter = T::lit(90.0);
    let n = (deg / quarter).round();
    let (s, c) = (deg - n * quarter).to_radians().sin_cos();
    match n.to_i64().map(|n| n.rem_euclid(4)) {
        Some(0) => (s, c),
        Some(1) => (c, -s),
        Some(2) => (-s, -c),
        Some(3) => (-c, s),
        _ => deg.to_radians().sin_cos(),
    }
}

/// Arcsine returned in degrees, with the argument clamped to `[-1, 1]`.
#[inline]
pub fn asin_deg<T: Real>(s: T) -> T {
    s.max(-T::one()).min(T::one()).asin().to_degrees()
}
