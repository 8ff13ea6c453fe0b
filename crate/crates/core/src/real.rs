//! Scalar abstraction for the numerical core.
//!
//! Channel synthesis, feature extraction, resampling, both classifiers and
//! ROC evaluation are written against [`Real`] so they run in `f32` or `f64`.
//! Geometry and configuration stay in `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar usable throughout the numerical core.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + FromStr
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`; every `Real` can represent some value
    /// for any finite `f64` (possibly infinite or rounded).
    #[inline]
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("f64 converts to every Real")
    }

    #[inline]
    fn of_usize(value: usize) -> Self {
        Self::from_usize(value).expect("usize converts to every Real")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
