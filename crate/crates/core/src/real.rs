//! Scalar abstraction shared by the analytic parts of the crate.

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display};

/// Floating point scalar the closed-form and quadrature code is written against.
///
/// Implemented for `f32` and `f64`. Simulation and estimation code works in
/// `f64` and converts at the boundary.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Machine epsilon scaled for iterative stopping rules.
    fn tolerance() -> Self {
        Self::epsilon() * Self::lit(8.0)
    }

    /// Converts an `f64` literal. Every `Real` can represent the literals used
    /// in this crate, so the conversion cannot fail.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Days per year used for every day/year conversion.
pub const DAYS_PER_YEAR: f64 = 365.0;
