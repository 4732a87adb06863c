use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar every estimator in the crate is generic over.
///
/// Implemented for `f32` and `f64`. Tolerances quoted in `f64` terms are
/// converted through [`Scalar::lit`], so `f32` instantiations inherit the
/// same constants rounded to single precision.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant is representable")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count is representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `⌈x⌉` as a count, absorbing floating noise such as `1.5 * 0.1 * 200 = 30.000000000000004`.
pub fn ceil_count(x: f64) -> usize {
    if x <= 0.0 {
        return 0;
    }
    (x - 1e-9).ceil().max(0.0) as usize
}

/// `⌊x⌋` as a count, absorbing floating noise from below.
pub fn floor_count(x: f64) -> usize {
    if x <= 0.0 {
        return 0;
    }
    (x + 1e-9).floor() as usize
}
