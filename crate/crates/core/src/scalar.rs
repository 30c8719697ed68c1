use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point type the numerical core is written against (`f32` or `f64`).
pub trait Scalar:
    Float
    + FloatConst
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
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where
    T: Float
        + FloatConst
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
}

/// `(sin 2πt, cos 2πt)` for `t` measured in cycles.
///
/// Exact at multiples of a quarter cycle, so quadrature terms vanish exactly at
/// ω ∈ {0, ½} for integer lags.
pub fn sin_cos_cycles<T: Scalar>(t: T) -> (T, T) {
    let r = t - t.round();
    let half = T::lit(0.5);
    let quarter = T::lit(0.25);
    if r == T::zero() {
        (T::zero(), T::one())
    } else if r == half || r == -half {
        (T::zero(), -T::one())
    } else if r == quarter {
        (T::one(), T::zero())
    } else if r == -quarter {
        (-T::one(), T::zero())
    } else {
        (T::TAU() * r).sin_cos()
    }
}
