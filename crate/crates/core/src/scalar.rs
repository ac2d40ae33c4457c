//! Scalar abstraction: every numeric routine in this crate is generic over a
//! floating-point type so the whole stack runs in `f32` or `f64`.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

/// Floating-point scalar used throughout the library.
///
/// A thin alias over the `num-traits` hierarchy plus the assign/format bounds
/// the solvers need. Implemented for `f32` and `f64`; the crate root exports
/// `f64`-concrete aliases for everyday use.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Display
    + LowerExp
    + Debug
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant into this scalar type.
    ///
    /// Constants (step sizes, tolerances, RNG draws) are produced in `f64`
    /// and narrowed here, which keeps f32 and f64 runs on the same random
    /// trajectory up to rounding.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant representable in scalar type")
    }

    /// Converts a count into this scalar type.
    fn of_usize(n: usize) -> Self {
        Self::of(n as f64)
    }

    /// Widens to `f64` for reporting and serialization.
    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("scalar widens to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
