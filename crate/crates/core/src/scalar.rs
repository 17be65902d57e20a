//! Scalar abstraction. The numerical core is generic over the floating
//! type via `num-traits`; the harness and CLI pin `f64` (see the aliases
//! at the crate root).

use rand::Rng;
use rand_distr::StandardNormal;

/// Floating scalar the core math runs on: `f32` or `f64`.
pub trait Scalar:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + rustfft::FftNum
    + std::iter::Sum
    + std::fmt::Display
    + Default
{
    /// One exact N(0,1) draw (ziggurat), deterministic per RNG state.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl Scalar for f32 {
    #[inline]
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
}

impl Scalar for f64 {
    #[inline]
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
}

/// f64 literal lowered into the working scalar type.
#[inline]
pub(crate) fn lit<T: Scalar>(v: f64) -> T {
    T::from_f64(v).expect("literal not representable in scalar type")
}
