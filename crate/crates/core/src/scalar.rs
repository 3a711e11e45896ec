//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All pricing code is written against [`Real`], which is implemented for
//! `f32` and `f64`. The acceptance tolerances assume `f64`; `f32` is useful
//! for quick exploratory runs and for checking that nothing silently depends
//! on a concrete float type.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::de::DeserializeOwned;
use serde::Serialize;

pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Sum
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal. Lossy for `f32`, exact for `f64`.
    fn lit(x: f64) -> Self;

    /// One standard normal draw.
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    fn as_f64(self) -> f64;
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            #[inline]
            fn lit(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                rng.sample::<$t, _>(StandardNormal)
            }

            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

/// Sums `values` in fixed-size chunks, then sums the chunk totals in order.
///
/// The result depends only on the input order, so callers that compute the
/// chunk partials in parallel still get bit-identical totals.
pub(crate) const SUM_CHUNK: usize = 4096;

pub(crate) fn ordered_sum<T: Real>(values: &[T]) -> T {
    values
        .chunks(SUM_CHUNK)
        .map(|c| c.iter().fold(T::zero(), |acc, &x| acc + x))
        .fold(T::zero(), |acc, x| acc + x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lit_round_trips_for_f64() {
        assert_eq!(<f64 as Real>::lit(0.1), 0.1);
        assert_eq!(<f32 as Real>::lit(0.5), 0.5f32);
    }

    #[test]
    fn ordered_sum_matches_naive_on_small_input() {
        let v: Vec<f64> = (0..10_000).map(|i| i as f64).collect();
        assert_eq!(ordered_sum(&v), 49_995_000.0);
    }
}
