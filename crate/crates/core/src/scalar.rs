//! Floating-point scalar abstraction.
//!
//! Everything that touches tree fits, residuals or posterior draws is written
//! against [`Scalar`], so the samplers run in either `f64` or `f32`. The trait
//! also carries the handful of random variates the samplers need, which keeps
//! the `rand_distr` bounds out of every generic signature.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, Gamma, Open01, StandardNormal};

pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal or statistic into this scalar.
    fn lit(v: f64) -> Self;

    fn as_f64(self) -> f64;

    fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Uniform draw on the open interval (0, 1).
    fn sample_open01<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Gamma draw with the given shape and rate (inverse scale).
    fn sample_gamma<R: Rng + ?Sized>(shape: Self, rate: Self, rng: &mut R) -> Self;

    /// Normal draw with the given mean and variance.
    fn sample_normal<R: Rng + ?Sized>(mean: Self, variance: Self, rng: &mut R) -> Self {
        mean + variance.sqrt() * Self::sample_standard_normal(rng)
    }
}

macro_rules! impl_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            #[inline]
            fn lit(v: f64) -> Self {
                v as $t
            }

            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }

            #[inline]
            fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                StandardNormal.sample(rng)
            }

            #[inline]
            fn sample_open01<R: Rng + ?Sized>(rng: &mut R) -> Self {
                Open01.sample(rng)
            }

            fn sample_gamma<R: Rng + ?Sized>(shape: Self, rate: Self, rng: &mut R) -> Self {
                // shape and rate are validated positive by every caller
                Gamma::new(shape, 1.0 / rate)
                    .expect("gamma parameters must be positive and finite")
                    .sample(rng)
            }
        }
    };
}

impl_scalar!(f64);
impl_scalar!(f32);

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gamma_rate_parameterization() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        let mean: f64 = (0..n)
            .map(|_| f64::sample_gamma(4.0, 2.0, &mut rng))
            .sum::<f64>()
            / n as f64;
        // shape / rate
        assert!((mean - 2.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn open01_is_open() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10_000 {
            let u = f32::sample_open01(&mut rng);
            assert!(u > 0.0 && u < 1.0);
        }
    }
}
