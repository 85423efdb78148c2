//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type the models, samplers and diagnostics are generic over.
///
/// Random variate generation lives on the trait so that generic code does not
/// have to carry `rand_distr` bounds around.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal. Panics only if the target cannot represent
    /// finite `f64` values at all, which never happens for `f32`/`f64`.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count representable")
    }

    /// `ln Γ(self)`.
    fn ln_gamma(self) -> Self;

    /// `ln(n!)`.
    fn ln_factorial(n: u64) -> Self {
        Self::from_count(n + 1).ln_gamma()
    }

    fn sample_standard_normal<G: Rng + ?Sized>(rng: &mut G) -> Self;

    /// Uniform on `[0, 1)`.
    fn sample_unit<G: Rng + ?Sized>(rng: &mut G) -> Self;

    /// Gamma variate in the shape/rate parameterization.
    fn sample_gamma<G: Rng + ?Sized>(shape: Self, rate: Self, rng: &mut G) -> Self;

    /// Poisson variate; a non-positive mean yields 0.
    fn sample_poisson<G: Rng + ?Sized>(mean: Self, rng: &mut G) -> u64;
}

macro_rules! impl_real {
    ($t:ty, $lgamma:path) => {
        impl Real for $t {
            fn ln_gamma(self) -> Self {
                $lgamma(self)
            }

            fn sample_standard_normal<G: Rng + ?Sized>(rng: &mut G) -> Self {
                StandardNormal.sample(rng)
            }

            fn sample_unit<G: Rng + ?Sized>(rng: &mut G) -> Self {
                rng.gen::<$t>()
            }

            fn sample_gamma<G: Rng + ?Sized>(shape: Self, rate: Self, rng: &mut G) -> Self {
                Gamma::new(shape, 1.0 / rate)
                    .expect("gamma parameters must be positive and finite")
                    .sample(rng)
            }

            fn sample_poisson<G: Rng + ?Sized>(mean: Self, rng: &mut G) -> u64 {
                if !(mean > 0.0) {
                    return 0;
                }
                let draw: $t = Poisson::new(mean)
                    .expect("finite positive Poisson mean")
                    .sample(rng);
                draw as u64
            }
        }
    };
}

impl_real!(f64, libm::lgamma);
impl_real!(f32, libm::lgammaf);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_factorial_small_values() {
        assert_eq!(<f64 as Real>::ln_factorial(0), 0.0);
        assert!((<f64 as Real>::ln_factorial(3) - 6f64.ln()).abs() < 1e-14);
        assert!((<f32 as Real>::ln_factorial(4) - 24f32.ln()).abs() < 1e-5);
    }

    #[test]
    fn poisson_of_zero_mean_is_zero() {
        let mut rng = rand::thread_rng();
        assert_eq!(f64::sample_poisson(0.0, &mut rng), 0);
        assert_eq!(f64::sample_poisson(-1.0, &mut rng), 0);
    }
}
