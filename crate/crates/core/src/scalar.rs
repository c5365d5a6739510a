//! Scalar abstraction the whole crate is generic over.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{de::DeserializeOwned, Serialize};

/// Floating-point scalar: f32 or f64.
///
/// Combines nalgebra's `RealField` (all elementary operations) with the
/// num-traits conversions and the two special functions the variational
/// machinery needs.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Serialize + DeserializeOwned + Default
{
    fn ln_gamma(self) -> Self;
    fn digamma(self) -> Self;

    /// Conversion from an `f64` constant; panics only for non-representable
    /// values, which none of the crate's constants are.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("constant representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Real for f64 {
    fn ln_gamma(self) -> Self {
        crate::special::ln_gamma(self)
    }
    fn digamma(self) -> Self {
        crate::special::digamma(self)
    }
}

impl Real for f32 {
    fn ln_gamma(self) -> Self {
        crate::special::ln_gamma(self as f64) as f32
    }
    fn digamma(self) -> Self {
        crate::special::digamma(self as f64) as f32
    }
}

/// Standard-normal draw. Sampling happens in f64 so the stream of variates is
/// identical across scalar types for a given RNG state.
pub fn standard_normal<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    let x: f64 = rng.sample(StandardNormal);
    T::of(x)
}

/// Splits one 64-bit seed into independent sub-seeds for distinct purposes
/// (splitmix64 finaliser over seed + label).
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    let mut z = seed
        .wrapping_add(label.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
