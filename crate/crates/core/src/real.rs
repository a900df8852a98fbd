//! Floating-scalar abstraction for the numerical kernels.
//!
//! Everything that is pure math — intensity evaluation, Haar statistics,
//! quadrature, the classical distribution functions — is generic over [`Real`]
//! so it can be instantiated at `f32` or `f64`. The Monte-Carlo pipeline and
//! the serialized artifacts stay on `f64` (see the crate-root aliases).

use rand::Rng;

/// Floating-point scalar usable by the numerical kernels.
///
/// The two draw methods exist so generic code can consume randomness without
/// dragging `rand`'s distribution bounds through every signature.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + core::fmt::Debug
    + core::fmt::Display
    + core::iter::Sum
    + Send
    + Sync
    + 'static
{
    /// Uniform draw from `[0, 1)`.
    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Lossy conversion from `f64`; panics on values a finite scalar cannot hold.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant not representable in this scalar type")
    }

    /// Lossy conversion to `f64`.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("scalar not representable as f64")
    }
}

impl Real for f64 {
    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random::<f64>()
    }
}

impl Real for f32 {
    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random::<f32>()
    }
}
