//! Scalar abstraction for the numeric kernels.

use rand::distr::uniform::SampleUniform;

/// Floating-point scalar usable by the encoder, loss, and metric kernels.
///
/// Implemented for `f32` and `f64`. `f64` is the default everywhere a file
/// format or acceptance tolerance is involved.
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::NumAssign
    + SampleUniform
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
    /// Lossless-enough conversion for persistence (params files store f64).
    fn to_f64_lossy(self) -> f64;
    fn from_f64_lossy(value: f64) -> Self;
}

impl Scalar for f32 {
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
    fn from_f64_lossy(value: f64) -> Self {
        value as f32
    }
}

impl Scalar for f64 {
    fn to_f64_lossy(self) -> f64 {
        self
    }
    fn from_f64_lossy(value: f64) -> Self {
        value
    }
}

/// Converts a usize exactly representable in the scalar's mantissa.
pub fn from_count<S: Scalar>(count: usize) -> S {
    S::from_usize(count).expect("count representable as scalar")
}
