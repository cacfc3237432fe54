//! Scalar abstraction for the simulation kernels.
//!
//! All grid math is generic over [`Real`] so the same kernels run in f32
//! (the storage format) or f64 (oracles and reference paths).

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar usable by every kernel in this crate.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Default
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from f64 (panics only on exotic types that cannot
    /// represent ordinary constants).
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("constant not representable in scalar type")
    }

    /// Widen to f64 for accumulation and reporting.
    #[inline]
    fn f64(self) -> f64 {
        self.to_f64().expect("scalar not convertible to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions_round_trip() {
        assert_eq!(f32::of(1.5), 1.5f32);
        assert_eq!(f64::of(1.5), 1.5f64);
        assert_eq!(2.25f32.f64(), 2.25f64);
    }
}
