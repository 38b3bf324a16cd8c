//! Scalar abstraction shared by the engine and the control tree.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type the simulation and synchronization math is generic over.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal or catalog value into this scalar.
    fn lit(x: f64) -> Self;

    fn to_f64_lossy(self) -> f64;

    /// Sine computed in software, so results do not depend on the build
    /// profile or the platform math library.
    fn det_sin(self) -> Self;

    /// Cosine counterpart of [`Real::det_sin`].
    fn det_cos(self) -> Self;
}

macro_rules! impl_real {
    ($f:ty, $sin:path, $cos:path) => {
        impl Real for $f {
            #[inline]
            fn lit(x: f64) -> Self {
                x as $f
            }

            #[inline]
            fn to_f64_lossy(self) -> f64 {
                self as f64
            }

            #[inline]
            fn det_sin(self) -> Self {
                $sin(self)
            }

            #[inline]
            fn det_cos(self) -> Self {
                $cos(self)
            }
        }
    };
}

impl_real!(f32, libm::sinf, libm::cosf);
impl_real!(f64, libm::sin, libm::cos);

/// Clamps `x` into `[lo, hi]`. NaN maps to `lo`.
#[inline]
pub fn clamp<S: Real>(x: S, lo: S, hi: S) -> S {
    if x.is_nan() || x < lo {
        lo
    } else if x > hi {
        hi
    } else {
        x
    }
}
