//! Scalar abstraction for the numerical core.
//!
//! The grid, state, and optics layers are generic over [`Real`], so the same
//! code runs in `f32` or `f64`. The statistics stack (sampling, estimators,
//! attacks) is fixed at `f64`; concrete aliases live at the crate root.

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use rustfft::FftNum;
use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

/// Floating-point scalar usable throughout the numerical core: f32 or f64.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + FftNum
    + Debug
    + Display
    + LowerExp
{
    /// Lossless-enough conversion from f64 for constants and tolerances.
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant not representable")
    }

    /// Conversion to f64 for the statistics stack.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("scalar not representable as f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// On-shell momentum bound 2π/λ for a photon of wavelength `lambda`.
pub fn on_shell_bound<T: Real>(lambda: T) -> T {
    T::TAU() / lambda
}
