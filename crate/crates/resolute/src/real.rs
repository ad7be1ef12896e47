//! Scalar abstraction shared by the analytic modules.
//!
//! Phases, filter functions, block probabilities, Fisher information and the
//! chirp integrator are written against [`Real`], so they run in `f64` or
//! `f32`. Simulation, fitting and I/O work in `f64` only.

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use std::fmt::{Debug, Display};

/// Floating-point scalar used by the analytic layers.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant into this scalar type.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("constant representable in scalar type")
    }

    /// Converts to `f64` for reporting.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {}
impl Real for f32 {}

/// `sin(x)/x` with the removable singularity at zero filled in.
pub fn sinc<T: Real>(x: T) -> T {
    if x.abs() < T::lit(1e-4) {
        let x2 = x * x;
        T::one() - x2 / T::lit(6.0) + x2 * x2 / T::lit(120.0)
    } else {
        x.sin() / x
    }
}

/// Derivative of [`sinc`], `(x cos x - sin x) / x^2`.
pub fn sinc_prime<T: Real>(x: T) -> T {
    if x.abs() < T::lit(1e-3) {
        let x2 = x * x;
        -x / T::lit(3.0) + x * x2 / T::lit(30.0) - x * x2 * x2 / T::lit(840.0)
    } else {
        (x * x.cos() - x.sin()) / (x * x)
    }
}
