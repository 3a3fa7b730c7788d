//! Scalar abstraction shared by every numerical kernel.
//!
//! All simulation, solver, and training code is written against [`Real`], so
//! the same kernels run in `f64` (the default working precision) and `f32`.
//! Tolerances that depend on precision live here rather than being scattered
//! across modules as literals.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point type usable as the real part of a statevector amplitude.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Norm drift beyond which a state is reported as numerically unhealthy.
    const NORM_DRIFT_TOL: f64;
    /// Largest imaginary residue tolerated on an expectation of a Hermitian operator.
    const IMAG_TOL: f64;
    /// Residual target for iterative eigensolvers.
    const SOLVER_TOL: f64;

    /// Converts an `f64` literal into this type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Converts a count into this type.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite real")
    }
}

impl Real for f64 {
    const NORM_DRIFT_TOL: f64 = 1e-8;
    const IMAG_TOL: f64 = 1e-10;
    const SOLVER_TOL: f64 = 1e-9;
}

impl Real for f32 {
    const NORM_DRIFT_TOL: f64 = 1e-4;
    const IMAG_TOL: f64 = 1e-4;
    const SOLVER_TOL: f64 = 1e-4;
}

/// Complex amplitude over a [`Real`] scalar.
pub type Amplitude<T> = Complex<T>;

#[inline]
pub(crate) fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

#[inline]
pub(crate) fn cone<T: Real>() -> Complex<T> {
    Complex::new(T::one(), T::zero())
}
