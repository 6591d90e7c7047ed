//! Scalar abstraction shared by the field-level numerics.
//!
//! Grids, propagation, noise synthesis and observables are written against
//! [`Real`] so they run in `f32` or `f64`. Material constants and the
//! perturbation-theory quadratures stay in `f64`: they feed tolerances in the
//! 1e-6 range that single precision cannot meet.

use std::fmt::{Debug, Display};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use rustfft::FftNum;

/// Floating-point scalar usable by every generic numerical routine.
pub trait Real:
    Float + FloatConst + NumAssign + FromPrimitive + ToPrimitive + FftNum + Default + Debug + Display + Send + Sync + 'static
{
    /// Lossless-enough conversion from an `f64` literal or constant.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).expect("finite scalar")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex number over a [`Real`] scalar.
pub type Cplx<T> = Complex<T>;

/// `exp(i * phase)`.
#[inline]
pub fn cis<T: Real>(phase: T) -> Cplx<T> {
    let (s, c) = phase.sin_cos();
    Complex::new(c, s)
}

/// `exp(-i * z * h)` for complex `z`; modulus differs from one when `z` has an
/// imaginary part.
#[inline]
pub fn exp_minus_i<T: Real>(z: Cplx<T>, h: T) -> Cplx<T> {
    // -i (a + ib) h = b h - i a h
    let mag = (z.im * h).exp();
    let (s, c) = (-z.re * h).sin_cos();
    Complex::new(mag * c, mag * s)
}
