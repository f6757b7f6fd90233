//! Scalar abstraction shared by the exact and floating-point code paths.
//!
//! The triangular inversion engine and the polynomial recurrences are
//! written once over [`Scalar`] and instantiated with `f64`, complex
//! doubles, or exact rationals. Exactness of the algebra is asserted in
//! tests by running the same code over [`crate::Exact`].

use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Field scalar usable by the generic numeric kernels.
///
/// `invertible` decides whether division by the value is meaningful;
/// float implementations use a small absolute threshold, exact ones
/// compare against zero.
pub trait Scalar:
    Clone
    + PartialEq
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
    + 'static
{
    fn from_i64(n: i64) -> Self;

    /// True if division by `self` is numerically meaningful.
    fn invertible(&self) -> bool {
        !self.is_zero()
    }
}

/// Absolute threshold below which a float diagonal counts as singular.
pub const SINGULAR_EPS: f64 = 1e-14;

impl Scalar for f64 {
    fn from_i64(n: i64) -> Self {
        n as f64
    }

    fn invertible(&self) -> bool {
        self.abs() > SINGULAR_EPS
    }
}

impl Scalar for Complex64 {
    fn from_i64(n: i64) -> Self {
        Complex64::new(n as f64, 0.0)
    }

    fn invertible(&self) -> bool {
        self.norm_sqr() > SINGULAR_EPS * SINGULAR_EPS
    }
}

impl Scalar for BigRational {
    fn from_i64(n: i64) -> Self {
        BigRational::from_integer(n.into())
    }
}
