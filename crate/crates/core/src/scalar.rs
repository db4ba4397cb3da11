// SPDX-License-Identifier: MIT OR Apache-2.0

//! Floating-point abstraction for the generic parts of the crate.

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, NumCast};

/// Floating-point scalar: `f32` or `f64`.
pub trait Scalar: Float + FromPrimitive + NumCast + Debug + Send + Sync + 'static {
    /// Converts from `f64`, rounding to the nearest representable value.
    fn of(x: f64) -> Self;

    /// Converts a count to the scalar type.
    fn of_count(n: usize) -> Self {
        Self::of(n as f64)
    }

    /// Widens to `f64`.
    fn f64(self) -> f64;
}

impl Scalar for f32 {
    fn of(x: f64) -> Self {
        x as f32
    }

    fn f64(self) -> f64 {
        <f64 as From<f32>>::from(self)
    }
}

impl Scalar for f64 {
    fn of(x: f64) -> Self {
        x
    }

    fn f64(self) -> f64 {
        self
    }
}

/// Sign function with `sgn(0) = 0`.
pub fn sgn<F: Scalar>(x: F) -> F {
    if x > F::zero() {
        F::one()
    } else if x < F::zero() {
        -F::one()
    } else {
        F::zero()
    }
}
