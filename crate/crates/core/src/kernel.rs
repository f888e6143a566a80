//! Cubic B-spline smoothing kernel in two dimensions.
//!
//! `W(r, h) = σ f(q)` with `q = r / h`, compact support `2h` and
//! `σ = 10 / (7 π h²)`:
//!
//! ```text
//! f(q) = 1 - 3/2 q² + 3/4 q³      0 <= q < 1
//!        1/4 (2 - q)³              1 <= q < 2
//!        0                         q >= 2
//! ```

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::Vec2;

/// Smoothing length together with the derived 2D normalization constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    h: f64,
    normalization: f64,
    inv_h: f64,
}

impl KernelSpec {
    pub fn new(h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidInput(format!(
                "smoothing length must be positive and finite, got {h}"
            )));
        }
        Ok(Self {
            h,
            normalization: 10.0 / (7.0 * PI * h * h),
            inv_h: 1.0 / h,
        })
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// Radius beyond which the kernel and its gradient vanish (`2h`).
    #[inline]
    pub fn support_radius(&self) -> f64 {
        2.0 * self.h
    }

    /// Kernel value at distance `r`.
    pub fn evaluate(&self, r: f64) -> Result<f64> {
        if !r.is_finite() || r < 0.0 {
            return Err(Error::InvalidInput(format!(
                "kernel distance must be finite and non-negative, got {r}"
            )));
        }
        Ok(self.value(r))
    }

    /// Gradient of `W(|dx|)` with respect to the first particle, `dx = x_a - x_b`.
    pub fn gradient(&self, dx: Vec2) -> Result<Vec2> {
        if !(dx.x.is_finite() && dx.y.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "kernel displacement must be finite, got ({}, {})",
                dx.x, dx.y
            )));
        }
        let r = dx.norm();
        if r <= 0.0 {
            return Ok(Vec2::zeros());
        }
        Ok(dx * (self.derivative(r) / r))
    }

    /// Unchecked kernel value, used in the hot loops.
    #[inline]
    pub fn value(&self, r: f64) -> f64 {
        let q = r * self.inv_h;
        if q < 1.0 {
            self.normalization * (1.0 - 1.5 * q * q + 0.75 * q * q * q)
        } else if q < 2.0 {
            let t = 2.0 - q;
            self.normalization * 0.25 * t * t * t
        } else {
            0.0
        }
    }

    /// Unchecked radial derivative `dW/dr`.
    #[inline]
    pub fn derivative(&self, r: f64) -> f64 {
        let q = r * self.inv_h;
        let scale = self.normalization * self.inv_h;
        if q < 1.0 {
            scale * (-3.0 * q + 2.25 * q * q)
        } else if q < 2.0 {
            let t = 2.0 - q;
            -0.75 * scale * t * t
        } else {
            0.0
        }
    }
}
