//! Quadrature building blocks: tanh-sinh on finite intervals, Gauss-Legendre
//! panels for oscillatory tails, and Laplace transforms of sampled functions.

mod de;
mod gauss;
mod oscillatory;

use core::ops::{Add, Mul, Sub};

use num_complex::Complex64;

pub use de::{integrate_de, integrate_de_fixed, integrate_de_semi_infinite, integrate_de_with_gaps, DeRule};
pub use gauss::{kronrod21, GaussLegendre};
pub use oscillatory::{integrate_oscillatory, laplace_of_sampled, OscillatoryResult, OscillatorySpec};
pub(crate) use oscillatory::truncation_point;

/// Absolute-plus-relative acceptance threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Tolerance { abs, rel }
    }

    pub const fn absolute(abs: f64) -> Self {
        Tolerance { abs, rel: 0.0 }
    }

    pub fn bound(&self, value: f64) -> f64 {
        self.abs + self.rel * value.abs()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Tolerance {
            abs: self.abs * factor,
            rel: self.rel * factor,
        }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { abs: 1e-10, rel: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult<T = f64> {
    pub value: T,
    pub error_estimate: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Values that can be accumulated by the quadrature rules.
pub trait Scalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + Default
{
    fn magnitude(&self) -> f64;
    fn finite(&self) -> bool;
}

impl Scalar for f64 {
    fn magnitude(&self) -> f64 {
        libm::fabs(*self)
    }
    fn finite(&self) -> bool {
        self.is_finite()
    }
}

impl Scalar for Complex64 {
    fn magnitude(&self) -> f64 {
        libm::hypot(self.re, self.im)
    }
    fn finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Pairwise (cascade) summation; the result does not depend on how the
/// values were produced, only on their order.
pub fn pairwise_sum<T: Scalar>(values: &[T]) -> T {
    const BLOCK: usize = 16;
    if values.len() <= BLOCK {
        let mut s = T::default();
        for &v in values {
            s = s + v;
        }
        return s;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn pairwise_sum_matches_exact_integer_sum() {
        let v: Vec<f64> = (1..=1000).map(|k| k as f64).collect();
        assert_eq!(pairwise_sum(&v), 500500.0);
    }

    #[test]
    fn tolerance_bound_is_abs_plus_rel() {
        let t = Tolerance::new(1e-10, 1e-8);
        assert!((t.bound(-2.0) - (1e-10 + 2e-8)).abs() < 1e-24);
    }
}
