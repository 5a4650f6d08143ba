//! Floating point abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar used for trajectories, potentials and action values.
///
/// Implemented for `f32` and `f64`. Everything in the crate is written against
/// this trait; the `*64` aliases at the crate root pin the double precision
/// instantiation used by the command line front end.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Panics only if the value is not representable,
    /// which cannot happen for the two implementors.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(i: usize) -> Self {
        Self::from_usize(i).expect("index representable in scalar type")
    }

    #[inline]
    fn from_i64_lossy(i: i64) -> Self {
        Self::from_i64(i).expect("integer representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Euclidean norm of a point.
#[inline]
pub fn norm<F: Scalar>(x: &[F]) -> F {
    norm_sq(x).sqrt()
}

#[inline]
pub fn norm_sq<F: Scalar>(x: &[F]) -> F {
    x.iter().fold(F::zero(), |acc, &v| acc + v * v)
}

#[inline]
pub fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Distance between two points of equal dimension.
#[inline]
pub fn distance<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter()
        .zip(b)
        .fold(F::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
        .sqrt()
}

/// Distance from `p` to the closed segment `[a, b]`.
pub fn point_segment_distance<F: Scalar>(p: &[F], a: &[F], b: &[F]) -> F {
    let mut ab_sq = F::zero();
    let mut ap_ab = F::zero();
    for ((&pi, &ai), &bi) in p.iter().zip(a).zip(b) {
        let ab = bi - ai;
        ab_sq = ab_sq + ab * ab;
        ap_ab = ap_ab + (pi - ai) * ab;
    }
    if ab_sq == F::zero() {
        return distance(p, a);
    }
    let s = (ap_ab / ab_sq).max(F::zero()).min(F::one());
    p.iter()
        .zip(a)
        .zip(b)
        .fold(F::zero(), |acc, ((&pi, &ai), &bi)| {
            let c = ai + s * (bi - ai) - pi;
            acc + c * c
        })
        .sqrt()
}

/// Compensated (Neumaier) accumulator. Action values are sums of hundreds of
/// positive terms and the line search compares them at the last few digits.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum<F> {
    sum: F,
    carry: F,
}

impl<F: Scalar> CompensatedSum<F> {
    pub fn new() -> Self {
        Self {
            sum: F::zero(),
            carry: F::zero(),
        }
    }

    #[inline]
    pub fn add(&mut self, x: F) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry = self.carry + ((self.sum - t) + x);
        } else {
            self.carry = self.carry + ((x - t) + self.sum);
        }
        self.sum = t;
    }

    pub fn value(&self) -> F {
        self.sum + self.carry
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_distance_cases() {
        let q = [2.0, 0.0];
        assert_eq!(point_segment_distance(&q, &[1.0, 0.0], &[3.0, 0.0]), 0.0);
        assert!((point_segment_distance(&q, &[0.0, 1.0], &[4.0, 1.0]) - 1.0).abs() < 1e-15);
        assert!((point_segment_distance(&q, &[0.0, 0.0], &[0.0, 0.0]) - 2.0).abs() < 1e-15);
        assert!((point_segment_distance(&q, &[5.0, 4.0], &[7.0, 4.0]) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::<f64>::new();
        s.add(1.0);
        for _ in 0..1000 {
            s.add(1e-17);
        }
        s.add(-1.0);
        assert!((s.value() - 1e-14).abs() < 1e-20);
    }
}
