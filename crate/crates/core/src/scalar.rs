//! Scalar abstraction shared by the exact spline kernel and the floating-point
//! numerics.
//!
//! Spline construction runs in exact rational arithmetic so that identities
//! such as vanishing moments and integer zeros hold without rounding; the
//! same code is reused with `f64`/`f32` when speed matters more than
//! exactness.

use std::fmt::{Debug, Display};
use std::ops::Neg;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, ToPrimitive};

/// Field-like scalar used by [`crate::spline::PiecewisePolynomial`].
pub trait Scalar:
    Clone + Debug + Display + PartialOrd + Num + Neg<Output = Self> + Send + Sync + 'static
{
    fn from_i64(v: i64) -> Self;

    fn from_ratio(num: i64, den: i64) -> Self {
        Self::from_i64(num) / Self::from_i64(den)
    }

    fn to_f64(&self) -> f64;

    /// Largest integer not greater than `self`.
    fn floor_i64(&self) -> i64;

    fn abs_val(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }

    fn powi(&self, e: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..e {
            acc = acc * self.clone();
        }
        acc
    }
}

impl Scalar for f64 {
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn floor_i64(&self) -> i64 {
        self.floor() as i64
    }
    fn powi(&self, e: u32) -> Self {
        f64::powi(*self, e as i32)
    }
}

impl Scalar for f32 {
    fn from_i64(v: i64) -> Self {
        v as f32
    }
    fn to_f64(&self) -> f64 {
        *self as f64
    }
    fn floor_i64(&self) -> i64 {
        self.floor() as i64
    }
    fn powi(&self, e: u32) -> Self {
        f32::powi(*self, e as i32)
    }
}

impl Scalar for BigRational {
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn floor_i64(&self) -> i64 {
        self.floor().to_integer().to_i64().expect("floor out of i64 range")
    }
}

/// Binomial coefficient as a scalar, computed in `u128` to stay exact for the
/// small orders used here.
pub fn binomial<T: Scalar>(n: u32, k: u32) -> T {
    if k > n {
        return T::zero();
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    T::from_i64(acc as i64)
}

pub fn factorial<T: Scalar>(n: u32) -> T {
    (1..=n as i64).fold(T::one(), |acc, i| acc * T::from_i64(i))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binomial::<f64>(5, 2), 10.0);
        assert_eq!(binomial::<f64>(8, 0), 1.0);
        assert_eq!(binomial::<f64>(3, 4), 0.0);
        assert_eq!(factorial::<f64>(5), 120.0);
    }

    #[test]
    fn rational_floor() {
        assert_eq!(BigRational::from_ratio(-3, 2).floor_i64(), -2);
        assert_eq!(BigRational::from_ratio(7, 2).floor_i64(), 3);
        assert_eq!(<f64 as Scalar>::from_ratio(1, 4), 0.25);
    }
}
