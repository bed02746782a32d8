//! Scalar abstraction shared by the exact and floating-point code paths.
//!
//! Structure constants, ranks and subspace canonicalization are carried out
//! either over `BigRational` (exact, no tolerance) or over `f64`/`f32`
//! (pivot and rank decisions use a relative tolerance).

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, Signed, ToPrimitive, Zero};

use crate::linalg::Matrix;

/// Field element usable by the algebra, group and echelon code.
pub trait Scalar:
    Clone + Debug + Display + PartialEq + PartialOrd + Num + Signed + Send + Sync + 'static
{
    /// `true` for exact arithmetic: zero tests are exact and pivots are the
    /// first nonzero entry rather than the largest one.
    const EXACT: bool;

    fn from_f64(x: f64) -> Self;

    fn to_f64(&self) -> f64;

    fn from_ratio(num: i64, den: i64) -> Self;

    /// Zero test used by elimination; `scale` is the largest magnitude in play.
    fn is_negligible(&self, scale: f64) -> bool;

    /// Rank of a matrix: exact echelon rank, or numeric rank for floats.
    fn matrix_rank(m: &Matrix<Self>) -> usize {
        m.echelon_rank()
    }

    fn half() -> Self {
        Self::from_ratio(1, 2)
    }
}

/// Relative singular-value threshold used for float ranks.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_f64(x: f64) -> Self {
        x
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn is_negligible(&self, scale: f64) -> bool {
        self.abs() <= 1e-9 * scale
    }

    fn matrix_rank(m: &Matrix<Self>) -> usize {
        crate::linalg::numeric_rank(&m.to_dmatrix(), DEFAULT_RANK_TOL)
    }
}

impl Scalar for f32 {
    const EXACT: bool = false;

    fn from_f64(x: f64) -> Self {
        x as f32
    }

    fn to_f64(&self) -> f64 {
        *self as f64
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        (num as f64 / den as f64) as f32
    }

    fn is_negligible(&self, scale: f64) -> bool {
        (self.abs() as f64) <= 1e-4 * scale
    }

    fn matrix_rank(m: &Matrix<Self>) -> usize {
        crate::linalg::numeric_rank(&m.to_dmatrix(), 1e-4)
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    /// Exact binary expansion of `x`; non-finite input maps to zero.
    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).unwrap_or_else(BigRational::zero)
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn is_negligible(&self, _scale: f64) -> bool {
        self.is_zero()
    }
}

/// Best rational approximation of `x` with denominator at most `max_den`
/// (continued fractions).
pub fn rationalize(x: f64, max_den: i64) -> BigRational {
    if !x.is_finite() {
        return BigRational::zero();
    }
    let sign = if x < 0.0 { -1 } else { 1 };
    let mut v = x.abs();
    let (mut p0, mut q0, mut p1, mut q1) = (0i128, 1i128, 1i128, 0i128);
    for _ in 0..64 {
        let a = v.floor();
        if a > 1e15 {
            break;
        }
        let a = a as i128;
        let p2 = a * p1 + p0;
        let q2 = a * q1 + q0;
        if q2 > max_den as i128 {
            break;
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let frac = v - a as f64;
        if frac < 1e-15 {
            break;
        }
        v = 1.0 / frac;
    }
    if q1 == 0 {
        return BigRational::zero();
    }
    BigRational::new(BigInt::from(sign * p1), BigInt::from(q1))
}

/// Convenience constructor used throughout tests and catalogs.
pub fn q(num: i64, den: i64) -> BigRational {
    BigRational::from_ratio(num, den)
}
