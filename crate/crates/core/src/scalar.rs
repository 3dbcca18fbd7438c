//! Scalar modes: exact rationals and `f64`.
//!
//! Structural linear algebra always runs over [`Q`]; metric and sampling code
//! runs over `f64`. Generic operations (brackets, the group law) accept either,
//! but a single call never mixes the two.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Exact rational scalar.
pub type Q = BigRational;

/// `n/d` as an exact rational. Panics if `d == 0`.
pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// The integer `n` as an exact rational.
pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// Exact rational value of a finite float.
pub fn q_from_f64(x: f64) -> Q {
    Q::from_float(x).unwrap_or_else(Q::zero)
}

pub fn q_to_f64(x: &Q) -> f64 {
    ToPrimitive::to_f64(x).unwrap_or(f64::NAN)
}

/// `x^e` for an integer exponent, exact.
pub fn q_powi(x: &Q, e: i64) -> Q {
    if e >= 0 {
        num_traits::pow(x.clone(), e as usize)
    } else {
        num_traits::pow(x.recip(), (-e) as usize)
    }
}

/// Returns the integer value of `x` when it has denominator one.
pub fn q_as_integer(x: &Q) -> Option<i64> {
    if x.is_integer() {
        x.to_integer().to_i64()
    } else {
        None
    }
}

pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    const EXACT: bool;

    fn from_q(x: &Q) -> Self;

    fn from_i64(x: i64) -> Self;

    fn to_f64(&self) -> f64;

    fn magnitude(&self) -> f64 {
        self.to_f64().abs()
    }

    /// Zero test: exact for rationals, `|x| <= tol` for floats.
    fn is_negligible(&self, tol: f64) -> bool;

    /// `self^w` when representable in this scalar mode.
    fn pow_weight(&self, w: &Q) -> Option<Self>;

    /// Selects the cached structure-constant table matching this scalar mode.
    fn pick<'a>(exact: &'a [Q], float: &'a [f64]) -> &'a [Self];
}

impl Scalar for Q {
    const EXACT: bool = true;

    fn from_q(x: &Q) -> Self {
        x.clone()
    }

    fn from_i64(x: i64) -> Self {
        qi(x)
    }

    fn to_f64(&self) -> f64 {
        q_to_f64(self)
    }

    fn magnitude(&self) -> f64 {
        q_to_f64(&self.abs())
    }

    fn is_negligible(&self, _tol: f64) -> bool {
        self.is_zero()
    }

    fn pow_weight(&self, w: &Q) -> Option<Self> {
        if self.is_zero() {
            return if w.is_positive() { Some(Q::zero()) } else { None };
        }
        q_as_integer(w).map(|e| q_powi(self, e))
    }

    fn pick<'a>(exact: &'a [Q], _float: &'a [f64]) -> &'a [Self] {
        exact
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_q(x: &Q) -> Self {
        q_to_f64(x)
    }

    fn from_i64(x: i64) -> Self {
        x as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn is_negligible(&self, tol: f64) -> bool {
        self.abs() <= tol
    }

    fn pow_weight(&self, w: &Q) -> Option<Self> {
        match q_as_integer(w) {
            Some(e) => Some(self.powi(e as i32)),
            None => Some(self.powf(q_to_f64(w))),
        }
    }

    fn pick<'a>(_exact: &'a [Q], float: &'a [f64]) -> &'a [Self] {
        float
    }
}

/// Factorial as an exact rational.
pub fn factorial(n: usize) -> Q {
    (1..=n as i64).fold(qi(1), |acc, k| acc * qi(k))
}

/// Bernoulli numbers `B_0..=B_n` with the convention `B_1 = +1/2`.
pub fn bernoulli_plus(n: usize) -> Vec<Q> {
    // B_m = -sum_{k<m} C(m+1,k) B_k / (m+1) gives B_1 = -1/2; flip it afterwards.
    let mut b = vec![qi(1)];
    for m in 1..=n {
        let mut acc = Q::zero();
        for (k, bk) in b.iter().enumerate() {
            acc = acc + binomial(m + 1, k) * bk.clone();
        }
        b.push(-acc / qi(m as i64 + 1));
    }
    if n >= 1 {
        b[1] = q(1, 2);
    }
    b
}

fn binomial(n: usize, k: usize) -> Q {
    factorial(n) / (factorial(k) * factorial(n - k))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bernoulli_values() {
        let b = bernoulli_plus(6);
        assert_eq!(b[0], qi(1));
        assert_eq!(b[1], q(1, 2));
        assert_eq!(b[2], q(1, 6));
        assert_eq!(b[3], qi(0));
        assert_eq!(b[4], q(-1, 30));
        assert_eq!(b[6], q(1, 42));
    }

    #[test]
    fn float_roundtrip_is_exact() {
        let x = 0.1_f64;
        assert_eq!(q_to_f64(&q_from_f64(x)), x);
    }

    #[test]
    fn rational_pow_weight_needs_integer_exponent() {
        assert_eq!(q(2, 1).pow_weight(&qi(3)), Some(qi(8)));
        assert_eq!(q(2, 1).pow_weight(&q(1, 2)), None);
        assert_eq!(q(1, 2).pow_weight(&qi(-2)), Some(qi(4)));
    }
}
