//! Exact ordered-field scalars.
//!
//! Every probability, capacity and coefficient in the crate is carried by a
//! [`Scalar`]. The checks compare quantities with zero tolerance, so only
//! exact rational types implement the trait.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio, Rational64};
use num_traits::{Num, Signed, ToPrimitive, Zero};

/// An exact ordered field element.
pub trait Scalar: Clone + Ord + Num + Signed + Debug + Display + Send + Sync + 'static {
    fn from_ratio(numer: i64, denom: i64) -> Self;

    fn from_int(n: i64) -> Self {
        Self::from_ratio(n, 1)
    }

    /// Parses `"p/q"`, an integer, or a plain decimal string such as `"0.125"`.
    fn parse_exact(s: &str) -> Option<Self>;

    /// Always renders as `"p/q"`, including integers (`"1/1"`, `"0/1"`).
    fn to_fraction(&self) -> String;

    fn to_f64(&self) -> f64;

    fn to_big_rational(&self) -> BigRational;

    /// `None` when the value does not fit the backing integer type.
    fn from_big_rational(value: &BigRational) -> Option<Self>;
}

pub fn sum<'a, T: Scalar, I: IntoIterator<Item = &'a T>>(items: I) -> T {
    items.into_iter().fold(T::zero(), |acc, v| acc + v.clone())
}

pub fn min<T: Scalar>(a: &T, b: &T) -> T {
    if a <= b {
        a.clone()
    } else {
        b.clone()
    }
}

/// Splits a decimal literal into an integer mantissa string and a power of ten.
fn decimal_parts(s: &str) -> Option<(String, u32)> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let mut digits = String::with_capacity(body.len() + 1);
    if neg {
        digits.push('-');
    }
    digits.push_str(if int_part.is_empty() { "0" } else { int_part });
    digits.push_str(frac_part);
    Some((digits, frac_part.len() as u32))
}

fn parse_big(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(BigRational::new(n, d));
    }
    let (digits, scale) = decimal_parts(s)?;
    let n: BigInt = digits.parse().ok()?;
    let d = num_traits::pow(BigInt::from(10), scale as usize);
    Some(BigRational::new(n, d))
}

fn big_to_f64(v: &BigRational) -> f64 {
    ToPrimitive::to_f64(v).unwrap_or(f64::NAN)
}

impl Scalar for BigRational {
    fn from_ratio(numer: i64, denom: i64) -> Self {
        BigRational::new(BigInt::from(numer), BigInt::from(denom))
    }

    fn parse_exact(s: &str) -> Option<Self> {
        parse_big(s)
    }

    fn to_fraction(&self) -> String {
        format!("{}/{}", self.numer(), self.denom())
    }

    fn to_f64(&self) -> f64 {
        big_to_f64(self)
    }

    fn to_big_rational(&self) -> BigRational {
        self.clone()
    }

    fn from_big_rational(value: &BigRational) -> Option<Self> {
        Some(value.clone())
    }
}

impl Scalar for Rational64 {
    fn from_ratio(numer: i64, denom: i64) -> Self {
        Ratio::new(numer, denom)
    }

    fn parse_exact(s: &str) -> Option<Self> {
        Self::from_big_rational(&parse_big(s)?)
    }

    fn to_fraction(&self) -> String {
        format!("{}/{}", self.numer(), self.denom())
    }

    fn to_f64(&self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }

    fn to_big_rational(&self) -> BigRational {
        BigRational::new(BigInt::from(*self.numer()), BigInt::from(*self.denom()))
    }

    fn from_big_rational(value: &BigRational) -> Option<Self> {
        let n = value.numer().to_i64()?;
        let d = value.denom().to_i64()?;
        Some(Ratio::new(n, d))
    }
}

/// `true` when `v` lies in the closed unit interval.
pub fn is_probability<T: Scalar>(v: &T) -> bool {
    !v.is_negative() && *v <= T::one()
}
