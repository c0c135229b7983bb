//! Arbitrary-precision exact fractions.
//!
//! [`Rational`] always holds a reduced fraction with a strictly positive
//! denominator; zero is `0/1`. The canonical text form is
//! `<numerator>/<denominator>` in base 10, with an optional leading `-` on
//! the numerator and no whitespace (`-1/2`, `3/1`, `0/1`).

use std::fmt;
use std::iter::{Product, Sum};
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseRationalError {
    #[error("empty rational literal")]
    Empty,
    #[error("malformed rational literal `{0}`")]
    Malformed(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
    #[error("`{0}` is not in canonical <num>/<den> form")]
    NotCanonical(String),
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rational(BigRational);

impl Rational {
    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    pub fn from_integer(n: impl Into<BigInt>) -> Self {
        Rational(BigRational::from_integer(n.into()))
    }

    /// Panics if `den` is zero.
    pub fn new(num: impl Into<BigInt>, den: impl Into<BigInt>) -> Self {
        Rational(BigRational::new(num.into(), den.into()))
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    /// `None` when `self` is zero.
    pub fn checked_recip(&self) -> Option<Self> {
        if self.is_zero() {
            None
        } else {
            Some(Rational(self.0.recip()))
        }
    }

    /// `None` when `rhs` is zero.
    pub fn checked_div(&self, rhs: &Rational) -> Option<Self> {
        rhs.checked_recip().map(|r| self * &r)
    }

    pub fn pow(&self, exp: u32) -> Self {
        let mut acc = Rational::one();
        for _ in 0..exp {
            acc = &acc * self;
        }
        acc
    }

    /// Holds for every value this type can construct; exposed for tests.
    pub fn is_canonical(&self) -> bool {
        use num_integer::Integer;
        self.denom().is_positive() && self.numer().gcd(self.denom()).is_one()
    }

    /// Parses only the exact canonical encoding: reduced, positive
    /// denominator, no leading zeros, no `-0`, no whitespace.
    pub fn parse_canonical(s: &str) -> Result<Self, ParseRationalError> {
        let (num, den) = s.split_once('/').ok_or_else(|| ParseRationalError::NotCanonical(s.to_owned()))?;
        let value = parse_fraction(s, num, den)?;
        if value.to_string() != s {
            return Err(ParseRationalError::NotCanonical(s.to_owned()));
        }
        Ok(value)
    }
}

fn parse_int(whole: &str, digits: &str) -> Result<BigInt, ParseRationalError> {
    let body = digits.strip_prefix('-').unwrap_or(digits);
    if body.is_empty() || !body.bytes().all(|b| b.is_ascii_digit()) {
        return Err(ParseRationalError::Malformed(whole.to_owned()));
    }
    digits.parse::<BigInt>().map_err(|_| ParseRationalError::Malformed(whole.to_owned()))
}

fn parse_fraction(whole: &str, num: &str, den: &str) -> Result<Rational, ParseRationalError> {
    let n = parse_int(whole, num)?;
    let d = parse_int(whole, den)?;
    if d.is_zero() {
        return Err(ParseRationalError::ZeroDenominator(whole.to_owned()));
    }
    Ok(Rational(BigRational::new(n, d)))
}

/// Lenient parse: accepts a bare integer (`7`, `-3`) or any `<num>/<den>`
/// with a nonzero denominator, reducing the result.
impl FromStr for Rational {
    type Err = ParseRationalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() {
            return Err(ParseRationalError::Empty);
        }
        match s.split_once('/') {
            Some((num, den)) => parse_fraction(s, num, den),
            None => Ok(Rational(BigRational::from_integer(parse_int(s, s)?))),
        }
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer(), self.denom())
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

macro_rules! from_int {
    ($($t:ty),*) => {$(
        impl From<$t> for Rational {
            fn from(n: $t) -> Self {
                Rational::from_integer(n)
            }
        }
    )*};
}
from_int!(i8, i16, i32, i64, i128, u8, u16, u32, u64, u128, usize, isize);

impl From<BigInt> for Rational {
    fn from(n: BigInt) -> Self {
        Rational::from_integer(n)
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident) => {
        impl<'a> $trait<&'a Rational> for &'a Rational {
            type Output = Rational;
            fn $method(self, rhs: &'a Rational) -> Rational {
                Rational((&self.0).$method(&rhs.0))
            }
        }
        impl $trait<Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational(self.0.$method(rhs.0))
            }
        }
        impl<'a> $trait<&'a Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &'a Rational) -> Rational {
                Rational(self.0.$method(&rhs.0))
            }
        }
    };
}
binop!(Add, add);
binop!(Sub, sub);
binop!(Mul, mul);

/// Panics on division by zero; use [`Rational::checked_div`] on untrusted input.
impl<'a> Div<&'a Rational> for &'a Rational {
    type Output = Rational;
    fn div(self, rhs: &'a Rational) -> Rational {
        Rational(&self.0 / &rhs.0)
    }
}

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl Neg for &Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-&self.0)
    }
}

impl Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Self {
        iter.fold(Rational::zero(), |acc, x| acc + x)
    }
}

impl<'a> Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Rational>>(iter: I) -> Self {
        iter.fold(Rational::zero(), |acc, x| acc + x)
    }
}

impl Product for Rational {
    fn product<I: Iterator<Item = Rational>>(iter: I) -> Self {
        iter.fold(Rational::one(), |acc, x| acc * x)
    }
}
