//! Lagrange interpolation and polynomial evaluation over exact rationals.

use std::collections::HashSet;

use thiserror::Error;

use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolyError {
    #[error("interpolation needs at least one point")]
    Empty,
    #[error("duplicate abscissa {0}")]
    DuplicateX(Rational),
    #[error("basis index {index} out of range for {len} abscissae")]
    IndexOutOfRange { index: usize, len: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Point {
    pub x: Rational,
    pub y: Rational,
}

impl Point {
    pub fn new(x: impl Into<Rational>, y: impl Into<Rational>) -> Self {
        Point { x: x.into(), y: y.into() }
    }
}

/// Coefficients in ascending degree. The leading coefficient is never zero;
/// the zero polynomial has no coefficients at all.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Polynomial {
    coefficients: Vec<Rational>,
}

impl Polynomial {
    pub fn new(mut coefficients: Vec<Rational>) -> Self {
        while coefficients.last().is_some_and(Rational::is_zero) {
            coefficients.pop();
        }
        Polynomial { coefficients }
    }

    pub fn zero() -> Self {
        Polynomial::default()
    }

    pub fn coefficients(&self) -> &[Rational] {
        &self.coefficients
    }

    pub fn into_coefficients(self) -> Vec<Rational> {
        self.coefficients
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coefficients.len().checked_sub(1)
    }

    pub fn evaluate(&self, x: &Rational) -> Rational {
        evaluate(self, x)
    }
}

impl<T: Into<Rational>> FromIterator<T> for Polynomial {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        Polynomial::new(iter.into_iter().map(Into::into).collect())
    }
}

fn check_distinct<'a>(xs: impl IntoIterator<Item = &'a Rational>) -> Result<(), PolyError> {
    let mut seen = HashSet::new();
    for x in xs {
        if !seen.insert(x) {
            return Err(PolyError::DuplicateX(x.clone()));
        }
    }
    Ok(())
}

/// `L_i(x) = prod_{j != i} (x - x_j) / (x_i - x_j)`.
pub fn lagrange_basis(xs: &[Rational], i: usize, x: &Rational) -> Result<Rational, PolyError> {
    let xi = xs.get(i).ok_or(PolyError::IndexOutOfRange { index: i, len: xs.len() })?;
    check_distinct(xs)?;
    let mut num = Rational::one();
    let mut den = Rational::one();
    for (j, xj) in xs.iter().enumerate() {
        if j != i {
            num = num * (x - xj);
            den = den * (xi - xj);
        }
    }
    Ok(&num / &den)
}

/// Returns the unique polynomial of degree at most `points.len() - 1`
/// passing through every point.
///
/// Expands `sum_i y_i L_i(x)` in coefficient form: the node polynomial
/// `M(x) = prod_j (x - x_j)` is built once and each basis numerator is
/// recovered as `M(x) / (x - x_i)` by synthetic division, so the whole
/// interpolation is quadratic in the number of points.
pub fn interpolate(points: &[Point]) -> Result<Polynomial, PolyError> {
    if points.is_empty() {
        return Err(PolyError::Empty);
    }
    check_distinct(points.iter().map(|p| &p.x))?;

    let n = points.len();
    // node[d] is the coefficient of x^d in M(x); degree n, monic.
    let mut node = vec![Rational::zero(); n + 1];
    node[0] = Rational::one();
    for (deg, p) in points.iter().enumerate() {
        for d in (0..=deg + 1).rev() {
            let shifted = if d > 0 { node[d - 1].clone() } else { Rational::zero() };
            node[d] = shifted - &(&node[d] * &p.x);
        }
    }

    let mut acc = vec![Rational::zero(); n];
    let mut quotient = vec![Rational::zero(); n];
    for p in points {
        if p.y.is_zero() {
            continue;
        }
        // M(x) = (x - x_i) q(x); synthetic division from the top.
        let mut carry = Rational::zero();
        for d in (0..n).rev() {
            carry = &node[d + 1] + &(&carry * &p.x);
            quotient[d] = carry.clone();
        }
        let scale = &p.y / &evaluate_slice(&quotient, &p.x);
        for (a, q) in acc.iter_mut().zip(&quotient) {
            *a = &*a + &(q * &scale);
        }
    }
    Ok(Polynomial::new(acc))
}

fn evaluate_slice(coefficients: &[Rational], x: &Rational) -> Rational {
    coefficients.iter().rev().fold(Rational::zero(), |acc, c| &(&acc * x) + c)
}

/// Horner evaluation.
pub fn evaluate(p: &Polynomial, x: &Rational) -> Rational {
    evaluate_slice(&p.coefficients, x)
}

pub fn evaluate_many(p: &Polynomial, xs: &[Rational]) -> Vec<Rational> {
    xs.iter().map(|x| evaluate(p, x)).collect()
}
