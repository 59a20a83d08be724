//! Forward-mode automatic differentiation on (value, derivative) pairs.
//!
//! A [`DualScalar`] carries a value together with the derivative of that
//! value with respect to one seeded variable. Arithmetic propagates both
//! halves at once, so the derivative of any composite falls out of the
//! ordinary evaluation order with no symbolic expansion.
//!
//! The pricing code is written against the [`Scalar`] trait, which both
//! `f64` and `DualScalar` satisfy. One pricer body therefore serves plain
//! pricing and differentiation; the value lane of a dual evaluation is
//! bit-identical to the `f64` evaluation of the same expression.

use std::ops::{Add, Div, Mul, Neg, Sub};

use thiserror::Error;

/// Errors from the checked dual operations.
#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum DualError {
    /// Division by a dual whose value is zero.
    #[error("division by a dual number with zero value")]
    DivisionByZero,
    /// Square root of a non-positive value; the derivative 1/(2√x) is
    /// undefined at and below zero.
    #[error("square root of a dual number with non-positive value")]
    NonPositiveSqrt,
}

/// A first-order dual number: `value` plus `deriv`·ε with ε² = 0.
///
/// Seed the variable of differentiation with [`DualScalar::variable`]
/// (derivative 1) and everything else with [`DualScalar::constant`]
/// (derivative 0).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DualScalar {
    /// The primal value.
    pub value: f64,
    /// Derivative of `value` with respect to the seeded variable.
    pub deriv: f64,
}

impl DualScalar {
    pub fn new(value: f64, deriv: f64) -> Self {
        Self { value, deriv }
    }

    /// The variable being differentiated against: derivative 1.
    pub fn variable(x: f64) -> Self {
        Self::new(x, 1.0)
    }

    /// A constant with respect to the seeded variable: derivative 0.
    pub fn constant(x: f64) -> Self {
        Self::new(x, 0.0)
    }

    /// e^x, with derivative e^x · x'.
    pub fn exp(self) -> Self {
        let e = self.value.exp();
        Self::new(e, e * self.deriv)
    }

    /// Checked square root: (√x, x′ / (2√x)). Requires `value > 0`.
    pub fn try_sqrt(self) -> Result<Self, DualError> {
        if self.value <= 0.0 {
            return Err(DualError::NonPositiveSqrt);
        }
        let root = self.value.sqrt();
        Ok(Self::new(root, self.deriv / (2.0 * root)))
    }

    /// Checked division; errors instead of emitting a NaN/∞ pair.
    pub fn try_div(self, rhs: Self) -> Result<Self, DualError> {
        if rhs.value == 0.0 {
            return Err(DualError::DivisionByZero);
        }
        Ok(self / rhs)
    }

    /// max(0, x) with derivative 0 at and below the kink.
    ///
    /// The subgradient at exactly zero is taken as 0, so a root-finder
    /// sees an at-the-kink node as insensitive rather than sloped.
    pub fn max_zero(self) -> Self {
        if self.value > 0.0 {
            self
        } else {
            Self::constant(0.0)
        }
    }
}

impl Add for DualScalar {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.value + rhs.value, self.deriv + rhs.deriv)
    }
}

impl Sub for DualScalar {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.value - rhs.value, self.deriv - rhs.deriv)
    }
}

impl Mul for DualScalar {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self::new(
            self.value * rhs.value,
            self.deriv * rhs.value + self.value * rhs.deriv,
        )
    }
}

/// Quotient rule. The divisor's value must be nonzero; use
/// [`DualScalar::try_div`] when that is not statically known.
impl Div for DualScalar {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        Self::new(
            self.value / rhs.value,
            (self.deriv * rhs.value - self.value * rhs.deriv) / (rhs.value * rhs.value),
        )
    }
}

impl Neg for DualScalar {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.value, -self.deriv)
    }
}

/// Number-like interface the pricer is generic over.
///
/// `f64` implements it with plain arithmetic; [`DualScalar`] implements it
/// with derivative propagation. Branching in generic code must go through
/// [`Scalar::value`] so both instantiations take identical paths.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Embed a plain number as a constant.
    fn constant(x: f64) -> Self;
    /// The primal value, used for comparisons and branching.
    fn value(self) -> f64;
    fn exp(self) -> Self;
    /// Square root. Callers must ensure the value is positive.
    fn sqrt(self) -> Self;
    /// max(0, x); the dual form has derivative 0 at and below the kink.
    fn max_zero(self) -> Self;
}

impl Scalar for f64 {
    fn constant(x: f64) -> Self {
        x
    }
    fn value(self) -> f64 {
        self
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn max_zero(self) -> Self {
        if self > 0.0 {
            self
        } else {
            0.0
        }
    }
}

impl Scalar for DualScalar {
    fn constant(x: f64) -> Self {
        DualScalar::constant(x)
    }
    fn value(self) -> f64 {
        self.value
    }
    fn exp(self) -> Self {
        DualScalar::exp(self)
    }
    fn sqrt(self) -> Self {
        self.try_sqrt()
            .expect("Scalar::sqrt requires a positive value")
    }
    fn max_zero(self) -> Self {
        DualScalar::max_zero(self)
    }
}
