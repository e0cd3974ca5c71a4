//! Forward-mode jets.
//!
//! A [`Jet`] carries a value and one first-order derivative. Jets are generic
//! over their underlying scalar, so `Jet<Jet<f64>>` gives exact mixed second
//! derivatives and deeper towers give higher ones.

use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

/// Argument outside the domain of an elementary function.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("{op} is undefined at {value}")]
pub struct DomainError {
    pub op: &'static str,
    pub value: f64,
}

impl DomainError {
    pub fn new(op: &'static str, value: f64) -> Self {
        DomainError { op, value }
    }
}

/// A commutative ring with the elementary functions used by expressions.
pub trait Scalar:
    Copy
    + Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(c: f64) -> Self;

    /// The innermost real value.
    fn real(&self) -> f64;

    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Result<Self, DomainError>;
    fn sqrt(self) -> Result<Self, DomainError>;
    fn recip(self) -> Result<Self, DomainError>;
    fn abs(self) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn one() -> Self {
        Self::from_f64(1.0)
    }

    fn checked_div(self, rhs: Self) -> Result<Self, DomainError> {
        Ok(self * rhs.recip()?)
    }

    fn scale(self, c: f64) -> Self {
        self * Self::from_f64(c)
    }

    /// Integer power by repeated multiplication.
    fn powi(self, n: i32) -> Result<Self, DomainError> {
        let base = if n < 0 { self.recip()? } else { self };
        let mut k = n.unsigned_abs();
        let mut acc = Self::one();
        let mut sq = base;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc * sq;
            }
            k >>= 1;
            if k > 0 {
                sq = sq * sq;
            }
        }
        Ok(acc)
    }

    /// Real power; integral exponents go through [`Scalar::powi`], anything
    /// else needs a positive base.
    fn powf(self, e: f64) -> Result<Self, DomainError> {
        if e.fract() == 0.0 && e.abs() <= i32::MAX as f64 {
            return self.powi(e as i32);
        }
        if self.real() <= 0.0 {
            return Err(DomainError::new("pow", self.real()));
        }
        Ok((self.ln()?.scale(e)).exp())
    }

    /// Power with a variable exponent; positive base only.
    fn pow(self, e: Self) -> Result<Self, DomainError> {
        if self.real() <= 0.0 {
            return Err(DomainError::new("pow", self.real()));
        }
        Ok((self.ln()? * e).exp())
    }
}

impl Scalar for f64 {
    fn from_f64(c: f64) -> Self {
        c
    }

    fn real(&self) -> f64 {
        *self
    }

    fn sin(self) -> Self {
        f64::sin(self)
    }

    fn cos(self) -> Self {
        f64::cos(self)
    }

    fn exp(self) -> Self {
        f64::exp(self)
    }

    fn ln(self) -> Result<Self, DomainError> {
        if self > 0.0 {
            Ok(f64::ln(self))
        } else {
            Err(DomainError::new("ln", self))
        }
    }

    fn sqrt(self) -> Result<Self, DomainError> {
        if self > 0.0 {
            Ok(f64::sqrt(self))
        } else {
            Err(DomainError::new("sqrt", self))
        }
    }

    fn recip(self) -> Result<Self, DomainError> {
        if self != 0.0 {
            Ok(1.0 / self)
        } else {
            Err(DomainError::new("recip", self))
        }
    }

    fn abs(self) -> Self {
        f64::abs(self)
    }
}

/// Value plus one formal derivative.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet<S> {
    pub value: S,
    pub deriv: S,
}

pub type J1 = Jet<f64>;
pub type J2 = Jet<J1>;
pub type J3 = Jet<J2>;
pub type J4 = Jet<J3>;

impl<S: Scalar> Jet<S> {
    pub fn new(value: S, deriv: S) -> Self {
        Jet { value, deriv }
    }

    /// A constant: zero derivative.
    pub fn lift(c: S) -> Self {
        Jet { value: c, deriv: S::zero() }
    }

    /// The differentiation variable: unit derivative.
    pub fn seed(c: S) -> Self {
        Jet { value: c, deriv: S::one() }
    }

    // chain rule with f(value) and f'(value) already computed
    fn chain(self, f: S, df: S) -> Self {
        Jet { value: f, deriv: df * self.deriv }
    }
}

impl<S: Scalar> Add for Jet<S> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Jet { value: self.value + o.value, deriv: self.deriv + o.deriv }
    }
}

impl<S: Scalar> Sub for Jet<S> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Jet { value: self.value - o.value, deriv: self.deriv - o.deriv }
    }
}

impl<S: Scalar> Mul for Jet<S> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Jet {
            value: self.value * o.value,
            deriv: self.value * o.deriv + self.deriv * o.value,
        }
    }
}

impl<S: Scalar> Neg for Jet<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Jet { value: -self.value, deriv: -self.deriv }
    }
}

impl<S: Scalar> Scalar for Jet<S> {
    fn from_f64(c: f64) -> Self {
        Jet::lift(S::from_f64(c))
    }

    fn real(&self) -> f64 {
        self.value.real()
    }

    fn sin(self) -> Self {
        self.chain(self.value.sin(), self.value.cos())
    }

    fn cos(self) -> Self {
        self.chain(self.value.cos(), -self.value.sin())
    }

    fn exp(self) -> Self {
        let e = self.value.exp();
        self.chain(e, e)
    }

    fn ln(self) -> Result<Self, DomainError> {
        if self.real() <= 0.0 {
            return Err(DomainError::new("ln", self.real()));
        }
        Ok(self.chain(self.value.ln()?, self.value.recip()?))
    }

    fn sqrt(self) -> Result<Self, DomainError> {
        if self.real() <= 0.0 {
            return Err(DomainError::new("sqrt", self.real()));
        }
        let r = self.value.sqrt()?;
        Ok(self.chain(r, r.scale(2.0).recip()?))
    }

    fn recip(self) -> Result<Self, DomainError> {
        let r = self.value.recip()?;
        Ok(self.chain(r, -(r * r)))
    }

    // sign(0) = 0: a subgradient, keeps real and jet evaluation in step
    fn abs(self) -> Self {
        let v = self.real();
        let s = if v > 0.0 {
            1.0
        } else if v < 0.0 {
            -1.0
        } else {
            0.0
        };
        Jet { value: self.value.abs(), deriv: self.deriv.scale(s) }
    }
}

/// Elementary operations applicable to any [`Scalar`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Elementary {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Neg,
    Recip,
    Pow(f64),
}

impl Elementary {
    pub fn apply<S: Scalar>(self, x: S) -> Result<S, DomainError> {
        match self {
            Elementary::Sin => Ok(x.sin()),
            Elementary::Cos => Ok(x.cos()),
            Elementary::Exp => Ok(x.exp()),
            Elementary::Ln => x.ln(),
            Elementary::Sqrt => x.sqrt(),
            Elementary::Abs => Ok(x.abs()),
            Elementary::Neg => Ok(-x),
            Elementary::Recip => x.recip(),
            Elementary::Pow(e) => x.powf(e),
        }
    }
}
