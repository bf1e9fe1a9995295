//! Truncated power series with nonnegative coefficients.
//!
//! A [`PowerSeries`] stores the coefficients `c_0, ..., c_N` of a series
//! truncated at order `N`. Products are truncated at the smaller of the two
//! orders. The coefficient type is either `f64` or an exact [`BigRational`];
//! both implement [`Coeff`].

use std::fmt;
use std::ops::{Add, Div, Mul, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Default truncation order for floating-point work.
pub const DEFAULT_ORDER: usize = 256;

/// Scalar backend for power-series coefficients.
pub trait Coeff:
    Clone
    + PartialOrd
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + fmt::Debug
{
    fn from_u64(n: u64) -> Self;
    fn to_f64(&self) -> f64;
}

impl Coeff for f64 {
    fn from_u64(n: u64) -> Self {
        n as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Coeff for BigRational {
    fn from_u64(n: u64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// A truncated power series `sum_{n <= N} c_n z^n` with `c_n >= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerSeries<C = f64> {
    coeffs: Vec<C>,
    radius: f64,
}

impl<C: Coeff> PowerSeries<C> {
    /// Builds a series from its coefficients. The truncation order is
    /// `coeffs.len() - 1`; the radius defaults to `+inf`.
    pub fn new(coeffs: Vec<C>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidSeries("no coefficients".into()));
        }
        if let Some(n) = coeffs.iter().position(|c| *c < C::zero()) {
            return Err(Error::InvalidSeries(format!(
                "coefficient {n} is negative ({:?})",
                coeffs[n]
            )));
        }
        Ok(PowerSeries {
            coeffs,
            radius: f64::INFINITY,
        })
    }

    pub(crate) fn from_vec_unchecked(coeffs: Vec<C>, radius: f64) -> Self {
        debug_assert!(!coeffs.is_empty());
        PowerSeries { coeffs, radius }
    }

    /// Declares the radius of convergence of the underlying (untruncated) series.
    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }

    /// The constant series `1` truncated at `order`.
    pub fn one(order: usize) -> Self {
        let mut coeffs = vec![C::zero(); order + 1];
        coeffs[0] = C::one();
        PowerSeries::from_vec_unchecked(coeffs, f64::INFINITY)
    }

    /// The series `z` truncated at `order` (`order >= 1`).
    pub fn identity(order: usize) -> Self {
        let mut coeffs = vec![C::zero(); order.max(1) + 1];
        coeffs[1] = C::one();
        PowerSeries::from_vec_unchecked(coeffs, f64::INFINITY)
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn coeffs(&self) -> &[C] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<C> {
        self.coeffs
    }

    /// Coefficient of `z^n`, zero beyond the truncation.
    pub fn coeff(&self, n: usize) -> C {
        self.coeffs.get(n).cloned().unwrap_or_else(C::zero)
    }

    /// Membership in class K: `c_0 > 0` and some `c_n > 0` with `n >= 1`.
    pub fn is_class_k(&self) -> bool {
        self.coeffs[0] > C::zero() && self.coeffs[1..].iter().any(|c| *c > C::zero())
    }

    /// Re-truncates (or zero-pads) the series to `order`.
    pub fn truncate(&self, order: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(order + 1, C::zero());
        PowerSeries::from_vec_unchecked(coeffs, self.radius)
    }

    /// Horner evaluation of the truncation at `t`.
    pub fn eval(&self, t: &C) -> Result<C> {
        let tf = t.to_f64();
        if tf.is_nan() || tf < 0.0 || tf >= self.radius {
            return Err(Error::domain(
                "t",
                tf,
                format!("[0, {})", self.radius),
            ));
        }
        Ok(self
            .coeffs
            .iter()
            .rev()
            .fold(C::zero(), |acc, c| acc * t.clone() + c.clone()))
    }

    /// Cauchy product truncated at `min(N_a, N_b)`.
    pub fn mul(&self, other: &Self) -> Self {
        let order = self.order().min(other.order());
        let mut out = vec![C::zero(); order + 1];
        for (i, a) in self.coeffs.iter().take(order + 1).enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().take(order + 1 - i).enumerate() {
                out[i + j] = out[i + j].clone() + a.clone() * b.clone();
            }
        }
        PowerSeries::from_vec_unchecked(out, self.radius.min(other.radius))
    }

    /// `self^n` by repeated squaring; `pow(0)` is the constant `1`.
    pub fn pow(&self, mut n: u64) -> Self {
        let mut result = PowerSeries::one(self.order()).with_radius(self.radius);
        let mut base = self.clone();
        while n > 0 {
            if n & 1 == 1 {
                result = result.mul(&base);
            }
            n >>= 1;
            if n > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    /// Term-wise derivative; the truncation order drops by one.
    pub fn derivative(&self) -> Self {
        if self.coeffs.len() == 1 {
            return PowerSeries::from_vec_unchecked(vec![C::zero()], self.radius);
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(n, c)| C::from_u64(n as u64) * c.clone())
            .collect();
        PowerSeries::from_vec_unchecked(coeffs, self.radius)
    }

    /// Multiplies coefficient `n` by `s^n`, i.e. returns `f(s z)`.
    pub fn scale(&self, s: &C) -> Self {
        let mut power = C::one();
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| {
                let v = c.clone() * power.clone();
                power = power.clone() * s.clone();
                v
            })
            .collect();
        PowerSeries::from_vec_unchecked(coeffs, self.radius / s.to_f64())
    }

    /// Multiplies by `z`, keeping the truncation order.
    pub fn shift_up(&self) -> Self {
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        coeffs.push(C::zero());
        coeffs.extend(self.coeffs[..self.coeffs.len() - 1].iter().cloned());
        PowerSeries::from_vec_unchecked(coeffs, self.radius)
    }

    /// Composition `self(inner(z))` truncated at `inner`'s order.
    /// Requires `inner` to have zero constant term.
    pub fn compose(&self, inner: &Self) -> Result<Self> {
        if !inner.coeffs[0].is_zero() {
            return Err(Error::InvalidSeries(
                "inner series of a composition must vanish at 0".into(),
            ));
        }
        let order = inner.order();
        // inner^k = O(z^k), so coefficients of self beyond `order` do not contribute.
        let top = self.order().min(order);
        let mut acc = PowerSeries::one(order);
        acc.coeffs[0] = self.coeffs[top].clone();
        for k in (0..top).rev() {
            acc = acc.mul(inner);
            acc.coeffs[0] = acc.coeffs[0].clone() + self.coeffs[k].clone();
        }
        Ok(acc)
    }
}

impl<C: Coeff + fmt::Display> fmt::Display for PowerSeries<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (n, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match n {
                0 => write!(f, "{c}")?,
                1 => write!(f, "({c})*z")?,
                _ => write!(f, "({c})*z^{n}")?,
            }
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, " + O(z^{})", self.order() + 1)
    }
}

/// Coefficients `1/k!` for `k <= order`, exactly.
pub fn exp_series_exact(order: usize) -> PowerSeries<BigRational> {
    let mut coeffs = Vec::with_capacity(order + 1);
    let mut fact = BigInt::one();
    for k in 0..=order {
        if k > 0 {
            fact *= BigInt::from(k);
        }
        coeffs.push(BigRational::new(BigInt::one(), fact.clone()));
    }
    PowerSeries::from_vec_unchecked(coeffs, f64::INFINITY)
}

/// Coefficients `1/k!` for `k <= order` in floating point.
pub fn exp_series(order: usize) -> PowerSeries<f64> {
    let mut coeffs = Vec::with_capacity(order + 1);
    let mut c = 1.0;
    for k in 0..=order {
        if k > 0 {
            c /= k as f64;
        }
        coeffs.push(c);
    }
    PowerSeries::from_vec_unchecked(coeffs, f64::INFINITY)
}

/// The truncated geometric series `1/(1 - z)`.
pub fn geometric_series<C: Coeff>(order: usize) -> PowerSeries<C> {
    PowerSeries::from_vec_unchecked(vec![C::one(); order + 1], 1.0)
}
