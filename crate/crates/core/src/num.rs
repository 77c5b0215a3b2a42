//! Scalar abstraction shared by the exact-rational and floating-point table modes.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// Which arithmetic a table is stored in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Rational,
    Float,
}

/// Default tolerance for float-mode normalization and no-signaling checks.
pub const DEFAULT_TOL: f64 = 1e-9;

pub trait Scalar:
    Clone
    + Debug
    + PartialOrd
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
    + 'static
{
    const MODE: Mode;

    fn from_rational(r: &Rational) -> Self;
    fn from_usize(n: usize) -> Self;
    fn to_f64(&self) -> f64;

    /// Equality up to `tol`; exact in rational mode, where `tol` is ignored.
    fn near(&self, other: &Self, tol: f64) -> bool;

    fn is_negative(&self) -> bool {
        *self < Self::zero()
    }
}

impl Scalar for f64 {
    const MODE: Mode = Mode::Float;

    fn from_rational(r: &Rational) -> Self {
        rational_to_f64(r)
    }

    fn from_usize(n: usize) -> Self {
        n as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn near(&self, other: &Self, tol: f64) -> bool {
        (self - other).abs() <= tol
    }
}

impl Scalar for Rational {
    const MODE: Mode = Mode::Rational;

    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }

    fn from_usize(n: usize) -> Self {
        Rational::from_integer(BigInt::from(n))
    }

    fn to_f64(&self) -> f64 {
        rational_to_f64(self)
    }

    fn near(&self, other: &Self, _tol: f64) -> bool {
        self == other
    }
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    if let Some(v) = ToPrimitive::to_f64(r) {
        if v.is_finite() {
            return v;
        }
    }
    // Huge numerator and denominator: scale both down before dividing.
    let n = r.numer().bits() as i64;
    let d = r.denom().bits() as i64;
    let shift = (n.max(d) - 1000).max(0) as usize;
    let num = ToPrimitive::to_f64(&(r.numer() >> shift)).unwrap_or(f64::NAN);
    let den = ToPrimitive::to_f64(&(r.denom() >> shift)).unwrap_or(f64::NAN);
    num / den
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Exact value of a finite double.
pub fn rational_from_f64(v: f64) -> Result<Rational> {
    Rational::from_float(v).ok_or_else(|| Error::Parse(format!("non-finite value {v}")))
}

/// Nearest rational with denominator `2^bits`; snaps float noise like `1e-17` to zero.
pub fn rational_from_f64_rounded(v: f64, bits: u32) -> Result<Rational> {
    if !v.is_finite() {
        return Err(Error::Parse(format!("non-finite value {v}")));
    }
    let scale = 2f64.powi(bits as i32);
    let scaled = (v * scale).round();
    let num = BigInt::from(scaled as i128);
    Ok(Rational::new(num, BigInt::from(1u8) << bits as usize))
}

/// Always `num/den`, including integers (`0/1`).
pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Accepts `n`, `n/d` or a plain decimal such as `-0.125`; the result is exact.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational number: {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(n, d));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
    if (whole.is_empty() && frac.is_empty())
        || !whole.chars().all(|c| c.is_ascii_digit())
        || !frac.chars().all(|c| c.is_ascii_digit())
    {
        return Err(bad());
    }
    let digits = format!("{whole}{frac}");
    let num: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().map_err(|_| bad())?
    };
    let den = num_traits::pow(BigInt::from(10u8), frac.len());
    let r = Rational::new(num, den);
    Ok(if neg { -r } else { r })
}

/// Shannon entropy (bits) of a distribution; zero cells contribute nothing.
pub fn entropy(dist: &[f64]) -> f64 {
    dist.iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum()
}

pub fn binary_entropy(p: f64) -> f64 {
    entropy(&[p, 1.0 - p])
}
