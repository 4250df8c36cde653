//! Exact rationals and extended reals.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Neg};

use num::bigint::BigInt;
use num::{One, Signed, ToPrimitive, Zero};

pub type Rational = num::BigRational;

pub fn rational(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn rint(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

/// Parses `p/q`, a signed integer, or a finite decimal such as `0.125` exactly.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    if text.is_empty() {
        return None;
    }
    if let Some((numer, denom)) = text.split_once('/') {
        let numer: BigInt = numer.parse().ok()?;
        let denom: BigInt = denom.parse().ok()?;
        if denom.is_zero() {
            return None;
        }
        return Some(Rational::new(numer, denom));
    }
    if let Some((whole, frac)) = text.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|c| c.is_ascii_digit()) {
            return None;
        }
        let negative = whole.starts_with('-');
        let whole_digits = whole.trim_start_matches(['-', '+']);
        if !whole_digits.bytes().all(|c| c.is_ascii_digit()) {
            return None;
        }
        let digits: BigInt = format!("{whole_digits}{frac}").parse().ok()?;
        let scale = num::pow(BigInt::from(10), frac.len());
        let value = Rational::new(digits, scale);
        return Some(if negative { -value } else { value });
    }
    text.parse::<BigInt>().ok().map(Rational::from_integer)
}

pub fn to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or_else(|| {
        if value.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// A real number extended with `+inf` and `-inf`.
///
/// Sums of opposite infinities cannot arise for sign-homogeneous reward
/// structures and panic if attempted.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Extended {
    NegInf,
    Finite(Rational),
    PosInf,
}

impl Extended {
    pub fn zero() -> Self {
        Extended::Finite(Rational::zero())
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Extended::Finite(v) if v.is_zero())
    }

    pub fn is_positive(&self) -> bool {
        match self {
            Extended::PosInf => true,
            Extended::Finite(v) => v.is_positive(),
            Extended::NegInf => false,
        }
    }

    pub fn is_negative(&self) -> bool {
        match self {
            Extended::NegInf => true,
            Extended::Finite(v) => v.is_negative(),
            Extended::PosInf => false,
        }
    }

    pub fn finite(&self) -> Option<&Rational> {
        match self {
            Extended::Finite(v) => Some(v),
            _ => None,
        }
    }

    /// Scales by a non-negative factor; `0 * inf` is taken to be `0`.
    pub fn scale(&self, factor: &Rational) -> Extended {
        debug_assert!(!factor.is_negative());
        if factor.is_zero() {
            return Extended::zero();
        }
        match self {
            Extended::Finite(v) => Extended::Finite(v * factor),
            other => other.clone(),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Extended::NegInf => f64::NEG_INFINITY,
            Extended::PosInf => f64::INFINITY,
            Extended::Finite(v) => to_f64(v),
        }
    }

    pub fn from_f64(value: f64) -> Option<Extended> {
        if value.is_nan() {
            None
        } else if value == f64::INFINITY {
            Some(Extended::PosInf)
        } else if value == f64::NEG_INFINITY {
            Some(Extended::NegInf)
        } else {
            Rational::from_float(value).map(Extended::Finite)
        }
    }

    /// Parses a rational or one of `inf`, `+inf`, `-inf`.
    pub fn parse(text: &str) -> Option<Extended> {
        match text.trim() {
            "inf" | "+inf" => Some(Extended::PosInf),
            "-inf" => Some(Extended::NegInf),
            other => parse_rational(other).map(Extended::Finite),
        }
    }
}

impl From<Rational> for Extended {
    fn from(value: Rational) -> Self {
        Extended::Finite(value)
    }
}

impl PartialOrd for Extended {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Extended {
    fn cmp(&self, other: &Self) -> Ordering {
        use Extended::*;
        match (self, other) {
            (NegInf, NegInf) | (PosInf, PosInf) => Ordering::Equal,
            (NegInf, _) | (_, PosInf) => Ordering::Less,
            (_, NegInf) | (PosInf, _) => Ordering::Greater,
            (Finite(a), Finite(b)) => a.cmp(b),
        }
    }
}

impl Add for &Extended {
    type Output = Extended;

    fn add(self, rhs: &Extended) -> Extended {
        use Extended::*;
        match (self, rhs) {
            (Finite(a), Finite(b)) => Finite(a + b),
            (NegInf, PosInf) | (PosInf, NegInf) => {
                panic!("sum of opposite infinities in a sign-homogeneous computation")
            }
            (NegInf, _) | (_, NegInf) => NegInf,
            (PosInf, _) | (_, PosInf) => PosInf,
        }
    }
}

impl Add for Extended {
    type Output = Extended;

    fn add(self, rhs: Extended) -> Extended {
        &self + &rhs
    }
}

impl Neg for Extended {
    type Output = Extended;

    fn neg(self) -> Extended {
        match self {
            Extended::NegInf => Extended::PosInf,
            Extended::PosInf => Extended::NegInf,
            Extended::Finite(v) => Extended::Finite(-v),
        }
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::NegInf => f.write_str("-inf"),
            Extended::PosInf => f.write_str("inf"),
            Extended::Finite(v) => write!(f, "{v}"),
        }
    }
}

pub fn is_one(value: &Rational) -> bool {
    value.is_one()
}
