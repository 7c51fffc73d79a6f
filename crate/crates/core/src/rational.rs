//! Exact rational numbers and their textual forms.
//!
//! Every distance in the crate is a [`Rational`]. Inputs accept integers,
//! finite decimals (`-0.125`, `3.`, `.5`) and fractions (`7/2`); decimals are
//! converted exactly. Output always uses the canonical reduced `a/b` form
//! (or a bare integer when the denominator is one).

use num_bigint::BigInt;
use num_traits::{One, Pow, Signed, Zero};

/// Arbitrary-precision rational number.
pub type Rational = num_rational::BigRational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse {text:?} as a rational number: {reason}")]
pub struct ParseRationalError {
    pub text: String,
    pub reason: &'static str,
}

fn parse_err(text: &str, reason: &'static str) -> ParseRationalError {
    ParseRationalError {
        text: text.to_string(),
        reason,
    }
}

fn parse_int(text: &str, digits: &str) -> Result<BigInt, ParseRationalError> {
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(parse_err(text, "expected decimal digits"));
    }
    digits
        .parse::<BigInt>()
        .map_err(|_| parse_err(text, "expected decimal digits"))
}

/// Parses an integer, a finite decimal or an `a/b` fraction exactly.
pub fn parse_rational(text: &str) -> Result<Rational, ParseRationalError> {
    let s = text.trim();
    if s.is_empty() {
        return Err(parse_err(text, "empty cell"));
    }
    if let Some((num, den)) = s.split_once('/') {
        let num = parse_signed_decimal(text, num.trim())?;
        let den = parse_signed_decimal(text, den.trim())?;
        if den.is_zero() {
            return Err(parse_err(text, "zero denominator"));
        }
        return Ok(num / den);
    }
    parse_signed_decimal(text, s)
}

fn parse_signed_decimal(text: &str, s: &str) -> Result<Rational, ParseRationalError> {
    let (negative, body) = match s.as_bytes().first() {
        Some(b'-') => (true, &s[1..]),
        Some(b'+') => (false, &s[1..]),
        _ => (false, s),
    };
    let value = match body.split_once('.') {
        None => Rational::from_integer(parse_int(text, body)?),
        Some((whole, frac)) => {
            if whole.is_empty() && frac.is_empty() {
                return Err(parse_err(text, "expected decimal digits"));
            }
            let whole = if whole.is_empty() {
                BigInt::zero()
            } else {
                parse_int(text, whole)?
            };
            let frac_value = if frac.is_empty() {
                BigInt::zero()
            } else {
                parse_int(text, frac)?
            };
            let scale: BigInt = BigInt::from(10u32).pow(frac.len() as u32);
            Rational::new(whole * &scale + frac_value, scale)
        }
    };
    Ok(if negative { -value } else { value })
}

/// Canonical text form: `n` for integers, `a/b` otherwise.
pub fn format_rational(value: &Rational) -> String {
    if value.denom().is_one() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

pub fn int(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

pub fn ratio(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub(crate) fn is_negative(value: &Rational) -> bool {
    value.is_negative()
}

/// Serde adapter storing a [`Rational`] as its canonical string.
pub mod serde_text {
    use super::{format_rational, parse_rational, Rational};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &Rational, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&format_rational(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Rational, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_rational(&text).map_err(serde::de::Error::custom)
    }
}
