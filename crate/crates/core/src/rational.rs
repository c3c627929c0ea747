//! Exact rational arithmetic helpers.
//!
//! Pure-profile quantities (late probabilities, costs, deviation margins) are
//! computed with [`Rational`] so that inequality certificates are exact. Values
//! cross into `f64` only when they meet mixed strategies or learning weights.

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serializer};

pub type Rational = Ratio<i64>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse `{0}` as a rational number")]
pub struct ParseRationalError(pub String);

/// Parses `"3"`, `"-2"`, `"19/2"`, `"0.125"` or `"1e-3"`-free decimals exactly.
pub fn parse_rational(text: &str) -> Result<Rational, ParseRationalError> {
    let err = || ParseRationalError(text.to_string());
    let s = text.trim();
    if s.is_empty() {
        return Err(err());
    }
    if let Some((num, den)) = s.split_once('/') {
        let n: i64 = num.trim().parse().map_err(|_| err())?;
        let d: i64 = den.trim().parse().map_err(|_| err())?;
        if d == 0 {
            return Err(err());
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        let negative = int_part.starts_with('-');
        let int_digits = int_part.trim_start_matches(['-', '+']);
        if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        if !int_digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let scale = 10i64.checked_pow(frac_part.len() as u32).ok_or_else(err)?;
        let whole: i64 = if int_digits.is_empty() {
            0
        } else {
            int_digits.parse().map_err(|_| err())?
        };
        let frac: i64 = frac_part.parse().map_err(|_| err())?;
        let magnitude = whole
            .checked_mul(scale)
            .and_then(|w| w.checked_add(frac))
            .ok_or_else(err)?;
        let value = Rational::new(magnitude, scale);
        return Ok(if negative { -value } else { value });
    }
    s.parse::<i64>().map(Rational::from_integer).map_err(|_| err())
}

/// Converts a finite `f64` to the rational it prints as (shortest round-trip form).
pub fn rational_from_f64(value: f64) -> Result<Rational, ParseRationalError> {
    if !value.is_finite() {
        return Err(ParseRationalError(value.to_string()));
    }
    let text = format!("{value}");
    if text.contains('e') {
        return Err(ParseRationalError(text));
    }
    parse_rational(&text)
}

pub fn format_rational(value: &Rational) -> String {
    if value.is_integer() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

pub fn to_f64(value: &Rational) -> f64 {
    if value.is_zero() {
        return 0.0;
    }
    value.to_f64().unwrap_or(f64::NAN)
}

pub(crate) fn serialize<S: Serializer>(value: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format_rational(value))
}

pub(crate) fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
    let text = String::deserialize(d)?;
    parse_rational(&text).map_err(serde::de::Error::custom)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_integer_fraction_and_decimal_forms() {
        assert_eq!(parse_rational("321").unwrap(), Rational::from_integer(321));
        assert_eq!(parse_rational("19/2").unwrap(), Rational::new(19, 2));
        assert_eq!(parse_rational("0.5").unwrap(), Rational::new(1, 2));
        assert_eq!(parse_rational("-1.25").unwrap(), Rational::new(-5, 4));
        assert_eq!(parse_rational(".5").unwrap(), Rational::new(1, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("").is_err());
    }

    #[test]
    fn float_conversion_uses_printed_digits() {
        assert_eq!(rational_from_f64(0.1).unwrap(), Rational::new(1, 10));
        assert_eq!(rational_from_f64(321.0).unwrap(), Rational::from_integer(321));
        assert!(rational_from_f64(f64::NAN).is_err());
    }

    #[test]
    fn formatting_round_trips() {
        for v in [Rational::new(7, 3), Rational::from_integer(-4), Rational::new(0, 1)] {
            assert_eq!(parse_rational(&format_rational(&v)).unwrap(), v);
        }
    }
}
