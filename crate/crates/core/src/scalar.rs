//! Scalar abstraction for throughput and TPP arithmetic.
//!
//! Knowledge-base figures are stored as exact decimals ([`Exact`]); the
//! TPP computation is generic so it can also run over `f32`/`f64` when
//! exactness is not needed.

use std::fmt;

use num_rational::Ratio;
use num_traits::{FromPrimitive, Num, ToPrimitive, Zero};
use thiserror::Error;

/// Exact rational used for every number that ends up in a report.
pub type Exact = Ratio<i128>;

/// Largest number of fractional digits accepted when parsing a decimal.
const MAX_FRACTION_DIGITS: u32 = 18;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecimalError {
    #[error("empty decimal literal")]
    Empty,
    #[error("invalid decimal literal `{0}`")]
    Invalid(String),
    #[error("decimal literal `{0}` is out of range")]
    OutOfRange(String),
}

/// Numeric type the TPP classifier can run over.
pub trait Scalar: Num + PartialOrd + Clone + fmt::Debug + FromPrimitive {
    /// Converts an exact knowledge-base figure into this scalar.
    fn from_exact(value: &Exact) -> Self;

    /// Renders the value for reports.
    fn render(&self) -> String;

    /// Reads back what [`Scalar::render`] produced.
    fn parse_text(text: &str) -> Option<Self>;
}

impl Scalar for Exact {
    fn from_exact(value: &Exact) -> Self {
        *value
    }

    fn render(&self) -> String {
        format_decimal(self)
    }

    fn parse_text(text: &str) -> Option<Self> {
        parse_decimal(text).ok()
    }
}

impl Scalar for f64 {
    fn from_exact(value: &Exact) -> Self {
        // Going through the decimal text picks the nearest double.
        format_decimal(value).parse().unwrap_or(f64::NAN)
    }

    fn render(&self) -> String {
        self.to_string()
    }

    fn parse_text(text: &str) -> Option<Self> {
        text.trim().parse().ok()
    }
}

impl Scalar for f32 {
    fn from_exact(value: &Exact) -> Self {
        format_decimal(value).parse().unwrap_or(f32::NAN)
    }

    fn render(&self) -> String {
        self.to_string()
    }

    fn parse_text(text: &str) -> Option<Self> {
        text.trim().parse().ok()
    }
}

/// Parses a plain decimal literal (`-12`, `330.3`, `+0.5`) into an exact rational.
pub fn parse_decimal(text: &str) -> Result<Exact, DecimalError> {
    let s = text.trim();
    if s.is_empty() {
        return Err(DecimalError::Empty);
    }
    let (negative, digits) = match s.as_bytes()[0] {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    let all_digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
    if (int_part.is_empty() && frac_part.is_empty()) || !all_digits(int_part) || !all_digits(frac_part)
    {
        return Err(DecimalError::Invalid(text.to_string()));
    }
    let frac_part = frac_part.trim_end_matches('0');
    if frac_part.len() as u32 > MAX_FRACTION_DIGITS {
        return Err(DecimalError::OutOfRange(text.to_string()));
    }
    let scale = 10i128.pow(frac_part.len() as u32);
    let mut combined = String::with_capacity(int_part.len() + frac_part.len());
    combined.push_str(int_part);
    combined.push_str(frac_part);
    let magnitude: i128 = if combined.is_empty() {
        0
    } else {
        combined
            .parse()
            .map_err(|_| DecimalError::OutOfRange(text.to_string()))?
    };
    let numer = if negative { -magnitude } else { magnitude };
    Ok(Ratio::new(numer, scale))
}

/// Formats an exact rational as a decimal string with no trailing zeros.
///
/// Values whose denominator has prime factors other than 2 and 5 have no
/// finite expansion; those are rounded to 12 fractional digits.
pub fn format_decimal(value: &Exact) -> String {
    let denom = *value.denom();
    let mut places = 0u32;
    let mut pow = 1i128;
    while places <= 30 {
        if pow % denom == 0 {
            let scaled = value.numer() * (pow / denom);
            return render_scaled(scaled, places);
        }
        match pow.checked_mul(10) {
            Some(p) => pow = p,
            None => break,
        }
        places += 1;
    }
    let scale = 10i128.pow(12);
    let scaled = (value * Ratio::from_integer(scale)).round().to_integer();
    render_scaled(scaled, 12)
}

fn render_scaled(scaled: i128, places: u32) -> String {
    let negative = scaled < 0;
    let digits = scaled.unsigned_abs().to_string();
    let places = places as usize;
    let (int_part, frac_part) = if digits.len() > places {
        let (i, f) = digits.split_at(digits.len() - places);
        (i.to_string(), f.to_string())
    } else {
        ("0".to_string(), format!("{digits:0>places$}"))
    };
    let frac_part = frac_part.trim_end_matches('0');
    let mut out = String::new();
    if negative && !(int_part == "0" && frac_part.is_empty()) {
        out.push('-');
    }
    out.push_str(&int_part);
    if !frac_part.is_empty() {
        out.push('.');
        out.push_str(frac_part);
    }
    out
}

/// Nearest `f64` to an exact value.
pub fn exact_to_f64(value: &Exact) -> f64 {
    f64::from_exact(value)
}

pub fn is_positive(value: &Exact) -> bool {
    !value.is_zero() && value.numer().signum() == value.denom().signum()
}

#[derive(serde::Deserialize)]
#[serde(untagged)]
enum DecimalRepr {
    Int(i64),
    Float(f64),
    Text(String),
}

fn decode<'de, D: serde::Deserializer<'de>>(deserializer: D) -> Result<Exact, D::Error> {
    use serde::de::Error;
    let repr = <DecimalRepr as serde::Deserialize>::deserialize(deserializer)?;
    match repr {
        DecimalRepr::Int(i) => Ok(Ratio::from_integer(i as i128)),
        // Shortest round-trip formatting recovers the literal the author wrote.
        DecimalRepr::Float(f) if f.is_finite() => parse_decimal(&f.to_string()).map_err(D::Error::custom),
        DecimalRepr::Float(f) => Err(D::Error::custom(format!("non-finite decimal {f}"))),
        DecimalRepr::Text(s) => parse_decimal(&s).map_err(D::Error::custom),
    }
}

/// Serde adapter that writes exact decimals as strings (`"5284.8"`).
pub mod as_string {
    use super::*;

    pub fn serialize<S: serde::Serializer>(value: &Exact, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&format_decimal(value))
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(deserializer: D) -> Result<Exact, D::Error> {
        decode(deserializer)
    }
}

/// Serde adapter that writes exact decimals as numbers when that is lossless,
/// falling back to a string otherwise.
pub mod as_number {
    use super::*;

    pub fn serialize<S: serde::Serializer>(value: &Exact, serializer: S) -> Result<S::Ok, S::Error> {
        if value.is_integer() {
            if let Some(i) = value.to_integer().to_i64() {
                return serializer.serialize_i64(i);
            }
        }
        let text = format_decimal(value);
        let approx = exact_to_f64(value);
        if approx.is_finite() && approx.to_string() == text {
            serializer.serialize_f64(approx)
        } else {
            serializer.serialize_str(&text)
        }
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(deserializer: D) -> Result<Exact, D::Error> {
        decode(deserializer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_plain_decimals() {
        assert_eq!(parse_decimal("330.3").unwrap(), Ratio::new(3303, 10));
        assert_eq!(parse_decimal("4992").unwrap(), Ratio::from_integer(4992));
        assert_eq!(parse_decimal("-1").unwrap(), Ratio::from_integer(-1));
        assert_eq!(parse_decimal(".5").unwrap(), Ratio::new(1, 2));
        assert_eq!(parse_decimal("2.50").unwrap(), Ratio::new(5, 2));
    }

    #[test]
    fn rejects_garbage() {
        assert_eq!(parse_decimal(""), Err(DecimalError::Empty));
        assert!(parse_decimal("1e3").is_err());
        assert!(parse_decimal("1.2.3").is_err());
        assert!(parse_decimal(".").is_err());
        assert!(parse_decimal("abc").is_err());
    }

    #[test]
    fn formats_without_trailing_zeros() {
        assert_eq!(format_decimal(&Ratio::new(26424, 5)), "5284.8");
        assert_eq!(format_decimal(&Ratio::from_integer(4992)), "4992");
        assert_eq!(format_decimal(&Ratio::new(-1, 4)), "-0.25");
        assert_eq!(format_decimal(&Ratio::new(1, 3)), "0.333333333333");
    }

    #[test]
    fn float_scalar_goes_through_decimal_text() {
        let v = parse_decimal("165.15").unwrap();
        assert_eq!(f64::from_exact(&v), 165.15);
    }

    proptest! {
        #[test]
        fn decimal_text_round_trips(int in 0u64..10_000_000, frac in 0u32..1000) {
            let text = format!("{int}.{frac:03}");
            let parsed = parse_decimal(&text).unwrap();
            prop_assert_eq!(parse_decimal(&format_decimal(&parsed)).unwrap(), parsed);
        }
    }
}
