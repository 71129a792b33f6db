//! Exact rational parameters.
//!
//! Exponents enter the limit-weight branch selection through equality tests
//! (`δ = μ`, `γ = θ`), so they are carried as exact rationals and only
//! converted to `f64` for evaluation.

use std::fmt;

use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive, Zero};
use thiserror::Error;

pub type Rational = Ratio<i64>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("cannot parse `{input}` as an exact rational: {reason}")]
pub struct ParseRationalError {
    pub input: String,
    pub reason: &'static str,
}

/// Parses `"3/10"`, `"-2"`, `"0.3"` or `"1.25"` into an exact rational.
pub fn parse_rational(input: &str) -> Result<Rational, ParseRationalError> {
    let s = input.trim();
    let err = |reason| ParseRationalError {
        input: input.to_string(),
        reason,
    };
    if s.is_empty() {
        return Err(err("empty string"));
    }
    if let Some((num, den)) = s.split_once('/') {
        let num: i64 = num.trim().parse().map_err(|_| err("bad numerator"))?;
        let den: i64 = den.trim().parse().map_err(|_| err("bad denominator"))?;
        if den == 0 {
            return Err(err("zero denominator"));
        }
        return Ok(Ratio::new(num, den));
    }
    let (negative, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err("no digits"));
    }
    if !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return Err(err("expected digits, `a/b` or a decimal"));
    }
    if frac_part.len() > 15 {
        return Err(err("too many decimal places"));
    }
    let den = 10i64.pow(frac_part.len() as u32);
    let digits = format!("{int_part}{frac_part}");
    let num: i64 = if digits.is_empty() {
        0
    } else {
        digits.parse().map_err(|_| err("value out of range"))?
    };
    let value = Ratio::new(num, den);
    Ok(if negative { -value } else { value })
}

/// Converts a float that was written as a short decimal (e.g. `0.3`) into the
/// rational the user meant, via its shortest round-trip representation.
pub fn rational_from_decimal_f64(x: f64) -> Result<Rational, ParseRationalError> {
    if !x.is_finite() {
        return Err(ParseRationalError {
            input: x.to_string(),
            reason: "not finite",
        });
    }
    let text = format!("{x}");
    if text.contains('e') {
        return Err(ParseRationalError {
            input: text,
            reason: "exponent notation not supported",
        });
    }
    parse_rational(&text)
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Displays as `n/d`, or `n` when integral.
pub struct Display<'a>(pub &'a Rational);

impl fmt::Display for Display<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.denom() == &1 {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

pub fn is_positive(r: &Rational) -> bool {
    r.is_positive()
}

pub fn is_zero(r: &Rational) -> bool {
    r.is_zero()
}
