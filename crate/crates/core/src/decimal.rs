//! Decimal-string to exact rational conversion.
//!
//! Model files carry probabilities as strings so that `"0.6"` means exactly
//! `3/5` rather than the nearest binary double. Both plain decimals
//! (`"0.125"`, `"1e-3"`, `"-2.5E2"`) and fractions (`"1/3"`) are accepted.

use num::{BigInt, BigRational, One, Zero};

use crate::error::{Error, Result};

pub fn parse_rational(text: &str) -> Result<BigRational> {
    let s = text.trim();
    let bad = || Error::input(format!("not a decimal number: {text:?}"));
    if s.is_empty() {
        return Err(bad());
    }
    if let Some((num, den)) = s.split_once('/') {
        let num: BigInt = num.trim().parse().map_err(|_| bad())?;
        let den: BigInt = den.trim().parse().map_err(|_| bad())?;
        if den.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(num, den));
    }

    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => {
            let exp: i64 = s[pos + 1..].parse().map_err(|_| bad())?;
            (&s[..pos], exp)
        }
        None => (s, 0),
    };
    let (negative, mantissa) = match mantissa.as_bytes().first() {
        Some(b'-') => (true, &mantissa[1..]),
        Some(b'+') => (false, &mantissa[1..]),
        _ => (false, mantissa),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let mut value = BigRational::from_integer(digits.parse::<BigInt>().map_err(|_| bad())?);
    let scale = exponent - frac_part.len() as i64;
    let ten = BigRational::from_integer(BigInt::from(10));
    if scale >= 0 {
        value *= num::pow(ten, scale as usize);
    } else {
        value /= num::pow(ten, (-scale) as usize);
    }
    if negative {
        value = -value;
    }
    Ok(value)
}

/// Reads `x` through its shortest round-trip decimal form, so `0.8_f64`
/// becomes exactly `4/5`.
pub fn rational_from_f64_decimal(x: f64) -> BigRational {
    if x == 0.0 {
        return BigRational::zero();
    }
    if !x.is_finite() {
        // only reached for infinite temperatures etc.; callers validate first
        return BigRational::one();
    }
    parse_rational(&format!("{x:e}")).expect("f64 formats as a valid decimal")
}
