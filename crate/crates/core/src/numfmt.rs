//! Text conversions for exact rationals.
//!
//! Every file format in the crate shares one rational grammar:
//! integers (`-3`), fractions (`7/8`), dyadic fractions (`7/2^3`) and
//! decimals with an optional exponent (`0.125`, `1e-3`). Parsing is exact.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Parses a rational token. Returns `None` for anything outside the grammar
/// or for a zero denominator.
pub fn parse_rational(token: &str) -> Option<BigRational> {
    let token = token.trim();
    if token.is_empty() {
        return None;
    }
    if let Some((num, den)) = token.split_once('/') {
        let num = parse_integer(num)?;
        let den = match den.split_once('^') {
            Some((base, exp)) => {
                let base = parse_unsigned(base)?;
                let exp: u32 = exp.parse().ok()?;
                BigInt::from(base).pow(exp)
            }
            None => BigInt::from(parse_unsigned(den)?),
        };
        if den.is_zero() {
            return None;
        }
        return Some(BigRational::new(num, den));
    }
    parse_decimal(token)
}

fn parse_unsigned(s: &str) -> Option<BigUint> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    BigUint::parse_bytes(s.as_bytes(), 10)
}

fn parse_integer(s: &str) -> Option<BigInt> {
    let (negative, digits) = split_sign(s);
    let magnitude = parse_unsigned(digits)?;
    let value = BigInt::from(magnitude);
    Some(if negative { -value } else { value })
}

fn split_sign(s: &str) -> (bool, &str) {
    if let Some(rest) = s.strip_prefix('-') {
        (true, rest)
    } else if let Some(rest) = s.strip_prefix('+') {
        (false, rest)
    } else {
        (false, s)
    }
}

fn parse_decimal(s: &str) -> Option<BigRational> {
    let (negative, body) = split_sign(s);
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(pos) => {
            let exp: i64 = body[pos + 1..].parse().ok()?;
            (&body[..pos], exp)
        }
        None => (body, 0),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let magnitude = parse_unsigned(&digits)?;
    let scale = exponent - frac_part.len() as i64;
    let ten = BigInt::from(10u32);
    let mut value = BigRational::from_integer(BigInt::from(magnitude));
    let power = ten.pow(u32::try_from(scale.unsigned_abs()).ok()?);
    if scale >= 0 {
        value *= BigRational::from_integer(power);
    } else {
        value /= BigRational::from_integer(power);
    }
    Some(if negative { -value } else { value })
}

/// `p/q`, or `p` when the denominator is one.
pub fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// `p/q` always, even for integers (`3/1`).
pub fn format_fraction(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Dyadic rationals print as `p/2^e`; integers as `p`; anything else
/// falls back to `p/q`.
pub fn format_dyadic(r: &BigRational) -> String {
    let den = r.denom();
    if den.is_one() {
        return r.numer().to_string();
    }
    match power_of_two_exponent(den) {
        Some(e) => format!("{}/2^{}", r.numer(), e),
        None => format_rational(r),
    }
}

/// `Some(e)` when `n == 2^e`.
pub fn power_of_two_exponent(n: &BigInt) -> Option<u64> {
    if n.sign() != Sign::Plus {
        return None;
    }
    let tz = n.trailing_zeros()?;
    if n.bits() == tz + 1 {
        Some(tz)
    } else {
        None
    }
}

/// Smallest `L` with `2^L >= n`, for `n >= 1`.
pub fn ceil_log2(n: &BigUint) -> u64 {
    assert!(!n.is_zero(), "ceil_log2 of zero");
    let bits = n.bits();
    if n.count_ones() == 1 {
        bits - 1
    } else {
        bits
    }
}

/// Scientific decimal with `digits` significant digits, rounded half-up
/// on the exact value: `0`, `1.5e-3`, `-2.25e1`.
pub fn format_scientific(r: &BigRational, digits: usize) -> String {
    if r.is_zero() {
        return "0".to_string();
    }
    let digits = digits.max(1);
    let negative = r.is_negative();
    let mag = r.abs();
    // Estimate the decimal exponent from bit lengths, then correct.
    let approx = (mag.numer().bits() as f64 - mag.denom().bits() as f64) * std::f64::consts::LOG10_2;
    let mut exp10 = approx.floor() as i64;
    let ten = BigRational::from_integer(BigInt::from(10));
    loop {
        let scaled = scale_pow10(&mag, -exp10);
        if scaled >= ten {
            exp10 += 1;
        } else if scaled < BigRational::one() {
            exp10 -= 1;
        } else {
            break;
        }
    }
    // mag = d.ddd * 10^exp10 with 1 <= d.ddd < 10
    let scaled = scale_pow10(&mag, digits as i64 - 1 - exp10);
    let (q, rem) = scaled.numer().div_rem(scaled.denom());
    let mut q = q;
    if BigRational::new(rem * 2, scaled.denom().clone()) >= BigRational::one() {
        q += 1;
    }
    let mut text = q.to_string();
    if text.len() > digits {
        // rounding carried into a new digit
        exp10 += 1;
        text.truncate(digits);
    }
    let trimmed = {
        let (head, tail) = text.split_at(1);
        let tail = tail.trim_end_matches('0');
        if tail.is_empty() {
            head.to_string()
        } else {
            format!("{head}.{tail}")
        }
    };
    let sign = if negative { "-" } else { "" };
    if exp10 == 0 {
        format!("{sign}{trimmed}")
    } else {
        format!("{sign}{trimmed}e{exp10}")
    }
}

/// Fixed-point decimal with `places` digits after the point, rounded half
/// away from zero.
pub fn format_fixed(r: &BigRational, places: usize) -> String {
    let negative = r.is_negative();
    let scaled = scale_pow10(&r.abs(), places as i64);
    let (mut q, rem) = scaled.numer().div_rem(scaled.denom());
    if BigRational::new(rem * 2, scaled.denom().clone()) >= BigRational::one() {
        q += 1;
    }
    let mut text = q.to_string();
    if places > 0 {
        if text.len() <= places {
            text = format!("{}{}", "0".repeat(places + 1 - text.len()), text);
        }
        text.insert(text.len() - places, '.');
    }
    if negative && q_is_nonzero(&text) {
        format!("-{text}")
    } else {
        text
    }
}

fn q_is_nonzero(text: &str) -> bool {
    text.bytes().any(|b| (b'1'..=b'9').contains(&b))
}

fn scale_pow10(r: &BigRational, power: i64) -> BigRational {
    let p = BigInt::from(10).pow(power.unsigned_abs() as u32);
    if power >= 0 {
        r * BigRational::from_integer(p)
    } else {
        r / BigRational::from_integer(p)
    }
}

/// Lossy conversion for diagnostics only.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}
