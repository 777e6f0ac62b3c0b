//! Binary floating point with an unbounded exponent.
//!
//! A value is `(-1)^sign * mantissa * 2^exponent` where the mantissa is an
//! odd integer (or zero) and the exponent is an arbitrary-size integer.
//! Rounded operations take a precision `P` and round to nearest, ties to
//! even, so every result carries at most `P` significant bits. The
//! exponent never saturates: `(1/4)^(2^343)` is just mantissa 1 with
//! exponent `-2^344`.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::numfmt::format_scientific;

/// Widest alignment shift (in bits) an exact operation will materialize.
const MAX_EXACT_SHIFT: u64 = 1 << 24;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ExtFloat {
    negative: bool,
    mantissa: BigUint,
    exponent: BigInt,
}

impl ExtFloat {
    pub fn zero() -> Self {
        ExtFloat {
            negative: false,
            mantissa: BigUint::zero(),
            exponent: BigInt::zero(),
        }
    }

    pub fn one() -> Self {
        ExtFloat::from_i64(1)
    }

    pub fn from_i64(v: i64) -> Self {
        ExtFloat::from_parts(v < 0, BigUint::from(v.unsigned_abs()), BigInt::zero())
    }

    /// `2^e`.
    pub fn pow2(e: impl Into<BigInt>) -> Self {
        ExtFloat::from_parts(false, BigUint::one(), e.into())
    }

    /// Canonicalizes: strips trailing zero bits into the exponent.
    pub fn from_parts(negative: bool, mantissa: BigUint, exponent: BigInt) -> Self {
        match mantissa.trailing_zeros() {
            None => ExtFloat::zero(),
            Some(tz) => ExtFloat {
                negative,
                mantissa: mantissa >> tz,
                exponent: exponent + tz,
            },
        }
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.negative
    }

    /// Odd integer mantissa (zero for zero).
    pub fn mantissa(&self) -> &BigUint {
        &self.mantissa
    }

    pub fn exponent(&self) -> &BigInt {
        &self.exponent
    }

    /// Number of significant bits.
    pub fn precision(&self) -> u64 {
        self.mantissa.bits()
    }

    /// Position just above the leading bit: `2^(top-1) <= |x| < 2^top`.
    fn top(&self) -> BigInt {
        &self.exponent + BigInt::from(self.mantissa.bits())
    }

    pub fn neg(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        ExtFloat {
            negative: !self.negative,
            ..self.clone()
        }
    }

    pub fn abs(&self) -> Self {
        ExtFloat {
            negative: false,
            ..self.clone()
        }
    }

    /// Rounds to `prec` significant bits, nearest-even.
    pub fn round(&self, prec: u64) -> Self {
        round_magnitude(self.negative, self.mantissa.clone(), self.exponent.clone(), false, prec)
    }

    /// Nearest `prec`-bit value to a rational.
    pub fn from_rational(r: &BigRational, prec: u64) -> Self {
        if r.is_zero() {
            return ExtFloat::zero();
        }
        let negative = r.is_negative();
        let num = r.numer().magnitude().clone();
        let den = r.denom().magnitude().clone();
        // scale so the integer quotient has at least prec + 2 bits
        let k = prec as i64 + 3 + den.bits() as i64 - num.bits() as i64;
        let (scaled_num, scaled_den) = if k >= 0 {
            (num << k as u64, den)
        } else {
            (num, den << (-k) as u64)
        };
        let (q, rem) = scaled_num.div_rem(&scaled_den);
        round_magnitude(negative, q, BigInt::from(-k), !rem.is_zero(), prec)
    }

    /// Exact conversion; `None` unless the denominator is a power of two.
    pub fn from_rational_exact(r: &BigRational) -> Option<Self> {
        let den = r.denom().magnitude();
        let tz = den.trailing_zeros().unwrap_or(0);
        if den.bits() != tz + 1 {
            return None;
        }
        Some(ExtFloat::from_parts(
            r.is_negative(),
            r.numer().magnitude().clone(),
            BigInt::from(-(tz as i64)),
        ))
    }

    /// Exact rational value; `None` when the exponent is too large to
    /// materialize as a bit shift.
    pub fn to_rational(&self) -> Option<BigRational> {
        if self.is_zero() {
            return Some(BigRational::zero());
        }
        let e = self.exponent.to_i64()?;
        if e.unsigned_abs() > MAX_EXACT_SHIFT {
            return None;
        }
        let sign = if self.negative { Sign::Minus } else { Sign::Plus };
        let m = BigInt::from_biguint(sign, self.mantissa.clone());
        Some(if e >= 0 {
            BigRational::from_integer(m << e as u64)
        } else {
            BigRational::new(m, BigInt::one() << e.unsigned_abs())
        })
    }

    /// Nearest double, saturating to 0 or infinity outside the f64 range.
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let shift = self.mantissa.bits().saturating_sub(60);
        let head = (&self.mantissa >> shift).to_f64().unwrap_or(f64::INFINITY);
        let e = &self.exponent + BigInt::from(shift);
        let v = match e.to_i32() {
            Some(e) if e > -1200 && e < 1200 => head * 2f64.powi(e),
            _ if e.is_negative() => 0.0,
            _ => f64::INFINITY,
        };
        if self.negative {
            -v
        } else {
            v
        }
    }

    pub fn add(&self, other: &Self, prec: u64) -> Self {
        add_impl(self, other, Some(prec)).expect("rounded addition never needs an unbounded shift")
    }

    pub fn sub(&self, other: &Self, prec: u64) -> Self {
        self.add(&other.neg(), prec)
    }

    /// Exact sum; `None` if the operands are so far apart that the result
    /// would need more than 2^24 bits.
    pub fn checked_add_exact(&self, other: &Self) -> Option<Self> {
        add_impl(self, other, None)
    }

    pub fn checked_sub_exact(&self, other: &Self) -> Option<Self> {
        add_impl(self, &other.neg(), None)
    }

    pub fn mul(&self, other: &Self, prec: u64) -> Self {
        self.mul_exact(other).round(prec)
    }

    pub fn mul_exact(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return ExtFloat::zero();
        }
        ExtFloat {
            negative: self.negative != other.negative,
            mantissa: &self.mantissa * &other.mantissa,
            exponent: &self.exponent + &other.exponent,
        }
    }

    fn cmp_magnitude(&self, other: &Self) -> Ordering {
        match (self.is_zero(), other.is_zero()) {
            (true, true) => return Ordering::Equal,
            (true, false) => return Ordering::Less,
            (false, true) => return Ordering::Greater,
            _ => {}
        }
        match self.top().cmp(&other.top()) {
            Ordering::Equal => {}
            ord => return ord,
        }
        // Same leading position: the exponent gap is bounded by the bit lengths.
        match self.exponent.cmp(&other.exponent) {
            Ordering::Equal => self.mantissa.cmp(&other.mantissa),
            Ordering::Greater => {
                let shift = (&self.exponent - &other.exponent)
                    .to_u64()
                    .expect("bounded by bit length");
                (&self.mantissa << shift).cmp(&other.mantissa)
            }
            Ordering::Less => {
                let shift = (&other.exponent - &self.exponent)
                    .to_u64()
                    .expect("bounded by bit length");
                self.mantissa.cmp(&(&other.mantissa << shift))
            }
        }
    }
}

fn round_magnitude(negative: bool, mantissa: BigUint, exponent: BigInt, sticky: bool, prec: u64) -> ExtFloat {
    assert!(prec >= 2, "precision must be at least 2 bits");
    let bits = mantissa.bits();
    if bits <= prec {
        debug_assert!(!sticky, "sticky rounding needs prec + 2 mantissa bits");
        return ExtFloat::from_parts(negative, mantissa, exponent);
    }
    let shift = bits - prec;
    let mut kept: BigUint = &mantissa >> shift;
    let low = &mantissa - (&kept << shift);
    let half = BigUint::one() << (shift - 1);
    let round_up = match low.cmp(&half) {
        Ordering::Greater => true,
        Ordering::Equal => sticky || kept.is_odd(),
        Ordering::Less => false,
    };
    if round_up {
        kept += 1u32;
    }
    ExtFloat::from_parts(negative, kept, exponent + shift)
}

fn add_impl(a: &ExtFloat, b: &ExtFloat, prec: Option<u64>) -> Option<ExtFloat> {
    if a.is_zero() {
        return Some(match prec {
            Some(p) => b.round(p),
            None => b.clone(),
        });
    }
    if b.is_zero() {
        return Some(match prec {
            Some(p) => a.round(p),
            None => a.clone(),
        });
    }
    let (big, small) = if a.top() >= b.top() { (a, b) } else { (b, a) };
    let mut small = small.clone();
    if let Some(p) = prec {
        // Anything entirely below both the big operand's last bit and its
        // rounding position only acts as a sticky bit; replace it with a
        // single bit just under that threshold so the shift stays bounded.
        let threshold = std::cmp::min(big.exponent.clone(), big.top() - BigInt::from(p + 2));
        if small.top() < threshold {
            small = ExtFloat::from_parts(small.negative, BigUint::one(), threshold - 1);
        }
    }
    let low = std::cmp::min(&big.exponent, &small.exponent).clone();
    let shift_big = (&big.exponent - &low).to_u64().filter(|&s| s <= MAX_EXACT_SHIFT)?;
    let shift_small = (&small.exponent - &low).to_u64().filter(|&s| s <= MAX_EXACT_SHIFT)?;
    let mb = &big.mantissa << shift_big;
    let ms = &small.mantissa << shift_small;
    let (negative, mantissa) = if big.negative == small.negative {
        (big.negative, mb + ms)
    } else {
        match mb.cmp(&ms) {
            Ordering::Greater => (big.negative, mb - ms),
            Ordering::Less => (small.negative, ms - mb),
            Ordering::Equal => return Some(ExtFloat::zero()),
        }
    };
    Some(match prec {
        Some(p) => round_magnitude(negative, mantissa, low, false, p),
        None => ExtFloat::from_parts(negative, mantissa, low),
    })
}

impl Ord for ExtFloat {
    fn cmp(&self, other: &Self) -> Ordering {
        let sign = |x: &ExtFloat| {
            if x.is_zero() {
                0
            } else if x.negative {
                -1
            } else {
                1
            }
        };
        match sign(self).cmp(&sign(other)) {
            Ordering::Equal => {}
            ord => return ord,
        }
        let mag = self.cmp_magnitude(other);
        if self.negative {
            mag.reverse()
        } else {
            mag
        }
    }
}

impl PartialOrd for ExtFloat {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for ExtFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}*2^{}",
            if self.negative { "-" } else { "" },
            self.mantissa,
            self.exponent
        )
    }
}

/// Scientific decimal when the exponent is moderate, `m*2^e` otherwise.
impl fmt::Display for ExtFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = f.precision().unwrap_or(17);
        let moderate = self.exponent.to_i64().is_some_and(|e| e.abs() < 1 << 16);
        match self.to_rational().filter(|_| moderate) {
            Some(r) => f.write_str(&format_scientific(&r, digits)),
            None => write!(f, "{self:?}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    /// Oracle: nearest-even rounding of a rational to `prec` bits, found by
    /// bracketing with floor and ceil at the right binade.
    fn oracle_round(r: &BigRational, prec: u64) -> BigRational {
        if r.is_zero() {
            return r.clone();
        }
        let mag = r.abs();
        // find e with 2^(e-1) <= mag < 2^e
        let mut e: i64 = mag.numer().bits() as i64 - mag.denom().bits() as i64;
        let two = q(2, 1);
        let pow = |k: i64| {
            if k >= 0 {
                two.pow(k as i32)
            } else {
                q(1, 1) / two.pow((-k) as i32)
            }
        };
        while pow(e - 1) > mag {
            e -= 1;
        }
        while pow(e) <= mag {
            e += 1;
        }
        let ulp = pow(e - prec as i64);
        let scaled = &mag / &ulp;
        let fl = scaled.floor();
        let frac = &scaled - &fl;
        let half = q(1, 2);
        let n = if frac > half || (frac == half && fl.to_integer().is_odd()) {
            fl + q(1, 1)
        } else {
            fl
        };
        let out = n * ulp;
        if r.is_negative() {
            -out
        } else {
            out
        }
    }

    #[test]
    fn canonical_form() {
        let x = ExtFloat::from_i64(12);
        assert_eq!(x.mantissa(), &BigUint::from(3u32));
        assert_eq!(x.exponent(), &BigInt::from(2));
        assert_eq!(ExtFloat::from_i64(0), ExtFloat::zero());
        assert_eq!(ExtFloat::from_rational(&q(3, 8), 53).to_rational(), Some(q(3, 8)));
    }

    #[test]
    fn rounding_ties_to_even() {
        // 9 = 1001b at 3 bits: tie between 8 and 10 -> 8 (even mantissa 100b)
        assert_eq!(ExtFloat::from_i64(9).round(3), ExtFloat::from_i64(8));
        // 11 = 1011b: tie between 10 and 12 -> 12 (mantissa 110b)
        assert_eq!(ExtFloat::from_i64(11).round(3), ExtFloat::from_i64(12));
        assert_eq!(ExtFloat::from_i64(-11).round(3), ExtFloat::from_i64(-12));
        // 1/3 at 4 bits: 0.0101010... -> 0.01011 = 11/32
        assert_eq!(ExtFloat::from_rational(&q(1, 3), 4).to_rational(), Some(q(11, 32)));
    }

    #[test]
    fn repeated_squaring_keeps_exponent() {
        let mut x = ExtFloat::from_rational(&q(1, 4), 64);
        for _ in 0..343 {
            x = x.mul(&x, 64);
        }
        assert!(!x.is_negative());
        assert_eq!(x.mantissa(), &BigUint::one());
        assert_eq!(x.exponent(), &-(BigInt::one() << 344u32));
        assert!(x.to_rational().is_none());
        assert!(x > ExtFloat::zero());
        assert_eq!(x.to_f64(), 0.0);
    }

    #[test]
    fn tiny_addend_acts_as_sticky_bit() {
        let tiny = ExtFloat::pow2(-(BigInt::one() << 200u32));
        let one = ExtFloat::one();
        assert_eq!(one.add(&tiny, 64), one);
        assert_eq!(tiny.add(&one, 64), one);
        assert_eq!(one.sub(&tiny, 64), one);
        // 1 + 2^-4 at 4 bits is a tie (1.0001b); the tiny addend breaks it upward
        let tie = ExtFloat::one().add(&ExtFloat::pow2(-4), 8);
        assert_eq!(tie.add(&tiny, 4).to_rational(), Some(q(9, 8)));
        assert_eq!(tie.sub(&tiny, 4), ExtFloat::one());
        assert_eq!(tie.round(4), ExtFloat::one());
        assert!(one.checked_add_exact(&tiny).is_none());
    }

    #[test]
    fn ordering() {
        let vals: Vec<ExtFloat> = [q(-3, 1), q(-1, 4), q(0, 1), q(1, 1024), q(3, 4), q(1, 1), q(5, 1)]
            .iter()
            .map(|r| ExtFloat::from_rational(r, 32))
            .collect();
        for w in vals.windows(2) {
            assert!(w[0] < w[1], "{:?} < {:?}", w[0], w[1]);
        }
        let a = ExtFloat::from_rational(&q(7, 4), 32);
        let b = ExtFloat::from_rational(&q(3, 2), 32);
        assert_eq!(a.clone().max(b.clone()), a);
        assert_eq!(a.clone().min(b.clone()), b);
    }

    #[test]
    fn display() {
        assert_eq!(ExtFloat::from_rational(&q(1, 8), 53).to_string(), "1.25e-1");
        assert_eq!(
            ExtFloat::pow2(-(BigInt::one() << 40u32)).to_string(),
            "1*2^-1099511627776"
        );
    }

    fn small_rational() -> impl Strategy<Value = BigRational> {
        (-1_000_000i64..1_000_000, 1i64..100_000).prop_map(|(n, d)| q(n, d))
    }

    proptest! {
        #[test]
        fn from_rational_matches_oracle(r in small_rational(), prec in 2u64..80) {
            let x = ExtFloat::from_rational(&r, prec);
            prop_assert!(x.precision() <= prec);
            prop_assert_eq!(x.to_rational().unwrap(), oracle_round(&r, prec));
        }

        #[test]
        fn rounded_ops_match_oracle(a in small_rational(), b in small_rational(), prec in 2u64..60) {
            let xa = ExtFloat::from_rational(&a, 64);
            let xb = ExtFloat::from_rational(&b, 64);
            let (ea, eb) = (xa.to_rational().unwrap(), xb.to_rational().unwrap());
            prop_assert_eq!(xa.add(&xb, prec).to_rational().unwrap(), oracle_round(&(&ea + &eb), prec));
            prop_assert_eq!(xa.sub(&xb, prec).to_rational().unwrap(), oracle_round(&(&ea - &eb), prec));
            prop_assert_eq!(xa.mul(&xb, prec).to_rational().unwrap(), oracle_round(&(&ea * &eb), prec));
            prop_assert_eq!(xa.cmp(&xb), ea.cmp(&eb));
        }

        #[test]
        fn far_apart_addition_matches_oracle(
            a in small_rational(), b in small_rational(), gap in 0i64..400, prec in 2u64..40
        ) {
            // b scaled far below a: exercises the sticky stand-in path
            let xa = ExtFloat::from_rational(&a, 24);
            let xb = ExtFloat::from_rational(&b, 24).mul_exact(&ExtFloat::pow2(-gap));
            let exact = xa.to_rational().unwrap() + xb.to_rational().unwrap();
            prop_assert_eq!(xa.add(&xb, prec).to_rational().unwrap(), oracle_round(&exact, prec));
            prop_assert_eq!(xa.checked_add_exact(&xb).unwrap().to_rational().unwrap(), exact);
        }
    }
}
