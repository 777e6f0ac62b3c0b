//! Bookkeeping for the quantitative "almost implies near" bound: the size
//! of ε* = min(δ/2, 1/B)^(2^k), k = ⌈c·m³·log₂ n⌉, reported in logarithmic
//! form, together with the degree and coefficient bitsize of the bound
//! formula.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Pow, Zero};

use super::{rational_bitsize, LogicError};
use crate::compiler::{eps_star_base, EpsStarParams};
use crate::game::Game;
use crate::numfmt::{ceil_log2, format_rational, parse_rational, power_of_two_exponent};

/// `log₂(1/ε*)`, never materialized as a positional number unless asked.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Log2Inverse {
    /// `multiplier · 2^shift`, used when the base is a power of two.
    Exact { multiplier: BigUint, shift: u64 },
    /// `2^squarings · log₂(inverse_base)` for any other base.
    Symbolic { squarings: u64, inverse_base: BigRational },
}

impl Log2Inverse {
    pub fn exact_value(&self) -> Option<BigUint> {
        match self {
            Log2Inverse::Exact { multiplier, shift } => Some(multiplier << *shift),
            Log2Inverse::Symbolic { .. } => None,
        }
    }

    /// `log₂` of the bit length estimate, for refusing huge expansions.
    fn approx_bits(&self) -> f64 {
        match self {
            Log2Inverse::Exact { multiplier, shift } => {
                let m = multiplier.bits() as f64;
                2f64.powf(*shift as f64) * m
            }
            Log2Inverse::Symbolic {
                squarings,
                inverse_base,
            } => {
                let r = crate::numfmt::rational_to_f64(inverse_base).log2();
                2f64.powf(*squarings as f64) * r
            }
        }
    }
}

impl fmt::Display for Log2Inverse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Log2Inverse::Exact { multiplier, shift } => {
                if multiplier.is_zero() {
                    return f.write_str("0");
                }
                match power_of_two_exponent(&BigInt::from(multiplier.clone())) {
                    Some(b) => write!(f, "2^{}", *shift + b),
                    None => write!(f, "{multiplier} * 2^{shift}"),
                }
            }
            Log2Inverse::Symbolic {
                squarings,
                inverse_base,
            } => write!(f, "2^{squarings} * log2({})", format_rational(inverse_base)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundReport {
    pub players: usize,
    pub strategies: usize,
    pub bound: BigUint,
    pub delta: BigRational,
    pub c: BigRational,
    pub base: BigRational,
    pub squarings: u64,
    pub log2_inverse: Log2Inverse,
    /// `max(2, n − 1)`.
    pub max_degree: usize,
    /// `max(k, τ)` where `k` is the bitsize of `δ²` and `B ≤ 2^τ`.
    pub coefficient_bitsize: u64,
    /// `ε* = 1`: the base is already 1 and the bound says nothing.
    pub degenerate: bool,
}

impl BoundReport {
    pub fn new(
        players: usize,
        strategies: usize,
        bound: BigUint,
        delta: BigRational,
        c: BigRational,
    ) -> Result<Self, LogicError> {
        let params = EpsStarParams {
            delta: delta.clone(),
            bound: bound.clone(),
            players,
            strategies,
            c: c.clone(),
        };
        params.validate().map_err(|e| LogicError::Parameter(e.to_string()))?;
        let squarings = params.squarings().map_err(|e| LogicError::Parameter(e.to_string()))?;
        let base = eps_star_base(&delta, &bound);
        let inverse_base = base.recip();
        let log2_inverse = if inverse_base.denom().is_one() {
            match power_of_two_exponent(inverse_base.numer()) {
                Some(a) => Log2Inverse::Exact {
                    multiplier: BigUint::from(a),
                    shift: squarings,
                },
                None => Log2Inverse::Symbolic {
                    squarings,
                    inverse_base,
                },
            }
        } else {
            Log2Inverse::Symbolic {
                squarings,
                inverse_base,
            }
        };
        let delta_sq = &delta * &delta;
        let tau = ceil_log2(&bound);
        Ok(BoundReport {
            players,
            strategies,
            coefficient_bitsize: rational_bitsize(&delta_sq).max(tau),
            max_degree: 2.max(players - 1),
            degenerate: base.is_one(),
            bound,
            delta,
            c,
            base,
            squarings,
            log2_inverse,
        })
    }

    /// Parameters of a game: `n`, total `m`, and `B = max(1, ⌈max |u|⌉)`.
    pub fn for_game(g: &Game, delta: BigRational, c: BigRational) -> Result<Self, LogicError> {
        let bound = g.payoff_bound().max(BigUint::one());
        BoundReport::new(g.num_players(), g.total_strategies(), bound, delta, c)
    }

    /// `ε*` as an exact rational, refused when `log₂(1/ε*)` exceeds
    /// `max_bits`.
    pub fn eps_star_exact(&self, max_bits: u64) -> Result<BigRational, LogicError> {
        let approx = self.log2_inverse.approx_bits();
        if !approx.is_finite() || approx > max_bits as f64 {
            return Err(LogicError::TooLarge {
                bits: self.log2_inverse.to_string(),
                limit: max_bits,
            });
        }
        let exponent = BigUint::one() << self.squarings;
        Ok(BigRational::new(
            BigInt::from(self.base.numer().magnitude().clone().pow(exponent.clone())),
            BigInt::from(self.base.denom().magnitude().clone().pow(exponent)),
        ))
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for BoundReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n = {}", self.players)?;
        writeln!(f, "m = {}", self.strategies)?;
        writeln!(f, "B = {}", self.bound)?;
        writeln!(f, "delta = {}", format_rational(&self.delta))?;
        writeln!(f, "c = {}", format_rational(&self.c))?;
        writeln!(f, "base = {}", format_rational(&self.base))?;
        writeln!(f, "squarings = {}", self.squarings)?;
        writeln!(f, "log2_inv_eps_star = {}", self.log2_inverse)?;
        writeln!(f, "max_degree = {}", self.max_degree)?;
        writeln!(f, "coefficient_bitsize = {}", self.coefficient_bitsize)?;
        writeln!(f, "degenerate = {}", self.degenerate)
    }
}

impl FromStr for BoundReport {
    type Err = LogicError;

    /// Rebuilds the report from its parameter lines and checks that every
    /// derived line matches.
    fn from_str(text: &str) -> Result<Self, LogicError> {
        let bad = |m: String| LogicError::Parameter(m);
        let mut fields = HashMap::new();
        for line in text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
        {
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| bad(format!("expected `key = value`, found `{line}`")))?;
            fields.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| fields.get(k).ok_or_else(|| bad(format!("missing `{k}`")));
        let num = |k: &str| -> Result<BigRational, LogicError> {
            let v = get(k)?;
            parse_rational(v).ok_or_else(|| bad(format!("invalid number `{v}` for `{k}`")))
        };
        let n: usize = get("n")?.parse().map_err(|_| bad("invalid n".into()))?;
        let m: usize = get("m")?.parse().map_err(|_| bad("invalid m".into()))?;
        let b: BigUint = get("B")?.parse().map_err(|_| bad("invalid B".into()))?;
        let report = BoundReport::new(n, m, b, num("delta")?, num("c")?)?;
        let expected = report.to_string();
        for line in expected.lines() {
            let (k, v) = line.split_once(" = ").expect("own format");
            if let Some(found) = fields.get(k) {
                if found != v {
                    return Err(bad(format!("`{k}` is {found} but the parameters give {v}")));
                }
            }
        }
        Ok(report)
    }
}
