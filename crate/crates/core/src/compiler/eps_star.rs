//! The constant ε* = min(δ/2, 1/B)^(2^k) with k = ⌈c·m³·log₂ n⌉, encoded by
//! repeated squaring so the circuit stays linear in k while the value has
//! exponentially many bits.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Pow, Signed};

use super::CompileError;
use crate::circuit::{Circuit, CircuitBuilder};
use crate::game::{Game, PureStrategy};
use crate::numfmt::ceil_log2;

/// Refuse exponents whose evaluation would need more than this many bits
/// just to compute `n^(p·m³)`.
const MAX_EXPONENT_BITS: u64 = 1 << 26;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpsStarParams {
    pub delta: BigRational,
    /// Payoff bound `B ≥ 1`.
    pub bound: BigUint,
    pub players: usize,
    pub strategies: usize,
    pub c: BigRational,
}

impl EpsStarParams {
    /// Parameters read off a game: `n` players, `m` total strategies and
    /// `B = max(1, ⌈max |u|⌉)`.
    pub fn for_game(g: &Game, delta: BigRational, c: BigRational) -> Result<Self, CompileError> {
        let bound = g.payoff_bound().max(BigUint::one());
        let params = EpsStarParams {
            delta,
            bound,
            players: g.num_players(),
            strategies: g.total_strategies(),
            c,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), CompileError> {
        let bad = |s: &str| Err(CompileError::Parameter(s.into()));
        if !self.delta.is_positive() {
            return bad("delta must be positive");
        }
        if self.bound < BigUint::one() {
            return bad("payoff bound B must be at least 1");
        }
        if self.players < 2 {
            return bad("n must be at least 2");
        }
        if self.strategies < 2 {
            return bad("m must be at least 2");
        }
        if !self.c.is_positive() {
            return bad("c must be positive");
        }
        Ok(())
    }

    pub fn squarings(&self) -> Result<u64, CompileError> {
        eps_star_squarings(&self.c, self.strategies, self.players)
    }

    pub fn base(&self) -> BigRational {
        eps_star_base(&self.delta, &self.bound)
    }
}

/// `min(δ/2, 1/B)`.
pub fn eps_star_base(delta: &BigRational, bound: &BigUint) -> BigRational {
    let half = delta / BigInt::from(2);
    let inv_b = BigRational::new(BigInt::one(), BigInt::from(bound.clone()));
    half.min(inv_b)
}

/// `⌈c·m³·log₂ n⌉` computed exactly: with `c = p/q` this is the least `k`
/// with `2^(q·k) ≥ n^(p·m³)`.
pub fn eps_star_squarings(c: &BigRational, m: usize, n: usize) -> Result<u64, CompileError> {
    if !c.is_positive() || n < 1 {
        return Err(CompileError::Parameter("c must be positive and n at least 1".into()));
    }
    let p = c.numer().magnitude();
    let q = c.denom().magnitude();
    let m3 = BigUint::from(m).pow(3u32);
    let power = p * m3;
    let n_bits = (n as f64).log2().ceil().max(1.0) as u64;
    let too_big = &power * BigUint::from(n_bits) > BigUint::from(MAX_EXPONENT_BITS);
    let power: u64 = match (too_big, u64::try_from(&power)) {
        (false, Ok(v)) => v,
        _ => return Err(CompileError::Parameter("c·m³·log₂ n is too large to evaluate".into())),
    };
    let l = ceil_log2(&BigUint::from(n).pow(power));
    let k = BigUint::from(l).div_ceil(q);
    u64::try_from(&k).map_err(|_| CompileError::Parameter("squaring count overflows".into()))
}

/// Closed constant circuit: the base constant followed by exactly `k`
/// squaring gates. The single output is keyed `(1,1)`.
pub fn compile_eps_star(params: &EpsStarParams) -> Result<Circuit, CompileError> {
    params.validate()?;
    let k = params.squarings()?;
    let mut b = CircuitBuilder::new(Vec::new(), false);
    let mut acc = b.constant(params.base());
    for _ in 0..k {
        acc = b.mul(acc, acc);
    }
    b.output(PureStrategy { player: 0, strategy: 0 }, acc);
    b.finish().map_err(|e| CompileError::Parameter(e.to_string()))
}
