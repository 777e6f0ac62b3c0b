//! Normal-form games, mixed profiles and the equilibrium predicates.
//!
//! Players and strategies are 0-based in the API and 1-based in every text
//! format. Pure profiles are enumerated lexicographically with the last
//! player's index varying fastest; the payoff table, the game file and all
//! circuit construction share that order.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::numfmt::{format_rational, parse_rational};
use crate::verifier::{CertificateEntry, EpsPeCertificate};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GameError {
    #[error("a game needs at least 2 players, got {0}")]
    TooFewPlayers(usize),
    #[error("player {player} has no strategies")]
    EmptyStrategySet { player: usize },
    #[error("expected {expected} pure profiles with {players} payoffs each, got {got}")]
    PayoffCount {
        expected: usize,
        players: usize,
        got: usize,
    },
    #[error("profile shape {got:?} does not match strategy counts {expected:?}")]
    Shape { expected: Vec<usize>, got: Vec<usize> },
    #[error("player {player}: probability {value} is negative")]
    NegativeProbability { player: usize, value: String },
    #[error("player {player}: probabilities sum to {sum}, not 1")]
    NotNormalized { player: usize, sum: String },
    #[error("eps must be positive")]
    NonPositiveEps,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// A pure strategy `(player, strategy)`, both 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PureStrategy {
    pub player: usize,
    pub strategy: usize,
}

impl fmt::Display for PureStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.player + 1, self.strategy + 1)
    }
}

/// Finite n-player game with exact rational payoffs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Game {
    strategy_counts: Vec<usize>,
    /// `payoffs[profile * n + player]`
    payoffs: Vec<BigRational>,
}

impl Game {
    /// Builds a game from one payoff vector (length n) per pure profile,
    /// profiles in lexicographic order.
    pub fn new(strategy_counts: Vec<usize>, payoffs: Vec<Vec<BigRational>>) -> Result<Self, GameError> {
        let n = strategy_counts.len();
        if n < 2 {
            return Err(GameError::TooFewPlayers(n));
        }
        if let Some(player) = strategy_counts.iter().position(|&m| m == 0) {
            return Err(GameError::EmptyStrategySet { player });
        }
        let profiles: usize = strategy_counts.iter().product();
        let well_formed = payoffs.len() == profiles && payoffs.iter().all(|p| p.len() == n);
        if !well_formed {
            return Err(GameError::PayoffCount {
                expected: profiles,
                players: n,
                got: payoffs.iter().map(Vec::len).sum(),
            });
        }
        Ok(Game {
            strategy_counts,
            payoffs: payoffs.into_iter().flatten().collect(),
        })
    }

    /// Convenience constructor from integer payoffs.
    pub fn from_integers(strategy_counts: Vec<usize>, payoffs: &[Vec<i64>]) -> Result<Self, GameError> {
        let payoffs = payoffs
            .iter()
            .map(|row| row.iter().map(|&v| BigRational::from_integer(v.into())).collect())
            .collect();
        Game::new(strategy_counts, payoffs)
    }

    pub fn num_players(&self) -> usize {
        self.strategy_counts.len()
    }

    pub fn strategy_counts(&self) -> &[usize] {
        &self.strategy_counts
    }

    /// `m`, the total number of pure strategies over all players.
    pub fn total_strategies(&self) -> usize {
        self.strategy_counts.iter().sum()
    }

    pub fn num_profiles(&self) -> usize {
        self.strategy_counts.iter().product()
    }

    /// Offset of player `i`'s block in the flattened strategy vector.
    pub fn block_offset(&self, player: usize) -> usize {
        self.strategy_counts[..player].iter().sum()
    }

    /// Position of `(player, strategy)` in the flattened strategy vector.
    pub fn flat_index(&self, s: PureStrategy) -> usize {
        self.block_offset(s.player) + s.strategy
    }

    pub fn pure_strategies(&self) -> impl Iterator<Item = PureStrategy> + '_ {
        self.strategy_counts
            .iter()
            .enumerate()
            .flat_map(|(player, &m)| (0..m).map(move |strategy| PureStrategy { player, strategy }))
    }

    /// Index of a pure profile in the payoff table.
    pub fn profile_index(&self, profile: &[usize]) -> usize {
        profile
            .iter()
            .zip(&self.strategy_counts)
            .fold(0, |acc, (&a, &m)| acc * m + a)
    }

    /// Iterates over all pure profiles in table order.
    pub fn profiles(&self) -> ProfileIter<'_> {
        ProfileIter {
            counts: &self.strategy_counts,
            next: Some(vec![0; self.strategy_counts.len()]),
        }
    }

    pub fn payoff(&self, profile: &[usize], player: usize) -> &BigRational {
        &self.payoffs[self.profile_index(profile) * self.num_players() + player]
    }

    /// All n payoffs of the profile at table position `index`.
    pub fn payoffs_at(&self, index: usize) -> &[BigRational] {
        let n = self.num_players();
        &self.payoffs[index * n..(index + 1) * n]
    }

    /// Largest absolute payoff (0 for the all-zero game).
    pub fn max_abs_payoff(&self) -> BigRational {
        self.payoffs
            .iter()
            .map(|u| u.abs())
            .max()
            .unwrap_or_else(BigRational::zero)
    }

    /// `B`: the ceiling of the largest absolute payoff.
    pub fn payoff_bound(&self) -> BigUint {
        self.max_abs_payoff()
            .ceil()
            .to_integer()
            .to_biguint()
            .unwrap_or_default()
    }

    /// Renders the game in the text format accepted by [`Game::from_str`].
    pub fn to_text(&self) -> String {
        let mut out = format!("players {}\nstrategies", self.num_players());
        for m in &self.strategy_counts {
            out.push_str(&format!(" {m}"));
        }
        out.push_str("\npayoffs\n");
        for index in 0..self.num_profiles() {
            let row: Vec<String> = self.payoffs_at(index).iter().map(format_rational).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    fn check_shape(&self, x: &MixedProfile) -> Result<(), GameError> {
        if x.strategy_counts() != self.strategy_counts {
            return Err(GameError::Shape {
                expected: self.strategy_counts.clone(),
                got: x.strategy_counts(),
            });
        }
        Ok(())
    }
}

pub struct ProfileIter<'a> {
    counts: &'a [usize],
    next: Option<Vec<usize>>,
}

impl Iterator for ProfileIter<'_> {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        for k in (0..succ.len()).rev() {
            succ[k] += 1;
            if succ[k] < self.counts[k] {
                self.next = Some(succ);
                return Some(current);
            }
            succ[k] = 0;
        }
        Some(current)
    }
}

impl FromStr for Game {
    type Err = ParseError;

    fn from_str(text: &str) -> Result<Self, ParseError> {
        parse_game(text)
    }
}

#[derive(Debug)]
struct Token<'a> {
    text: &'a str,
    line: usize,
    column: usize,
}

fn tokenize(text: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        let mut rest = line;
        let mut offset = 0;
        while let Some(start) = rest.find(|c: char| !c.is_whitespace()) {
            let tail = &rest[start..];
            let len = tail.find(char::is_whitespace).unwrap_or(tail.len());
            tokens.push(Token {
                text: &tail[..len],
                line: line_no + 1,
                column: offset + start + 1,
            });
            offset += start + len;
            rest = &tail[len..];
        }
    }
    tokens
}

fn parse_game(text: &str) -> Result<Game, ParseError> {
    let tokens = tokenize(text);
    let end = |message: String| {
        let line = text.lines().count().max(1);
        ParseError {
            line,
            column: 1,
            message,
        }
    };
    let at = |t: &Token, message: String| ParseError {
        line: t.line,
        column: t.column,
        message,
    };
    let mut it = tokens.iter().peekable();

    let expect_keyword = |t: Option<&Token>, kw: &str| -> Result<(), ParseError> {
        match t {
            Some(t) if t.text == kw => Ok(()),
            Some(t) => Err(at(t, format!("expected `{kw}`, found `{}`", t.text))),
            None => Err(end(format!("expected `{kw}`, found end of input"))),
        }
    };
    let parse_count = |t: &Token| -> Result<usize, ParseError> {
        t.text
            .parse::<usize>()
            .map_err(|_| at(t, format!("expected a non-negative integer, found `{}`", t.text)))
    };

    expect_keyword(it.next(), "players")?;
    let n_tok = it.next().ok_or_else(|| end("missing player count".into()))?;
    let n = parse_count(n_tok)?;
    if n < 2 {
        return Err(at(n_tok, format!("a game needs at least 2 players, got {n}")));
    }
    expect_keyword(it.next(), "strategies")?;
    let mut counts = Vec::with_capacity(n);
    for k in 0..n {
        let t = it
            .next()
            .ok_or_else(|| end(format!("expected {n} strategy counts, found {k}")))?;
        if t.text == "payoffs" {
            return Err(at(t, format!("expected {n} strategy counts, found {k}")));
        }
        let m = parse_count(t)?;
        if m == 0 {
            return Err(at(t, "strategy count must be at least 1".into()));
        }
        counts.push(m);
    }
    match it.next() {
        Some(t) if t.text == "payoffs" => {}
        Some(t) => {
            return Err(at(
                t,
                format!("expected `payoffs` after {n} strategy counts, found `{}`", t.text),
            ))
        }
        None => return Err(end("expected `payoffs`".into())),
    }
    let profiles: usize = counts.iter().product();
    let expected = profiles * n;
    let mut values = Vec::with_capacity(expected);
    for t in it.by_ref() {
        if values.len() == expected {
            return Err(at(
                t,
                format!("too many payoff entries: expected {expected}, found extra `{}`", t.text),
            ));
        }
        let v = parse_rational(t.text).ok_or_else(|| at(t, format!("invalid rational `{}`", t.text)))?;
        values.push(v);
    }
    if values.len() != expected {
        return Err(end(format!(
            "expected {expected} payoff entries ({profiles} profiles x {n} players), found {}",
            values.len()
        )));
    }
    let rows = values.chunks(n).map(<[BigRational]>::to_vec).collect();
    Game::new(counts, rows).map_err(|e| end(e.to_string()))
}

/// One probability vector per player, entries exact rationals.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MixedProfile {
    blocks: Vec<Vec<BigRational>>,
}

impl MixedProfile {
    /// Validates that every block is a probability vector (non-negative,
    /// summing exactly to one).
    pub fn new(blocks: Vec<Vec<BigRational>>) -> Result<Self, GameError> {
        for (player, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(GameError::EmptyStrategySet { player });
            }
            if let Some(v) = block.iter().find(|v| v.is_negative()) {
                return Err(GameError::NegativeProbability {
                    player,
                    value: format_rational(v),
                });
            }
            let sum: BigRational = block.iter().sum();
            if !sum.is_one() {
                return Err(GameError::NotNormalized {
                    player,
                    sum: format_rational(&sum),
                });
            }
        }
        Ok(MixedProfile { blocks })
    }

    pub fn from_flat(strategy_counts: &[usize], flat: &[BigRational]) -> Result<Self, GameError> {
        let total: usize = strategy_counts.iter().sum();
        if flat.len() != total {
            return Err(GameError::Shape {
                expected: strategy_counts.to_vec(),
                got: vec![flat.len()],
            });
        }
        let mut blocks = Vec::with_capacity(strategy_counts.len());
        let mut offset = 0;
        for &m in strategy_counts {
            blocks.push(flat[offset..offset + m].to_vec());
            offset += m;
        }
        MixedProfile::new(blocks)
    }

    pub fn from_ratios(blocks: &[Vec<(i64, i64)>]) -> Result<Self, GameError> {
        MixedProfile::new(
            blocks
                .iter()
                .map(|b| b.iter().map(|&(n, d)| BigRational::new(n.into(), d.into())).collect())
                .collect(),
        )
    }

    pub fn uniform(strategy_counts: &[usize]) -> Self {
        let blocks = strategy_counts
            .iter()
            .map(|&m| vec![BigRational::new(BigInt::one(), BigInt::from(m)); m])
            .collect();
        MixedProfile { blocks }
    }

    /// The pure profile where player `i` plays `choices[i]`.
    pub fn pure(strategy_counts: &[usize], choices: &[usize]) -> Self {
        let blocks = strategy_counts
            .iter()
            .zip(choices)
            .map(|(&m, &c)| {
                (0..m)
                    .map(|j| {
                        if j == c {
                            BigRational::one()
                        } else {
                            BigRational::zero()
                        }
                    })
                    .collect()
            })
            .collect();
        MixedProfile { blocks }
    }

    pub fn blocks(&self) -> &[Vec<BigRational>] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<Vec<BigRational>> {
        self.blocks
    }

    pub fn block(&self, player: usize) -> &[BigRational] {
        &self.blocks[player]
    }

    pub fn get(&self, s: PureStrategy) -> &BigRational {
        &self.blocks[s.player][s.strategy]
    }

    pub fn strategy_counts(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    pub fn flatten(&self) -> Vec<BigRational> {
        self.blocks.iter().flatten().cloned().collect()
    }

    pub fn is_fully_mixed(&self) -> bool {
        self.blocks.iter().flatten().all(|v| v.is_positive())
    }

    pub fn min_probability(&self) -> BigRational {
        self.blocks
            .iter()
            .flatten()
            .min()
            .cloned()
            .expect("profiles are never empty")
    }

    /// ℓ∞ distance; `None` on shape mismatch.
    pub fn linf_distance(&self, other: &MixedProfile) -> Option<BigRational> {
        if self.strategy_counts() != other.strategy_counts() {
            return None;
        }
        Some(
            self.blocks
                .iter()
                .flatten()
                .zip(other.blocks.iter().flatten())
                .map(|(a, b)| (a - b).abs())
                .max()
                .unwrap_or_else(BigRational::zero),
        )
    }

    /// Profile text: one line per player, whitespace-separated entries.
    pub fn to_text_with(&self, fmt_entry: impl Fn(&BigRational) -> String) -> String {
        let mut out = String::new();
        for block in &self.blocks {
            let row: Vec<String> = block.iter().map(&fmt_entry).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn to_text(&self) -> String {
        self.to_text_with(format_rational)
    }

    /// Parses the profile text format; blank lines and `#` comments are
    /// ignored.
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut blocks: Vec<(usize, Vec<BigRational>)> = Vec::new();
        for token in tokenize(text) {
            if blocks.last().map(|(line, _)| *line) != Some(token.line) {
                blocks.push((token.line, Vec::new()));
            }
            let v = parse_rational(token.text).ok_or_else(|| ParseError {
                line: token.line,
                column: token.column,
                message: format!("invalid rational `{}`", token.text),
            })?;
            blocks.last_mut().expect("pushed above").1.push(v);
        }
        if blocks.is_empty() {
            return Err(ParseError {
                line: 1,
                column: 1,
                message: "empty profile".into(),
            });
        }
        let lines: Vec<usize> = blocks.iter().map(|(l, _)| *l).collect();
        MixedProfile::new(blocks.into_iter().map(|(_, b)| b).collect()).map_err(|e| {
            let player = match &e {
                GameError::NegativeProbability { player, .. } | GameError::NotNormalized { player, .. } => *player,
                _ => 0,
            };
            ParseError {
                line: lines.get(player).copied().unwrap_or(1),
                column: 1,
                message: e.to_string(),
            }
        })
    }
}

impl fmt::Display for MixedProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let blocks: Vec<String> = self
            .blocks
            .iter()
            .map(|b| {
                let entries: Vec<String> = b.iter().map(format_rational).collect();
                format!("({})", entries.join(","))
            })
            .collect();
        write!(f, "({})", blocks.join(","))
    }
}

/// `U_i(x)`: expected payoff of player `i` by enumeration of pure profiles.
pub fn expected_payoff(g: &Game, x: &MixedProfile, player: usize) -> Result<BigRational, GameError> {
    g.check_shape(x)?;
    let n = g.num_players();
    let mut total = BigRational::zero();
    for (index, profile) in g.profiles().enumerate() {
        let u = &g.payoffs[index * n + player];
        if u.is_zero() {
            continue;
        }
        let mut weight = BigRational::one();
        for (k, &a) in profile.iter().enumerate() {
            weight *= &x.blocks[k][a];
            if weight.is_zero() {
                break;
            }
        }
        total += weight * u;
    }
    Ok(total)
}

/// `v(x)`: for every `(i, j)` the payoff of pure strategy `j` against the
/// other players' mixture `x_{-i}`. Returned blockwise.
pub fn pure_response_payoffs(g: &Game, x: &MixedProfile) -> Result<Vec<Vec<BigRational>>, GameError> {
    g.check_shape(x)?;
    let n = g.num_players();
    let mut v: Vec<Vec<BigRational>> = g
        .strategy_counts
        .iter()
        .map(|&m| vec![BigRational::zero(); m])
        .collect();
    let mut prefix = vec![BigRational::one(); n + 1];
    let mut suffix = vec![BigRational::one(); n + 1];
    for (index, profile) in g.profiles().enumerate() {
        for k in 0..n {
            prefix[k + 1] = &prefix[k] * &x.blocks[k][profile[k]];
        }
        for k in (0..n).rev() {
            suffix[k] = &suffix[k + 1] * &x.blocks[k][profile[k]];
        }
        for i in 0..n {
            let u = &g.payoffs[index * n + i];
            if u.is_zero() {
                continue;
            }
            let others = &prefix[i] * &suffix[i + 1];
            if !others.is_zero() {
                v[i][profile[i]] += others * u;
            }
        }
    }
    Ok(v)
}

/// ε-perfect equilibrium test with a best-response slack.
///
/// `x` qualifies iff it is fully mixed and every strategy played with
/// probability above `eps` is within `slack` of a best response. Slack 0 is
/// the exact definition.
pub fn is_eps_pe(
    g: &Game,
    x: &MixedProfile,
    eps: &BigRational,
    slack: &BigRational,
) -> Result<(bool, EpsPeCertificate), GameError> {
    if !eps.is_positive() {
        return Err(GameError::NonPositiveEps);
    }
    let v = pure_response_payoffs(g, x)?;
    let mut holds = x.is_fully_mixed();
    let mut entries = Vec::with_capacity(g.total_strategies());
    for (player, block) in v.iter().enumerate() {
        let best = block.iter().max().expect("non-empty block");
        for (strategy, payoff) in block.iter().enumerate() {
            let probability = x.blocks[player][strategy].clone();
            let exceeds_eps = &probability > eps;
            let gap = best - payoff;
            if exceeds_eps && &(payoff + slack) < best {
                holds = false;
            }
            entries.push(CertificateEntry {
                strategy: PureStrategy { player, strategy },
                probability,
                gap,
                exceeds_eps,
            });
        }
    }
    let cert = EpsPeCertificate::from_parts(eps.clone(), slack.clone(), entries, x.is_fully_mixed());
    Ok((holds, cert))
}

/// `U_i(x) >= v(x)_{i,j} - slack` for every player and pure strategy.
pub fn is_approx_nash(g: &Game, x: &MixedProfile, slack: &BigRational) -> Result<bool, GameError> {
    let v = pure_response_payoffs(g, x)?;
    for (player, block) in v.iter().enumerate() {
        let own = expected_payoff(g, x, player)?;
        if block.iter().any(|payoff| &own + slack < *payoff) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Reduces `n/d` to lowest terms, for tests and fixtures.
pub fn ratio(n: i64, d: i64) -> BigRational {
    let g = n.gcd(&d).max(1);
    BigRational::new((n / g).into(), (d / g).into())
}

/// Fixture games used throughout tests, docs and the CLI examples.
pub mod fixtures {
    use super::Game;

    /// 2x2 game where `(T,L)` pays `(1,1)` and everything else `(0,0)`.
    /// `(B,R)` is a Nash equilibrium but not perfect.
    pub fn weak_domination() -> Game {
        Game::from_integers(vec![2, 2], &[vec![1, 1], vec![0, 0], vec![0, 0], vec![0, 0]]).expect("valid fixture")
    }

    pub fn matching_pennies() -> Game {
        Game::from_integers(vec![2, 2], &[vec![1, -1], vec![-1, 1], vec![-1, 1], vec![1, -1]]).expect("valid fixture")
    }

    /// Three players with two strategies each; everyone gets 1 iff all play
    /// their first strategy.
    pub fn coordination3() -> Game {
        let mut rows = vec![vec![0, 0, 0]; 8];
        rows[0] = vec![1, 1, 1];
        Game::from_integers(vec![2, 2, 2], &rows).expect("valid fixture")
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        ratio(n, d)
    }

    #[test]
    fn profile_order_last_player_fastest() {
        let g = Game::from_integers(vec![2, 3], &vec![vec![0, 0]; 6]).unwrap();
        let all: Vec<_> = g.profiles().collect();
        assert_eq!(all[0], vec![0, 0]);
        assert_eq!(all[1], vec![0, 1]);
        assert_eq!(all[3], vec![1, 0]);
        assert_eq!(all.len(), 6);
        for (i, p) in all.iter().enumerate() {
            assert_eq!(g.profile_index(p), i);
        }
    }

    #[test]
    fn expected_payoff_examples() {
        let g = weak_domination();
        let pure = MixedProfile::pure(&[2, 2], &[0, 0]);
        assert_eq!(expected_payoff(&g, &pure, 0).unwrap(), q(1, 1));
        let uniform = MixedProfile::uniform(&[2, 2]);
        assert_eq!(expected_payoff(&g, &uniform, 0).unwrap(), q(1, 4));
        let mp = matching_pennies();
        assert_eq!(expected_payoff(&mp, &uniform, 0).unwrap(), q(0, 1));
        assert_eq!(expected_payoff(&mp, &uniform, 1).unwrap(), q(0, 1));
    }

    #[test]
    fn shape_errors() {
        let g = weak_domination();
        let x = MixedProfile::uniform(&[2, 3]);
        assert!(matches!(expected_payoff(&g, &x, 0), Err(GameError::Shape { .. })));
        assert!(matches!(pure_response_payoffs(&g, &x), Err(GameError::Shape { .. })));
    }

    #[test]
    fn pure_response_examples() {
        let g = weak_domination();
        let v = pure_response_payoffs(&g, &MixedProfile::uniform(&[2, 2])).unwrap();
        assert_eq!(v, vec![vec![q(1, 2), q(0, 1)], vec![q(1, 2), q(0, 1)]]);
        let v = pure_response_payoffs(&g, &MixedProfile::pure(&[2, 2], &[1, 0])).unwrap();
        // player 1 against L: row (1, 0); player 2 against B: column (0, 0)
        assert_eq!(v, vec![vec![q(1, 1), q(0, 1)], vec![q(0, 1), q(0, 1)]]);
    }

    #[test]
    fn eps_pe_examples() {
        let g = weak_domination();
        let eps = q(1, 8);
        let good = MixedProfile::from_ratios(&[vec![(7, 8), (1, 8)], vec![(7, 8), (1, 8)]]).unwrap();
        assert!(is_eps_pe(&g, &good, &eps, &q(0, 1)).unwrap().0);
        let bad = MixedProfile::from_ratios(&[vec![(1, 8), (7, 8)], vec![(1, 8), (7, 8)]]).unwrap();
        assert!(!is_eps_pe(&g, &bad, &eps, &q(0, 1)).unwrap().0);
        let boundary = MixedProfile::pure(&[2, 2], &[0, 0]);
        assert!(!is_eps_pe(&g, &boundary, &eps, &q(0, 1)).unwrap().0);
        assert_eq!(
            is_eps_pe(&g, &good, &q(0, 1), &q(0, 1)).unwrap_err(),
            GameError::NonPositiveEps
        );
    }

    #[test]
    fn approx_nash_examples() {
        let g = weak_domination();
        let zero = q(0, 1);
        assert!(is_approx_nash(&g, &MixedProfile::pure(&[2, 2], &[0, 0]), &zero).unwrap());
        assert!(is_approx_nash(&g, &MixedProfile::pure(&[2, 2], &[1, 1]), &zero).unwrap());
        assert!(!is_approx_nash(&matching_pennies(), &MixedProfile::pure(&[2, 2], &[0, 0]), &zero).unwrap());
        assert!(is_approx_nash(&matching_pennies(), &MixedProfile::uniform(&[2, 2]), &zero).unwrap());
    }

    #[test]
    fn game_text_round_trip() {
        let g = coordination3();
        let parsed: Game = g.to_text().parse().unwrap();
        assert_eq!(parsed, g);
        let g = Game::new(
            vec![2, 2],
            vec![
                vec![q(1, 2), q(-3, 7)],
                vec![q(0, 1), q(2, 1)],
                vec![q(5, 1), q(1, 3)],
                vec![q(0, 1), q(0, 1)],
            ],
        )
        .unwrap();
        assert_eq!(g.to_text().parse::<Game>().unwrap(), g);
    }

    #[test]
    fn game_text_tokens_may_span_lines() {
        let text = "players 2\nstrategies 1\n 2\npayoffs 1 2\n3 4 # comment\n";
        let g: Game = text.parse().unwrap();
        assert_eq!(g.strategy_counts(), &[1, 2]);
        assert_eq!(g.payoff(&[0, 1], 1), &q(4, 1));
    }

    #[test]
    fn game_parse_diagnostics() {
        let err = "players 2\nstrategies 2 2\npayoffs\n1 1 0 0\n0 0\n"
            .parse::<Game>()
            .unwrap_err();
        assert!(err.message.contains("expected 8 payoff entries"), "{err}");
        let err = "players 2\nstrategies 2 2 2\npayoffs\n".parse::<Game>().unwrap_err();
        assert_eq!((err.line, err.column), (2, 16));
        let err = "players 2\nstrategies 1 1\npayoffs 1 x\n".parse::<Game>().unwrap_err();
        assert_eq!((err.line, err.column), (3, 11));
        let err = "players 2\nstrategies 1 1\npayoffs 1 2 3\n"
            .parse::<Game>()
            .unwrap_err();
        assert_eq!((err.line, err.column), (3, 13));
        let err = "players 1\nstrategies 1\npayoffs 1\n".parse::<Game>().unwrap_err();
        assert_eq!(err.line, 1);
        let err = "player 2".parse::<Game>().unwrap_err();
        assert!(err.message.contains("`players`"));
    }

    #[test]
    fn profile_parse_and_validation() {
        let x = MixedProfile::parse("1/2 1/2\n# note\n7/2^3 1/8\n").unwrap();
        assert_eq!(x.block(1), &[q(7, 8), q(1, 8)]);
        let err = MixedProfile::parse("1/2 1/2\n1/2 1/3\n").unwrap_err();
        assert_eq!(err.line, 2);
        assert!(MixedProfile::parse("").is_err());
        assert!(MixedProfile::from_ratios(&[vec![(3, 2), (-1, 2)]]).is_err());
    }

    #[test]
    fn payoff_bound_is_ceiling() {
        let g = Game::new(vec![1, 2], vec![vec![q(-5, 2), q(1, 1)], vec![q(0, 1), q(2, 1)]]).unwrap();
        assert_eq!(g.max_abs_payoff(), q(5, 2));
        assert_eq!(g.payoff_bound(), BigUint::from(3u32));
    }

    #[test]
    fn constructor_rejects_bad_shapes() {
        assert_eq!(
            Game::from_integers(vec![2], &[vec![0], vec![0]]).unwrap_err(),
            GameError::TooFewPlayers(1)
        );
        assert!(matches!(
            Game::from_integers(vec![2, 0], &[]),
            Err(GameError::EmptyStrategySet { player: 1 })
        ));
        assert!(matches!(
            Game::from_integers(vec![1, 1], &[vec![0]]),
            Err(GameError::PayoffCount { .. })
        ));
    }
}
