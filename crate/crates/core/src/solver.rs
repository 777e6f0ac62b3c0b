//! Fixed-point search for `F^ε` and the shrinking-ε pipeline that
//! approximates trembling-hand perfect equilibria.
//!
//! The iteration is `x ← (1 − α)·x + α·F^ε(x)` evaluated on the compiled
//! circuit in [`ExtFloat`] arithmetic, followed by an exact renormalization
//! of every block. Several starts run in parallel; the winner is the start
//! with the smallest exact residual, ties broken by start index, so results
//! do not depend on the thread count.
//!
//! Nothing guarantees that damped iteration converges. A search that misses
//! the tolerance is reported as [`SolveStatus::NoConvergence`] together with
//! the best profile found.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::circuit::Circuit;
use crate::compiler::{compile_f_eps, reference_f_eps, CompileError};
use crate::extfloat::ExtFloat;
use crate::game::{Game, GameError, MixedProfile};
use crate::numfmt::{format_dyadic, format_scientific, parse_rational};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("grid of {points} points exceeds the budget of {budget}")]
    GridTooLarge { points: u128, budget: u128 },
    #[error("could not build thread pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveConfig {
    /// Damping `α` in `(0, 1]`.
    pub damping: BigRational,
    pub residual_tol: BigRational,
    pub max_iters: usize,
    pub starts: usize,
    pub seed: u64,
    pub precision_bits: u64,
    /// Stop a start early once its residual has not improved for this many
    /// iterations.
    pub stall_iters: usize,
    /// Upper bound on the number of ε stages in [`approximate_pe`].
    pub max_stages: usize,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            damping: BigRational::new(1.into(), 2.into()),
            residual_tol: parse_rational("1e-12").expect("literal"),
            max_iters: 5000,
            starts: 8,
            seed: 0,
            precision_bits: 128,
            stall_iters: 2500,
            max_stages: 64,
            threads: None,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |s: &str| Err(SolveError::Config(s.into()));
        if !self.damping.is_positive() || self.damping > BigRational::one() {
            return bad("damping must lie in (0, 1]");
        }
        if !self.residual_tol.is_positive() {
            return bad("residual tolerance must be positive");
        }
        if self.max_iters == 0 || self.starts == 0 || self.max_stages == 0 || self.stall_iters == 0 {
            return bad("iteration, start, stall and stage counts must be positive");
        }
        if self.precision_bits < 16 {
            return bad("precision must be at least 16 bits");
        }
        if self.threads == Some(0) {
            return bad("thread count must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    NoConvergence,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Converged => "converged",
            SolveStatus::NoConvergence => "no-convergence",
        })
    }
}

/// Result of a single-ε search. `profile` has dyadic entries and
/// `residual` is its exact residual.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveOutcome {
    pub profile: MixedProfile,
    pub residual: BigRational,
    pub iterations: usize,
    pub start: usize,
    pub status: SolveStatus,
}

/// `‖F^ε(x) − x‖_∞` in exact arithmetic.
pub fn residual(g: &Game, x: &MixedProfile, eps: &BigRational) -> Result<BigRational, SolveError> {
    let y = reference_f_eps(g, x, eps)?;
    Ok(x.linf_distance(&y).expect("same shape"))
}

/// Where a start begins.
#[derive(Debug, Clone)]
enum Start {
    Given(MixedProfile),
    Uniform,
    Random(u64),
}

struct Runner<'a> {
    game: &'a Game,
    circuit: Circuit,
    eps: BigRational,
    eps_f: ExtFloat,
    alpha: ExtFloat,
    one_minus_alpha: ExtFloat,
    tol_f: ExtFloat,
    cfg: &'a SolveConfig,
}

struct StartResult {
    profile: MixedProfile,
    residual: BigRational,
    iterations: usize,
}

impl Runner<'_> {
    fn start_point(&self, start: &Start) -> Vec<ExtFloat> {
        let p = self.cfg.precision_bits;
        let counts = self.game.strategy_counts();
        let blocks: Vec<Vec<ExtFloat>> = match start {
            Start::Given(x) => x
                .blocks()
                .iter()
                .map(|b| b.iter().map(|v| ExtFloat::from_rational(v, p)).collect())
                .collect(),
            Start::Uniform => counts
                .iter()
                .map(|&m| {
                    let v = ExtFloat::from_rational(&BigRational::new(BigInt::one(), BigInt::from(m)), p);
                    vec![v; m]
                })
                .collect(),
            Start::Random(stream) => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
                rng.set_stream(*stream);
                counts
                    .iter()
                    .map(|&m| {
                        let w: Vec<u32> = (0..m).map(|_| rng.gen_range(1..=1000)).collect();
                        let total: u32 = w.iter().sum();
                        w.iter()
                            .map(|&k| ExtFloat::from_rational(&BigRational::new(k.into(), total.into()), p))
                            .collect()
                    })
                    .collect()
            }
        };
        let mut flat: Vec<ExtFloat> = blocks.into_iter().flatten().collect();
        renormalize(&mut flat, counts);
        flat
    }

    fn apply(&self, x: &[ExtFloat]) -> Vec<ExtFloat> {
        self.circuit
            .eval_float(x, Some(&self.eps_f), self.cfg.precision_bits)
            .expect("compiled circuit matches the game")
    }

    fn float_residual(&self, x: &[ExtFloat], fx: &[ExtFloat]) -> ExtFloat {
        let p = self.cfg.precision_bits;
        x.iter()
            .zip(fx)
            .map(|(a, b)| a.sub(b, p).abs())
            .max()
            .unwrap_or_else(ExtFloat::zero)
    }

    fn to_profile(&self, x: &[ExtFloat]) -> MixedProfile {
        let flat: Vec<BigRational> = x
            .iter()
            .map(|v| v.to_rational().expect("iterates have moderate exponents"))
            .collect();
        MixedProfile::from_flat(self.game.strategy_counts(), &flat).expect("renormalized iterate")
    }

    fn run(&self, start: &Start) -> StartResult {
        let p = self.cfg.precision_bits;
        let counts = self.game.strategy_counts();
        let mut x = self.start_point(start);
        let mut best = x.clone();
        let mut best_r: Option<ExtFloat> = None;
        let mut last_improvement = 0;
        let mut iterations = 0;
        for it in 1..=self.cfg.max_iters {
            iterations = it;
            let fx = self.apply(&x);
            let r = self.float_residual(&x, &fx);
            if best_r.as_ref().is_none_or(|b| r < *b) {
                best = x.clone();
                best_r = Some(r.clone());
                last_improvement = it;
            }
            if r <= self.tol_f || it - last_improvement >= self.cfg.stall_iters {
                break;
            }
            x = x
                .iter()
                .zip(&fx)
                .map(|(a, b)| a.mul(&self.one_minus_alpha, p).add(&b.mul(&self.alpha, p), p))
                .collect();
            renormalize(&mut x, counts);
        }

        // one undamped step from the best iterate often lands closer
        let mut polished = self.apply(&best);
        renormalize(&mut polished, counts);
        let best_profile = self.to_profile(&best);
        let polished_profile = self.to_profile(&polished);
        let r_best = residual(self.game, &best_profile, &self.eps).expect("eps validated");
        let r_polished = residual(self.game, &polished_profile, &self.eps).expect("eps validated");
        let (profile, residual) = if r_polished <= r_best {
            (polished_profile, r_polished)
        } else {
            (best_profile, r_best)
        };
        StartResult {
            profile,
            residual,
            iterations,
        }
    }
}

/// Restores every block sum to exactly one by adding the exact deficit to
/// the block's largest coordinate, lowest index on ties.
fn renormalize(x: &mut [ExtFloat], counts: &[usize]) {
    let mut offset = 0;
    for &m in counts {
        let block = &mut x[offset..offset + m];
        let mut sum = ExtFloat::zero();
        for v in block.iter() {
            sum = sum.checked_add_exact(v).expect("block entries have nearby exponents");
        }
        let deficit = ExtFloat::one().checked_sub_exact(&sum).expect("sum is close to one");
        let mut arg = 0;
        for (j, v) in block.iter().enumerate() {
            if *v > block[arg] {
                arg = j;
            }
        }
        block[arg] = block[arg].checked_add_exact(&deficit).expect("nearby exponents");
        offset += m;
    }
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, SolveError> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| SolveError::ThreadPool(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

fn solve_with_starts(
    g: &Game,
    eps: &BigRational,
    cfg: &SolveConfig,
    warm: Option<&MixedProfile>,
    stage: u64,
) -> Result<SolveOutcome, SolveError> {
    cfg.validate()?;
    // validates 0 < eps < 1/m
    reference_f_eps(g, &MixedProfile::uniform(g.strategy_counts()), eps)?;
    let p = cfg.precision_bits;
    let alpha = ExtFloat::from_rational(&cfg.damping, p);
    let runner = Runner {
        game: g,
        circuit: compile_f_eps(g),
        eps: eps.clone(),
        eps_f: ExtFloat::from_rational(eps, p),
        one_minus_alpha: ExtFloat::one().sub(&alpha, p),
        alpha,
        tol_f: ExtFloat::from_rational(&cfg.residual_tol, p),
        cfg,
    };
    let mut starts = Vec::with_capacity(cfg.starts + 1);
    if let Some(w) = warm {
        starts.push(Start::Given(w.clone()));
    }
    starts.push(Start::Uniform);
    for k in 1..cfg.starts as u64 {
        starts.push(Start::Random((stage << 32) | k));
    }

    let results: Vec<StartResult> = with_pool(cfg.threads, || starts.par_iter().map(|s| runner.run(s)).collect())?;
    let (index, best) = results
        .into_iter()
        .enumerate()
        .reduce(|a, b| if b.1.residual < a.1.residual { b } else { a })
        .expect("at least one start");
    let status = if best.residual <= cfg.residual_tol {
        SolveStatus::Converged
    } else {
        SolveStatus::NoConvergence
    };
    Ok(SolveOutcome {
        profile: best.profile,
        residual: best.residual,
        iterations: best.iterations,
        start: index,
        status,
    })
}

/// Searches for a fixed point of `F^ε` from the uniform profile and
/// `starts − 1` seeded random profiles.
pub fn solve_fixed_point(g: &Game, eps: &BigRational, cfg: &SolveConfig) -> Result<SolveOutcome, SolveError> {
    solve_with_starts(g, eps, cfg, None, 0)
}

/// One ε stage of [`approximate_pe`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageRecord {
    pub eps: BigRational,
    pub iterations: usize,
    pub residual: BigRational,
    pub profile: MixedProfile,
}

impl fmt::Display for StageRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let blocks: Vec<String> = self
            .profile
            .blocks()
            .iter()
            .map(|b| b.iter().map(format_dyadic).collect::<Vec<_>>().join(","))
            .collect();
        write!(
            f,
            "eps={} iters={} residual={} x={}",
            format_dyadic(&self.eps),
            self.iterations,
            format_scientific(&self.residual, 6),
            blocks.join("|")
        )
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("trace line {line}: {message}")]
pub struct TraceParseError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SolveTrace {
    pub stages: Vec<StageRecord>,
}

impl fmt::Display for SolveTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.stages {
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}

impl FromStr for SolveTrace {
    type Err = TraceParseError;

    /// Reads the line format back. Residuals are printed rounded, so the
    /// parsed residual is the printed decimal.
    fn from_str(text: &str) -> Result<Self, TraceParseError> {
        let mut stages = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.trim();
            if content.is_empty() || content.starts_with('#') {
                continue;
            }
            let err = |message: String| TraceParseError { line, message };
            let mut fields = std::collections::HashMap::new();
            for tok in content.split_whitespace() {
                let (k, v) = tok
                    .split_once('=')
                    .ok_or_else(|| err(format!("expected key=value, found `{tok}`")))?;
                fields.insert(k, v);
            }
            let get = |k: &str| fields.get(k).copied().ok_or_else(|| err(format!("missing `{k}`")));
            let num = |k: &str| -> Result<BigRational, TraceParseError> {
                let v = get(k)?;
                parse_rational(v).ok_or_else(|| err(format!("invalid number `{v}` for `{k}`")))
            };
            let eps = num("eps")?;
            let residual = num("residual")?;
            let iterations = get("iters")?
                .parse()
                .map_err(|_| err("invalid iteration count".into()))?;
            let blocks = get("x")?
                .split('|')
                .map(|b| {
                    b.split(',')
                        .map(|v| parse_rational(v).ok_or_else(|| err(format!("invalid probability `{v}`"))))
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<Vec<_>, _>>()?;
            let profile = MixedProfile::new(blocks).map_err(|e| err(e.to_string()))?;
            stages.push(StageRecord {
                eps,
                iterations,
                residual,
                profile,
            });
        }
        Ok(SolveTrace { stages })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeOutcome {
    pub profile: MixedProfile,
    pub trace: SolveTrace,
    pub status: SolveStatus,
}

/// Largest power of two not exceeding `r > 0`.
fn dyadic_floor(r: &BigRational) -> BigRational {
    let two = BigRational::from_integer(BigInt::from(2));
    let mut v = BigRational::one();
    while &v > r {
        v /= &two;
    }
    while &(&v * &two) <= r {
        v *= &two;
    }
    v
}

/// Solves at `ε_k = ε_0 · 2^(−k)`, where `ε_0` is the largest power of two
/// not above `min(δ/2, 1/(m+1))`, warm-starting each stage from the
/// previous one. Stops once two successive solutions lie within `δ/2` in
/// ℓ∞ and the last residual is within tolerance.
///
/// The stabilization rule is a numerical proxy for the (astronomically
/// small) theoretical ε threshold, not a proof of δ-closeness.
pub fn approximate_pe(g: &Game, delta: &BigRational, cfg: &SolveConfig) -> Result<PeOutcome, SolveError> {
    if !delta.is_positive() {
        return Err(SolveError::Config("delta must be positive".into()));
    }
    cfg.validate()?;
    let m = g.total_strategies();
    let half_delta = delta / BigInt::from(2);
    let cap = BigRational::new(BigInt::one(), BigInt::from(m + 1));
    let mut eps = dyadic_floor(&half_delta.clone().min(cap));
    let mut trace = SolveTrace::default();
    let mut previous: Option<MixedProfile> = None;
    for stage in 0..cfg.max_stages {
        let out = solve_with_starts(g, &eps, cfg, previous.as_ref(), stage as u64)?;
        trace.stages.push(StageRecord {
            eps: eps.clone(),
            iterations: out.iterations,
            residual: out.residual.clone(),
            profile: out.profile.clone(),
        });
        if out.status == SolveStatus::NoConvergence {
            return Ok(PeOutcome {
                profile: out.profile,
                trace,
                status: SolveStatus::NoConvergence,
            });
        }
        if let Some(prev) = &previous {
            let moved = prev.linf_distance(&out.profile).expect("same shape");
            if moved <= half_delta {
                return Ok(PeOutcome {
                    profile: out.profile,
                    trace,
                    status: SolveStatus::Converged,
                });
            }
        }
        previous = Some(out.profile);
        eps /= BigInt::from(2);
    }
    Ok(PeOutcome {
        profile: previous.expect("at least one stage"),
        trace,
        status: SolveStatus::NoConvergence,
    })
}

/// Every point of the product of simplex grids `{k / resolution}`.
fn grid_size(counts: &[usize], resolution: usize) -> u128 {
    counts
        .iter()
        .map(|&m| binomial((resolution + m - 1) as u128, (m - 1) as u128))
        .fold(1u128, |a, b| a.saturating_mul(b))
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r.saturating_mul(n - i) / (i + 1);
    }
    r
}

/// All compositions of `total` into `parts` non-negative parts, in
/// lexicographic order.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in (0..=total).rev() {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

pub const DEFAULT_GRID_BUDGET: u128 = 2_000_000;

/// Brute-force oracle: the grid point of least exact residual, ties broken
/// by enumeration order (first player's block varies slowest, each block
/// from its first vertex onwards).
pub fn grid_oracle(g: &Game, eps: &BigRational, resolution: usize) -> Result<MixedProfile, SolveError> {
    grid_oracle_with_budget(g, eps, resolution, DEFAULT_GRID_BUDGET)
}

pub fn grid_oracle_with_budget(
    g: &Game,
    eps: &BigRational,
    resolution: usize,
    budget: u128,
) -> Result<MixedProfile, SolveError> {
    if resolution == 0 {
        return Err(SolveError::Config("resolution must be positive".into()));
    }
    let counts = g.strategy_counts();
    let points = grid_size(counts, resolution);
    if points > budget {
        return Err(SolveError::GridTooLarge { points, budget });
    }
    reference_f_eps(g, &MixedProfile::uniform(counts), eps)?;
    let per_block: Vec<Vec<Vec<BigRational>>> = counts
        .iter()
        .map(|&m| {
            compositions(resolution, m)
                .into_iter()
                .map(|c| {
                    c.into_iter()
                        .map(|k| BigRational::new(BigInt::from(k), BigInt::from(resolution)))
                        .collect()
                })
                .collect()
        })
        .collect();
    let sizes: Vec<usize> = per_block.iter().map(Vec::len).collect();
    let point = |mut index: usize| -> MixedProfile {
        let mut blocks = vec![Vec::new(); sizes.len()];
        for i in (0..sizes.len()).rev() {
            blocks[i] = per_block[i][index % sizes[i]].clone();
            index /= sizes[i];
        }
        MixedProfile::new(blocks).expect("grid point")
    };
    let (_, best_index) = (0..points as usize)
        .into_par_iter()
        .map(|k| {
            let r = residual(g, &point(k), eps).expect("validated");
            (r, k)
        })
        .reduce_with(|a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a })
        .expect("non-empty grid");
    Ok(point(best_index))
}
