//! The map `F^ε` whose Brouwer fixed points are ε-perfect equilibria, both
//! as a reference function over exact rationals and as a compiled
//! division-free circuit.
//!
//! For a profile `x`, let `h(x) = x + v(x)` where `v` holds the payoff of
//! every pure strategy against the other players' mixture. Per player `i`
//! the threshold `t_i` is the unique `t` with `Σ_j max(h_ij − t, ε) = 1`;
//! with `z` the block of `h` sorted descending it equals
//!
//! ```text
//! t_i = max_{l=1..m_i} (1/l) · (z_1 + … + z_l + (m_i − l)·ε − 1)
//! ```
//!
//! and `F^ε(x)_ij = max(h_ij − t_i, ε)`.

mod eps_star;
mod sorting;

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::circuit::{Circuit, CircuitBuilder, Op, Ref};
use crate::fixp::FixpInstance;
use crate::game::{pure_response_payoffs, Game, GameError, MixedProfile, PureStrategy};

pub use eps_star::{compile_eps_star, eps_star_base, eps_star_squarings, EpsStarParams};
pub use sorting::SortingNetwork;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CompileError {
    #[error("eps must satisfy 0 < eps < 1/m = 1/{m}, got {eps}")]
    EpsOutOfRange { eps: String, m: usize },
    #[error("threshold input is not sorted descending at position {0}")]
    Unsorted(usize),
    #[error("threshold input is empty")]
    EmptyBlock,
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Game(#[from] GameError),
}

/// The threshold `t_i` together with the prefix length `l` attaining the
/// maximum (smallest such `l` on ties).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThresholdWitness {
    pub t_value: BigRational,
    /// 1-based prefix length.
    pub arg_l: usize,
}

/// Evaluates the max-over-prefixes threshold formula on a descending
/// vector. When `z.len() * eps < 1` the result satisfies
/// `Σ_j max(z_j − t, eps) = 1`.
pub fn compute_threshold(z: &[BigRational], eps: &BigRational) -> Result<ThresholdWitness, CompileError> {
    if z.is_empty() {
        return Err(CompileError::EmptyBlock);
    }
    if let Some(pos) = z.windows(2).position(|w| w[0] < w[1]) {
        return Err(CompileError::Unsorted(pos + 1));
    }
    let m = z.len();
    let mut prefix = BigRational::zero();
    let mut best: Option<ThresholdWitness> = None;
    for (idx, value) in z.iter().enumerate() {
        let l = idx + 1;
        prefix += value;
        let candidate = (&prefix + eps * BigInt::from(m - l) - BigRational::one()) / BigInt::from(l);
        if best.as_ref().is_none_or(|b| candidate > b.t_value) {
            best = Some(ThresholdWitness {
                t_value: candidate,
                arg_l: l,
            });
        }
    }
    Ok(best.expect("non-empty"))
}

fn check_eps(g: &Game, eps: &BigRational) -> Result<(), CompileError> {
    let m = g.total_strategies();
    if !eps.is_positive() || eps * BigInt::from(m) >= BigRational::one() {
        return Err(CompileError::EpsOutOfRange {
            eps: crate::numfmt::format_rational(eps),
            m,
        });
    }
    Ok(())
}

/// `F^ε(x)` in exact arithmetic. Requires `0 < eps < 1/m`; the result lies
/// in the ε-restricted polytope (every block sums to exactly one and every
/// coordinate is at least `eps`).
pub fn reference_f_eps(g: &Game, x: &MixedProfile, eps: &BigRational) -> Result<MixedProfile, CompileError> {
    check_eps(g, eps)?;
    let v = pure_response_payoffs(g, x)?;
    let mut blocks = Vec::with_capacity(g.num_players());
    for (player, payoffs) in v.iter().enumerate() {
        let h: Vec<BigRational> = x.block(player).iter().zip(payoffs).map(|(a, b)| a + b).collect();
        let mut z = h.clone();
        z.sort_by(|a, b| b.cmp(a));
        let t = compute_threshold(&z, eps)?.t_value;
        blocks.push(h.iter().map(|hj| (hj - &t).max(eps.clone())).collect());
    }
    Ok(MixedProfile::new(blocks)?)
}

/// Compiles `F^ε` into a `{+, −, *, min, max}` circuit with inputs `x` and
/// `eps`, one output per pure strategy in flat order.
///
/// Construction: monomials `∏_{k≠i} x_{k,a_k}` are shared across players,
/// `v` and `h` use balanced addition trees, each block is sorted by a
/// Batcher network (one max and one min gate per comparator), prefix sums
/// are incremental, the `1/l` factors are constant multiplications and the
/// threshold is a balanced max tree. Single-strategy players output the
/// constant 1.
pub fn compile_f_eps(g: &Game) -> Circuit {
    let counts = g.strategy_counts().to_vec();
    let n = g.num_players();
    let mut b = CircuitBuilder::new(counts.clone(), true);
    let mut monomials: HashMap<Vec<(usize, usize)>, Ref> = HashMap::new();

    // v(x): terms[i][j] collects payoff-weighted monomials
    let mut terms: Vec<Vec<Vec<Ref>>> = counts.iter().map(|&m| vec![Vec::new(); m]).collect();
    for (index, profile) in g.profiles().enumerate() {
        let payoffs = g.payoffs_at(index);
        for i in 0..n {
            if counts[i] == 1 || payoffs[i].is_zero() {
                continue;
            }
            let key: Vec<(usize, usize)> = (0..n).filter(|&k| k != i).map(|k| (k, profile[k])).collect();
            let mono = monomial(&mut b, &mut monomials, &key);
            let term = if payoffs[i].is_one() {
                mono
            } else {
                let c = b.constant(payoffs[i].clone());
                b.mul(c, mono)
            };
            terms[i][profile[i]].push(term);
        }
    }

    for (i, &m) in counts.iter().enumerate() {
        if m == 1 {
            let one = b.constant(BigRational::one());
            b.output(PureStrategy { player: i, strategy: 0 }, one);
            continue;
        }
        let h: Vec<Ref> = (0..m)
            .map(|j| {
                let xij = b.input(PureStrategy { player: i, strategy: j });
                if terms[i][j].is_empty() {
                    xij
                } else {
                    let vij = b.sum(&terms[i][j]);
                    b.add(xij, vij)
                }
            })
            .collect();

        let mut z = h.clone();
        let network = SortingNetwork::batcher(m);
        for &(hi, lo) in network.comparators() {
            let (a, c) = (z[hi], z[lo]);
            z[hi] = b.max(a, c);
            z[lo] = b.min(a, c);
        }

        let eps = b.eps();
        let one = b.constant(BigRational::one());
        let mut candidates = Vec::with_capacity(m);
        let mut prefix = z[0];
        for l in 1..=m {
            if l > 1 {
                prefix = b.add(prefix, z[l - 1]);
            }
            let mut acc = prefix;
            match m - l {
                0 => {}
                1 => acc = b.add(acc, eps),
                k => {
                    let c = b.constant(BigRational::from_integer(BigInt::from(k)));
                    let scaled = b.mul(c, eps);
                    acc = b.add(acc, scaled);
                }
            }
            acc = b.sub(acc, one);
            if l > 1 {
                let inv = b.constant(BigRational::new(BigInt::one(), BigInt::from(l)));
                acc = b.mul(inv, acc);
            }
            candidates.push(acc);
        }
        let t = b.reduce_balanced(Op::Max, &candidates).expect("m >= 2");
        for (j, &hj) in h.iter().enumerate() {
            let shifted = b.sub(hj, t);
            let out = b.max(shifted, eps);
            b.output(PureStrategy { player: i, strategy: j }, out);
        }
    }
    b.finish().expect("compiler only emits backward references")
}

fn monomial(b: &mut CircuitBuilder, cache: &mut HashMap<Vec<(usize, usize)>, Ref>, key: &[(usize, usize)]) -> Ref {
    if let Some(&r) = cache.get(key) {
        return r;
    }
    let (&(k, a), rest) = key.split_last().expect("games have at least two players");
    let input = b.input(PureStrategy { player: k, strategy: a });
    let r = if rest.is_empty() {
        input
    } else {
        let prefix = monomial(b, cache, rest);
        b.mul(prefix, input)
    };
    cache.insert(key.to_vec(), r);
    r
}

/// The closed FIXP instance for a game: the profile polytope together with
/// the `F^ε` circuit whose eps input is replaced by the repeated-squaring
/// ε* circuit.
pub fn emit_fixp_instance(g: &Game, delta: &BigRational, c: &BigRational) -> Result<FixpInstance, CompileError> {
    let params = EpsStarParams::for_game(g, delta.clone(), c.clone())?;
    let eps_circuit = compile_eps_star(&params)?;
    let closed = compile_f_eps(g)
        .bind_eps(&eps_circuit)
        .map_err(|e| CompileError::Parameter(e.to_string()))?;
    Ok(FixpInstance::for_profiles(g.strategy_counts(), closed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::fixtures::*;
    use crate::game::{is_eps_pe, ratio};
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> BigRational {
        ratio(n, d)
    }

    #[test]
    fn threshold_examples() {
        let w = compute_threshold(&[q(9, 10), q(7, 10)], &q(1, 10)).unwrap();
        assert_eq!(
            w,
            ThresholdWitness {
                t_value: q(3, 10),
                arg_l: 2
            }
        );
        let w = compute_threshold(&[q(3, 2), q(1, 5)], &q(1, 10)).unwrap();
        assert_eq!(
            w,
            ThresholdWitness {
                t_value: q(3, 5),
                arg_l: 1
            }
        );
        let w = compute_threshold(&[q(1, 2), q(1, 2)], &q(1, 10)).unwrap();
        assert_eq!(
            w,
            ThresholdWitness {
                t_value: q(0, 1),
                arg_l: 2
            }
        );
        assert_eq!(
            compute_threshold(&[q(1, 5), q(3, 2)], &q(1, 10)).unwrap_err(),
            CompileError::Unsorted(1)
        );
        assert_eq!(compute_threshold(&[], &q(1, 10)).unwrap_err(), CompileError::EmptyBlock);
    }

    #[test]
    fn reference_fixed_points() {
        let g = weak_domination();
        let x = MixedProfile::from_ratios(&[vec![(7, 8), (1, 8)], vec![(7, 8), (1, 8)]]).unwrap();
        assert_eq!(reference_f_eps(&g, &x, &q(1, 8)).unwrap(), x);
        let u = MixedProfile::uniform(&[2, 2]);
        assert_eq!(reference_f_eps(&matching_pennies(), &u, &q(1, 10)).unwrap(), u);
        let c = coordination3();
        let x3 = MixedProfile::from_ratios(&vec![vec![(15, 16), (1, 16)]; 3]).unwrap();
        assert_eq!(reference_f_eps(&c, &x3, &q(1, 16)).unwrap(), x3);
        assert!(is_eps_pe(&c, &x3, &q(1, 16), &q(0, 1)).unwrap().0);
    }

    #[test]
    fn eps_range_is_enforced() {
        let g = weak_domination();
        let x = MixedProfile::uniform(&[2, 2]);
        for bad in [q(0, 1), q(-1, 8), q(1, 4), q(1, 2)] {
            assert!(matches!(
                reference_f_eps(&g, &x, &bad),
                Err(CompileError::EpsOutOfRange { m: 4, .. })
            ));
        }
    }

    #[test]
    fn compiled_fixed_point_round_trips() {
        let g = weak_domination();
        let c = compile_f_eps(&g);
        let x = [q(7, 8), q(1, 8), q(7, 8), q(1, 8)];
        assert_eq!(c.eval_exact(&x, Some(&q(1, 8))).unwrap(), x.to_vec());
        let back: Circuit = c.to_text().parse().unwrap();
        assert_eq!(back.eval_exact(&x, Some(&q(1, 8))).unwrap(), x.to_vec());
    }

    #[test]
    fn four_strategy_block_uses_five_comparators() {
        let g = Game::from_integers(vec![4, 1], &vec![vec![0, 0]; 4]).unwrap();
        let c = compile_f_eps(&g);
        // only player 1 is sorted; five comparators give five min gates
        assert_eq!(c.count_op(Op::Min), 5);
        // five comparator maxes, a three-node threshold max tree, four clamps
        assert_eq!(c.count_op(Op::Max), 5 + 3 + 4);
    }

    #[test]
    fn single_strategy_player_outputs_one() {
        let g = Game::from_integers(vec![1, 2], &[vec![3, 1], vec![-2, 0]]).unwrap();
        let c = compile_f_eps(&g);
        let text = c.to_text();
        assert!(text.contains("out 1 1 g"));
        let one_gate = c.outputs()[0].source;
        match one_gate {
            Ref::Gate(k) => assert_eq!(c.gates()[k], crate::circuit::Gate::Const(q(1, 1))),
            other => panic!("unexpected {other:?}"),
        }
        let out = c.eval_exact(&[q(1, 1), q(1, 3), q(2, 3)], Some(&q(1, 5))).unwrap();
        assert_eq!(out[0], q(1, 1));
    }

    fn arb_game() -> impl Strategy<Value = Game> {
        (prop::collection::vec(1usize..=3, 2..=3)).prop_flat_map(|counts| {
            let profiles: usize = counts.iter().product();
            let n = counts.len();
            prop::collection::vec(prop::collection::vec(-3i64..=3, n), profiles)
                .prop_map(move |rows| Game::from_integers(counts.clone(), &rows).unwrap())
        })
    }

    fn arb_block(m: usize) -> impl Strategy<Value = Vec<BigRational>> {
        prop::collection::vec(0i64..20, m).prop_map(|w| {
            let total: i64 = w.iter().sum();
            if total == 0 {
                let mut v = vec![q(0, 1); w.len()];
                v[0] = q(1, 1);
                v
            } else {
                w.iter().map(|&k| q(k, total)).collect()
            }
        })
    }

    fn arb_instance() -> impl Strategy<Value = (Game, MixedProfile, BigRational)> {
        arb_game().prop_flat_map(|g| {
            let blocks: Vec<_> = g.strategy_counts().iter().map(|&m| arb_block(m)).collect();
            let m = g.total_strategies() as i64;
            (Just(g), blocks, 1i64..1000).prop_map(move |(g, blocks, k)| {
                // eps uniformly inside (0, 1/m)
                let eps = q(k, 1000 * m);
                (g, MixedProfile::new(blocks).unwrap(), eps)
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn threshold_solves_water_filling(
            raw in prop::collection::vec((-50i64..50, 1i64..20), 1..7), k in 1i64..100
        ) {
            let mut z: Vec<BigRational> = raw.iter().map(|&(n, d)| q(n, d)).collect();
            z.sort_by(|a, b| b.cmp(a));
            let eps = q(k, 100 * z.len() as i64);
            let t = compute_threshold(&z, &eps).unwrap().t_value;
            let total: BigRational = z.iter().map(|zj| (zj - &t).max(eps.clone())).sum();
            prop_assert_eq!(total, q(1, 1));
        }

        #[test]
        fn circuit_equals_reference((g, x, eps) in arb_instance()) {
            let c = compile_f_eps(&g);
            let out = c.eval_exact(&x.flatten(), Some(&eps)).unwrap();
            let reference = reference_f_eps(&g, &x, &eps).unwrap();
            prop_assert_eq!(out, reference.flatten());
        }

        #[test]
        fn output_lies_in_restricted_polytope((g, x, eps) in arb_instance()) {
            let y = reference_f_eps(&g, &x, &eps).unwrap();
            prop_assert!(y.min_probability() >= eps);
        }

        #[test]
        fn relabeling_equivariance((g, x, eps) in arb_instance(), player in 0usize..3) {
            // reverse one player's strategies together with the payoff table
            let player = player % g.num_players();
            let counts = g.strategy_counts().to_vec();
            let m = counts[player];
            let rows: Vec<Vec<BigRational>> = g
                .profiles()
                .map(|mut p| {
                    p[player] = m - 1 - p[player];
                    (0..g.num_players()).map(|i| g.payoff(&p, i).clone()).collect()
                })
                .collect();
            let permuted = Game::new(counts, rows).unwrap();
            let mut blocks = x.blocks().to_vec();
            blocks[player].reverse();
            let px = MixedProfile::new(blocks).unwrap();
            let mut expected = reference_f_eps(&g, &x, &eps).unwrap().into_blocks();
            expected[player].reverse();
            prop_assert_eq!(reference_f_eps(&permuted, &px, &eps).unwrap().into_blocks(), expected);
        }
    }
}
