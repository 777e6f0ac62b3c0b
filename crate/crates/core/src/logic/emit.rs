//! The equilibrium formulas: ε-perfect equilibrium, perfect equilibrium
//! and the "almost implies near" bound statement.

use num_rational::BigRational;
use num_traits::{One, Zero};

use super::{Cmp, Formula, LogicError, Term};
use crate::game::{Game, PureStrategy};

/// `<prefix><i>_<j>` with 1-based indices, e.g. `x2_1`.
pub fn var_name(prefix: &str, s: PureStrategy) -> String {
    format!("{prefix}{}_{}", s.player + 1, s.strategy + 1)
}

fn vars(g: &Game, prefix: &str) -> Vec<String> {
    g.pure_strategies().map(|s| var_name(prefix, s)).collect()
}

/// `R_i(x \ k)`: player `i`'s expected payoff for pure strategy `k` when
/// everyone else plays according to `x`.
fn response_payoff(g: &Game, prefix: &str, player: usize, strategy: usize) -> Term {
    let mut terms = Vec::new();
    for (index, profile) in g.profiles().enumerate() {
        if profile[player] != strategy {
            continue;
        }
        let u = &g.payoffs_at(index)[player];
        if u.is_zero() {
            continue;
        }
        let mut factors = Vec::with_capacity(g.num_players());
        if !u.is_one() {
            factors.push(Term::Const(u.clone()));
        }
        for (k, &a) in profile.iter().enumerate() {
            if k != player {
                factors.push(Term::var(var_name(prefix, PureStrategy { player: k, strategy: a })));
            }
        }
        terms.push(Term::product(factors));
    }
    Term::sum(terms)
}

fn squared_distance(a: &[String], b: &[String]) -> Term {
    Term::sum(
        a.iter()
            .zip(b)
            .map(|(u, v)| {
                let d = Term::difference(Term::var(u.clone()), Term::var(v.clone()));
                Term::Mul(vec![d.clone(), d])
            })
            .collect(),
    )
}

/// `EPS-PE(x, ε)` over variables `<prefix>i_j` and `eps`: positivity of
/// every coordinate, one sum equation per player, and for each player and
/// ordered strategy pair `(k, l)` the clause
/// `R_i(x\k) ≥ R_i(x\l) ∨ x_{i,k} ≤ ε`. With `prune` the trivially true
/// `k = l` clauses are dropped.
pub fn eps_pe_formula(g: &Game, prefix: &str, eps: &str, prune: bool) -> Formula {
    let mut parts = Vec::new();
    for s in g.pure_strategies() {
        parts.push(Formula::atom(Cmp::Gt, Term::var(var_name(prefix, s)), Term::int(0)));
    }
    for (player, &m) in g.strategy_counts().iter().enumerate() {
        let sum = Term::sum(
            (0..m)
                .map(|strategy| Term::var(var_name(prefix, PureStrategy { player, strategy })))
                .collect(),
        );
        parts.push(Formula::atom(Cmp::Eq, sum, Term::int(1)));
    }
    for (player, &m) in g.strategy_counts().iter().enumerate() {
        let payoffs: Vec<Term> = (0..m).map(|k| response_payoff(g, prefix, player, k)).collect();
        for k in 0..m {
            for l in 0..m {
                if prune && k == l {
                    continue;
                }
                let xk = Term::var(var_name(prefix, PureStrategy { player, strategy: k }));
                parts.push(Formula::or(vec![
                    Formula::atom(Cmp::Ge, payoffs[k].clone(), payoffs[l].clone()),
                    Formula::atom(Cmp::Le, xk, Term::var(eps)),
                ]));
            }
        }
    }
    Formula::and(parts)
}

/// `PE(x)` with `x` over `<prefix>i_j`, bound variables `<inner>i_j` and
/// `eps_name`: `∀ε (ε ≤ 0 ∨ ∃y (EPS-PE(y, ε) ∧ ‖x − y‖² < ε))`.
fn pe_formula(g: &Game, prefix: &str, inner: &str, eps: &str, prune: bool) -> Formula {
    let x = vars(g, prefix);
    let y = vars(g, inner);
    let body = Formula::and(vec![
        eps_pe_formula(g, inner, eps, prune),
        Formula::atom(Cmp::Lt, squared_distance(&x, &y), Term::var(eps)),
    ]);
    Formula::forall(
        vec![eps.to_string()],
        Formula::or(vec![
            Formula::atom(Cmp::Le, Term::var(eps), Term::int(0)),
            Formula::exists(y, body),
        ]),
    )
}

/// `EPS-PE(x, eps)` with free variables `x1_1, …` and `eps`.
pub fn emit_eps_pe(g: &Game, prune: bool) -> Formula {
    eps_pe_formula(g, "x", "eps", prune)
}

/// `PE(x)` with free variables `x1_1, …`; prenex blocks `∀ (1) ∃ (m)`.
pub fn emit_pe(g: &Game, prune: bool) -> Formula {
    pe_formula(g, "x", "y", "eps", prune)
}

/// `PE-bound_δ(eps)`:
/// `∀x ∃y (eps > 0 ∧ (¬EPS-PE(x, eps) ∨ (PE(y) ∧ ‖x − y‖² < δ²)))` with
/// `δ²` as a constant. Its only free variable is `eps`; the prenex
/// blocks have sizes `m, m, 1, m`.
pub fn emit_pe_bound(g: &Game, delta: &BigRational, prune: bool) -> Result<Formula, LogicError> {
    if delta <= &BigRational::zero() {
        return Err(LogicError::Parameter("delta must be positive".into()));
    }
    let x = vars(g, "x");
    let y = vars(g, "y");
    let delta_sq = delta * delta;
    let near = Formula::atom(Cmp::Lt, squared_distance(&x, &y), Term::Const(delta_sq));
    let body = Formula::and(vec![
        Formula::atom(Cmp::Gt, Term::var("eps"), Term::int(0)),
        Formula::or(vec![
            Formula::not(eps_pe_formula(g, "x", "eps", prune)),
            Formula::and(vec![pe_formula(g, "y", "z", "eps2", prune), near]),
        ]),
    ]);
    Ok(Formula::forall(x, Formula::exists(y, body)))
}

/// A complete SMT-LIB script asserting `f` with its free variables
/// declared as reals.
pub fn smt2_script(f: &Formula) -> String {
    let mut out = String::from("(set-logic NRA)\n");
    for v in f.free_vars() {
        out.push_str(&format!("(declare-fun {v} () Real)\n"));
    }
    out.push_str(&format!("(assert {f})\n(check-sat)\n"));
    out
}
