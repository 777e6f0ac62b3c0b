//! First-order formulas over the reals: an AST, SMT-LIB printing and
//! parsing, ground evaluation and syntactic bookkeeping (degree,
//! coefficient bitsize, prenex quantifier blocks).
//!
//! Rational constants print as SMT-LIB literals: `3`, `(- 3)`, `(/ 1 4)`,
//! `(- (/ 1 4))`. Division appears only inside such literals.

mod bound;
mod emit;
mod sexpr;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::numfmt::ceil_log2;

pub use bound::{BoundReport, Log2Inverse};
pub use emit::{emit_eps_pe, emit_pe, emit_pe_bound, eps_pe_formula, smt2_script, var_name};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LogicError {
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("variable `{0}` has no value")]
    Unbound(String),
    #[error("cannot evaluate a quantified formula")]
    Quantified,
    #[error("variable `{0}` is bound twice; prenex conversion needs distinct names")]
    NameClash(String),
    #[error("{0}")]
    Parameter(String),
    #[error("eps* has {bits} bits, above the limit of {limit}; use the logarithmic form")]
    TooLarge { bits: String, limit: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Const(BigRational),
    Var(String),
    Add(Vec<Term>),
    Sub(Box<Term>, Box<Term>),
    Mul(Vec<Term>),
    Neg(Box<Term>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cmp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl Cmp {
    pub fn symbol(self) -> &'static str {
        match self {
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Eq => "=",
            Cmp::Ge => ">=",
            Cmp::Gt => ">",
        }
    }

    fn from_symbol(s: &str) -> Option<Cmp> {
        [Cmp::Lt, Cmp::Le, Cmp::Eq, Cmp::Ge, Cmp::Gt]
            .into_iter()
            .find(|c| c.symbol() == s)
    }

    fn holds(self, a: &BigRational, b: &BigRational) -> bool {
        match self {
            Cmp::Lt => a < b,
            Cmp::Le => a <= b,
            Cmp::Eq => a == b,
            Cmp::Ge => a >= b,
            Cmp::Gt => a > b,
        }
    }
}

/// Maximal blocks of equal quantifiers, outermost first.
pub type QuantifierPrefix = Vec<(Quantifier, Vec<String>)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quantifier {
    Forall,
    Exists,
}

impl Quantifier {
    fn keyword(self) -> &'static str {
        match self {
            Quantifier::Forall => "forall",
            Quantifier::Exists => "exists",
        }
    }

    fn dual(self) -> Quantifier {
        match self {
            Quantifier::Forall => Quantifier::Exists,
            Quantifier::Exists => Quantifier::Forall,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Atom(Cmp, Term, Term),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Not(Box<Formula>),
    Quant(Quantifier, Vec<String>, Box<Formula>),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Term {
        Term::Var(name.into())
    }

    pub fn constant(c: BigRational) -> Term {
        Term::Const(c)
    }

    pub fn int(v: i64) -> Term {
        Term::Const(BigRational::from_integer(BigInt::from(v)))
    }

    /// N-ary sum; the empty sum is `0` and a single term is
    /// returned as is.
    pub fn sum(mut terms: Vec<Term>) -> Term {
        match terms.len() {
            0 => Term::int(0),
            1 => terms.pop().expect("one term"),
            _ => Term::Add(terms),
        }
    }

    pub fn product(mut factors: Vec<Term>) -> Term {
        match factors.len() {
            0 => Term::int(1),
            1 => factors.pop().expect("one factor"),
            _ => Term::Mul(factors),
        }
    }

    pub fn difference(a: Term, b: Term) -> Term {
        Term::Sub(Box::new(a), Box::new(b))
    }

    /// Value under an assignment.
    pub fn eval(&self, env: &HashMap<String, BigRational>) -> Result<BigRational, LogicError> {
        Ok(match self {
            Term::Const(c) => c.clone(),
            Term::Var(v) => env.get(v).cloned().ok_or_else(|| LogicError::Unbound(v.clone()))?,
            Term::Add(ts) => {
                let mut acc = BigRational::zero();
                for t in ts {
                    acc += t.eval(env)?;
                }
                acc
            }
            Term::Sub(a, b) => a.eval(env)? - b.eval(env)?,
            Term::Mul(ts) => {
                let mut acc = BigRational::from_integer(1.into());
                for t in ts {
                    acc *= t.eval(env)?;
                }
                acc
            }
            Term::Neg(a) => -a.eval(env)?,
        })
    }

    /// Syntactic total degree, an upper bound on the degree of the
    /// expanded polynomial.
    pub fn degree(&self) -> usize {
        match self {
            Term::Const(_) => 0,
            Term::Var(_) => 1,
            Term::Add(ts) => ts.iter().map(Term::degree).max().unwrap_or(0),
            Term::Sub(a, b) => a.degree().max(b.degree()),
            Term::Mul(ts) => ts.iter().map(Term::degree).sum(),
            Term::Neg(a) => a.degree(),
        }
    }

    fn visit_consts(&self, f: &mut impl FnMut(&BigRational)) {
        match self {
            Term::Const(c) => f(c),
            Term::Var(_) => {}
            Term::Add(ts) | Term::Mul(ts) => ts.iter().for_each(|t| t.visit_consts(f)),
            Term::Sub(a, b) => {
                a.visit_consts(f);
                b.visit_consts(f);
            }
            Term::Neg(a) => a.visit_consts(f),
        }
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Const(_) => {}
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::Add(ts) | Term::Mul(ts) => ts.iter().for_each(|t| t.collect_vars(out)),
            Term::Sub(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Term::Neg(a) => a.collect_vars(out),
        }
    }
}

/// `max(⌈log₂ |p|⌉, ⌈log₂ q⌉)` for `p/q` in lowest terms; zero for `0`.
pub fn rational_bitsize(r: &BigRational) -> u64 {
    let p = r.numer().magnitude();
    let num = if p.is_zero() { 0 } else { ceil_log2(p) };
    num.max(ceil_log2(r.denom().magnitude()))
}

impl Formula {
    pub fn atom(cmp: Cmp, a: Term, b: Term) -> Formula {
        Formula::Atom(cmp, a, b)
    }

    /// Conjunction; empty is `true`, singletons are unwrapped.
    pub fn and(mut fs: Vec<Formula>) -> Formula {
        match fs.len() {
            0 => Formula::True,
            1 => fs.pop().expect("one formula"),
            _ => Formula::And(fs),
        }
    }

    /// Disjunction; empty is `false`, singletons are unwrapped.
    pub fn or(mut fs: Vec<Formula>) -> Formula {
        match fs.len() {
            0 => Formula::False,
            1 => fs.pop().expect("one formula"),
            _ => Formula::Or(fs),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn forall(vars: Vec<String>, body: Formula) -> Formula {
        Formula::Quant(Quantifier::Forall, vars, Box::new(body))
    }

    pub fn exists(vars: Vec<String>, body: Formula) -> Formula {
        Formula::Quant(Quantifier::Exists, vars, Box::new(body))
    }

    /// Truth value of a quantifier-free formula under an assignment.
    pub fn eval(&self, env: &HashMap<String, BigRational>) -> Result<bool, LogicError> {
        Ok(match self {
            Formula::True => true,
            Formula::False => false,
            Formula::Atom(c, a, b) => c.holds(&a.eval(env)?, &b.eval(env)?),
            Formula::And(fs) => {
                for f in fs {
                    if !f.eval(env)? {
                        return Ok(false);
                    }
                }
                true
            }
            Formula::Or(fs) => {
                for f in fs {
                    if f.eval(env)? {
                        return Ok(true);
                    }
                }
                false
            }
            Formula::Not(f) => !f.eval(env)?,
            Formula::Quant(..) => return Err(LogicError::Quantified),
        })
    }

    pub fn is_quantifier_free(&self) -> bool {
        match self {
            Formula::True | Formula::False | Formula::Atom(..) => true,
            Formula::And(fs) | Formula::Or(fs) => fs.iter().all(Formula::is_quantifier_free),
            Formula::Not(f) => f.is_quantifier_free(),
            Formula::Quant(..) => false,
        }
    }

    pub fn atoms(&self) -> Vec<(Cmp, &Term, &Term)> {
        let mut out = Vec::new();
        self.visit_atoms(&mut |c, a, b| out.push((c, a, b)));
        out
    }

    fn visit_atoms<'a>(&'a self, f: &mut impl FnMut(Cmp, &'a Term, &'a Term)) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(c, a, b) => f(*c, a, b),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|g| g.visit_atoms(f)),
            Formula::Not(g) | Formula::Quant(_, _, g) => g.visit_atoms(f),
        }
    }

    /// Largest syntactic degree over all atoms (of either side).
    pub fn max_degree(&self) -> usize {
        self.atoms()
            .into_iter()
            .map(|(_, a, b)| a.degree().max(b.degree()))
            .max()
            .unwrap_or(0)
    }

    /// Largest [`rational_bitsize`] over all constants.
    pub fn coefficient_bitsize(&self) -> u64 {
        let mut best = 0;
        for (_, a, b) in self.atoms() {
            a.visit_consts(&mut |c| best = best.max(rational_bitsize(c)));
            b.visit_consts(&mut |c| best = best.max(rational_bitsize(c)));
        }
        best
    }

    /// Free variables in sorted order.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(_, a, b) => {
                let mut vars = BTreeSet::new();
                a.collect_vars(&mut vars);
                b.collect_vars(&mut vars);
                out.extend(vars.into_iter().filter(|v| !bound.contains(v)));
            }
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.collect_free(bound, out)),
            Formula::Not(f) => f.collect_free(bound, out),
            Formula::Quant(_, vars, f) => {
                let before = bound.len();
                bound.extend(vars.iter().cloned());
                f.collect_free(bound, out);
                bound.truncate(before);
            }
        }
    }

    /// Prenex normal form: the quantifier prefix as maximal blocks of equal
    /// quantifiers, and the quantifier-free matrix. Requires every bound
    /// variable to have a distinct name that is not also free.
    pub fn prenex(&self) -> Result<(QuantifierPrefix, Formula), LogicError> {
        let free = self.free_vars();
        let mut seen = BTreeSet::new();
        self.check_names(&free, &mut seen)?;
        let (prefix, matrix) = self.pull();
        let mut blocks: Vec<(Quantifier, Vec<String>)> = Vec::new();
        for (q, vars) in prefix {
            match blocks.last_mut() {
                Some((last, vs)) if *last == q => vs.extend(vars),
                _ => blocks.push((q, vars)),
            }
        }
        Ok((blocks, matrix))
    }

    /// Sizes of the prenex quantifier blocks, outermost first.
    pub fn quantifier_blocks(&self) -> Result<Vec<(Quantifier, usize)>, LogicError> {
        Ok(self.prenex()?.0.into_iter().map(|(q, vs)| (q, vs.len())).collect())
    }

    fn check_names(&self, free: &BTreeSet<String>, seen: &mut BTreeSet<String>) -> Result<(), LogicError> {
        match self {
            Formula::True | Formula::False | Formula::Atom(..) => Ok(()),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().try_for_each(|f| f.check_names(free, seen)),
            Formula::Not(f) => f.check_names(free, seen),
            Formula::Quant(_, vars, f) => {
                for v in vars {
                    if free.contains(v) || !seen.insert(v.clone()) {
                        return Err(LogicError::NameClash(v.clone()));
                    }
                }
                f.check_names(free, seen)
            }
        }
    }

    fn pull(&self) -> (Vec<(Quantifier, Vec<String>)>, Formula) {
        match self {
            Formula::True | Formula::False | Formula::Atom(..) => (Vec::new(), self.clone()),
            Formula::And(fs) | Formula::Or(fs) => {
                let mut prefix = Vec::new();
                let mut parts = Vec::with_capacity(fs.len());
                for f in fs {
                    let (p, m) = f.pull();
                    prefix.extend(p);
                    parts.push(m);
                }
                let matrix = if matches!(self, Formula::And(_)) {
                    Formula::And(parts)
                } else {
                    Formula::Or(parts)
                };
                (prefix, matrix)
            }
            Formula::Not(f) => {
                let (p, m) = f.pull();
                (p.into_iter().map(|(q, v)| (q.dual(), v)).collect(), Formula::not(m))
            }
            Formula::Quant(q, vars, f) => {
                let (p, m) = f.pull();
                let mut prefix = vec![(*q, vars.clone())];
                prefix.extend(p);
                (prefix, m)
            }
        }
    }

    /// SMT-LIB rendering on one line.
    pub fn to_smt(&self) -> String {
        self.to_string()
    }

    /// Parses one SMT-LIB formula.
    pub fn parse_smt(text: &str) -> Result<Formula, LogicError> {
        let expr = sexpr::parse_one(text)?;
        sexpr::to_formula(&expr)
    }

    /// Reads back a script written by [`smt2_script`]: the conjunction of
    /// its `assert` commands. Other commands are ignored.
    pub fn parse_script(text: &str) -> Result<Formula, LogicError> {
        let mut asserted = Vec::new();
        for cmd in sexpr::parse_all(text)? {
            if let sexpr::Sexpr::List(items, offset) = &cmd {
                if items.first().and_then(|h| h.as_atom()) == Some("assert") {
                    if items.len() != 2 {
                        return Err(LogicError::Parse {
                            offset: *offset,
                            message: "`assert` takes one formula".into(),
                        });
                    }
                    asserted.push(sexpr::to_formula(&items[1])?);
                }
            }
        }
        Ok(Formula::and(asserted))
    }
}

fn write_const(f: &mut fmt::Formatter<'_>, c: &BigRational) -> fmt::Result {
    let abs = c.abs();
    let body = if abs.denom() == &BigInt::from(1) {
        abs.numer().to_string()
    } else {
        format!("(/ {} {})", abs.numer(), abs.denom())
    };
    if c.is_negative() {
        write!(f, "(- {body})")
    } else {
        f.write_str(&body)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |f: &mut fmt::Formatter<'_>, op: &str, ts: &[Term]| -> fmt::Result {
            write!(f, "({op}")?;
            for t in ts {
                write!(f, " {t}")?;
            }
            write!(f, ")")
        };
        match self {
            Term::Const(c) => write_const(f, c),
            Term::Var(v) => f.write_str(v),
            Term::Add(ts) => list(f, "+", ts),
            Term::Mul(ts) => list(f, "*", ts),
            Term::Sub(a, b) => write!(f, "(- {a} {b})"),
            Term::Neg(a) => write!(f, "(- {a})"),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |f: &mut fmt::Formatter<'_>, op: &str, fs: &[Formula]| -> fmt::Result {
            write!(f, "({op}")?;
            for g in fs {
                write!(f, " {g}")?;
            }
            write!(f, ")")
        };
        match self {
            Formula::True => f.write_str("true"),
            Formula::False => f.write_str("false"),
            Formula::Atom(c, a, b) => write!(f, "({} {a} {b})", c.symbol()),
            Formula::And(fs) => list(f, "and", fs),
            Formula::Or(fs) => list(f, "or", fs),
            Formula::Not(g) => write!(f, "(not {g})"),
            Formula::Quant(q, vars, body) => {
                write!(f, "({} (", q.keyword())?;
                for (k, v) in vars.iter().enumerate() {
                    if k > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "({v} Real)")?;
                }
                write!(f, ") {body})")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::ratio;

    fn env(pairs: &[(&str, BigRational)]) -> HashMap<String, BigRational> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    #[test]
    fn constants_print_as_literals() {
        let t = Term::Add(vec![
            Term::Const(ratio(3, 1)),
            Term::Const(ratio(-3, 1)),
            Term::Const(ratio(1, 4)),
            Term::Const(ratio(-1, 4)),
        ]);
        assert_eq!(t.to_string(), "(+ 3 (- 3) (/ 1 4) (- (/ 1 4)))");
        assert_eq!(
            Formula::parse_smt("(< (+ 3 (- 3) (/ 1 4) (- (/ 1 4))) x)").unwrap(),
            Formula::Atom(Cmp::Lt, t, Term::var("x"))
        );
    }

    #[test]
    fn ground_evaluation() {
        let f = Formula::parse_smt("(and (> x 0) (or (<= x (/ 1 2)) (= (* x y) 1)))").unwrap();
        assert!(f.eval(&env(&[("x", ratio(1, 3)), ("y", ratio(0, 1))])).unwrap());
        assert!(f.eval(&env(&[("x", ratio(2, 1)), ("y", ratio(1, 2))])).unwrap());
        assert!(!f.eval(&env(&[("x", ratio(2, 1)), ("y", ratio(1, 1))])).unwrap());
        assert_eq!(
            f.eval(&env(&[("x", ratio(2, 1))])),
            Err(LogicError::Unbound("y".into()))
        );
        let q = Formula::parse_smt("(forall ((x Real)) (> x 0))").unwrap();
        assert_eq!(q.eval(&HashMap::new()), Err(LogicError::Quantified));
    }

    #[test]
    fn degree_and_bitsize() {
        let f = Formula::parse_smt("(< (* x (* y z) 3) (+ (- x y) (/ 5 16)))").unwrap();
        assert_eq!(f.max_degree(), 3);
        assert_eq!(f.coefficient_bitsize(), 4);
        assert_eq!(rational_bitsize(&ratio(0, 1)), 0);
        assert_eq!(rational_bitsize(&ratio(1, 1)), 0);
        assert_eq!(rational_bitsize(&ratio(-8, 1)), 3);
        assert_eq!(rational_bitsize(&ratio(1, 4)), 2);
    }

    #[test]
    fn prenex_blocks() {
        let f = Formula::parse_smt(
            "(forall ((a Real) (b Real)) (exists ((c Real)) (or (not (exists ((d Real)) (> d a))) (forall ((e Real)) (> e c)))))",
        )
        .unwrap();
        let (blocks, matrix) = f.prenex().unwrap();
        let sizes: Vec<_> = blocks.iter().map(|(q, v)| (*q, v.len())).collect();
        assert_eq!(
            sizes,
            vec![
                (Quantifier::Forall, 2),
                (Quantifier::Exists, 1),
                (Quantifier::Forall, 2)
            ]
        );
        assert!(matrix.is_quantifier_free());
        let clash = Formula::parse_smt("(and (exists ((a Real)) (> a 0)) (exists ((a Real)) (< a 0)))").unwrap();
        assert_eq!(clash.prenex().unwrap_err(), LogicError::NameClash("a".into()));
    }

    #[test]
    fn free_variables() {
        let f = Formula::parse_smt("(exists ((y Real)) (and (< (- x y) eps) (> y 0)))").unwrap();
        let free: Vec<_> = f.free_vars().into_iter().collect();
        assert_eq!(free, vec!["eps".to_string(), "x".to_string()]);
    }
}
