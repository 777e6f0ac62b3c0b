//! Minimal S-expression reader for the SMT-LIB subset the emitter prints.

use num_bigint::BigInt;
use num_rational::BigRational;

use super::{Cmp, Formula, LogicError, Quantifier, Term};
use crate::numfmt::parse_rational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Sexpr {
    Atom(String, usize),
    List(Vec<Sexpr>, usize),
}

impl Sexpr {
    fn offset(&self) -> usize {
        match self {
            Sexpr::Atom(_, o) | Sexpr::List(_, o) => *o,
        }
    }

    pub(crate) fn as_atom(&self) -> Option<&str> {
        match self {
            Sexpr::Atom(s, _) => Some(s),
            Sexpr::List(..) => None,
        }
    }
}

fn err(offset: usize, message: impl Into<String>) -> LogicError {
    LogicError::Parse {
        offset,
        message: message.into(),
    }
}

/// Reads every top-level expression, skipping `;` comments.
pub(crate) fn parse_all(text: &str) -> Result<Vec<Sexpr>, LogicError> {
    let bytes = text.as_bytes();
    let mut stack: Vec<(Vec<Sexpr>, usize)> = Vec::new();
    let mut top = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b';' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                continue;
            }
            b'(' => stack.push((Vec::new(), i)),
            b')' => {
                let (items, start) = stack.pop().ok_or_else(|| err(i, "unbalanced `)`"))?;
                let list = Sexpr::List(items, start);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(list),
                    None => top.push(list),
                }
            }
            c if c.is_ascii_whitespace() => {}
            _ => {
                let start = i;
                while i < bytes.len() && !bytes[i].is_ascii_whitespace() && !matches!(bytes[i], b'(' | b')' | b';') {
                    i += 1;
                }
                let atom = Sexpr::Atom(text[start..i].to_string(), start);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(atom),
                    None => top.push(atom),
                }
                continue;
            }
        }
        i += 1;
    }
    if let Some((_, start)) = stack.last() {
        return Err(err(*start, "unclosed `(`"));
    }
    Ok(top)
}

pub(crate) fn parse_one(text: &str) -> Result<Sexpr, LogicError> {
    let mut all = parse_all(text)?;
    match all.len() {
        1 => Ok(all.pop().expect("one expression")),
        0 => Err(err(0, "empty input")),
        _ => Err(err(all[1].offset(), "trailing input after the formula")),
    }
}

fn numeral(s: &Sexpr) -> Option<BigInt> {
    let a = s.as_atom()?;
    if a.bytes().all(|b| b.is_ascii_digit()) && !a.is_empty() {
        a.parse().ok()
    } else {
        None
    }
}

/// `n`, `n.m`, `(/ n d)` as a non-negative literal.
fn unsigned_literal(s: &Sexpr) -> Option<BigRational> {
    match s {
        Sexpr::Atom(a, _) if a.as_bytes().first().is_some_and(u8::is_ascii_digit) => parse_rational(a),
        Sexpr::List(items, _) if items.len() == 3 && items[0].as_atom() == Some("/") => {
            let (n, d) = (numeral(&items[1])?, numeral(&items[2])?);
            (d != BigInt::from(0)).then(|| BigRational::new(n, d))
        }
        _ => None,
    }
}

pub(crate) fn to_term(s: &Sexpr) -> Result<Term, LogicError> {
    if let Some(c) = unsigned_literal(s) {
        return Ok(Term::Const(c));
    }
    match s {
        Sexpr::Atom(a, o) => {
            if a.as_bytes().first().is_some_and(u8::is_ascii_digit) {
                Err(err(*o, format!("invalid numeral `{a}`")))
            } else {
                Ok(Term::Var(a.clone()))
            }
        }
        Sexpr::List(items, o) => {
            let head = items
                .first()
                .and_then(Sexpr::as_atom)
                .ok_or_else(|| err(*o, "expected an operator"))?;
            let args = &items[1..];
            match (head, args.len()) {
                ("-", 1) => match unsigned_literal(&args[0]) {
                    Some(c) => Ok(Term::Const(-c)),
                    None => Ok(Term::Neg(Box::new(to_term(&args[0])?))),
                },
                ("-", 2) => Ok(Term::difference(to_term(&args[0])?, to_term(&args[1])?)),
                ("+", n) if n >= 1 => Ok(Term::Add(args.iter().map(to_term).collect::<Result<_, _>>()?)),
                ("*", n) if n >= 1 => Ok(Term::Mul(args.iter().map(to_term).collect::<Result<_, _>>()?)),
                ("/", _) => Err(err(*o, "division is only allowed between numerals")),
                _ => Err(err(
                    *o,
                    format!("unsupported term operator `{head}` with {} arguments", args.len()),
                )),
            }
        }
    }
}

pub(crate) fn to_formula(s: &Sexpr) -> Result<Formula, LogicError> {
    match s {
        Sexpr::Atom(a, o) => match a.as_str() {
            "true" => Ok(Formula::True),
            "false" => Ok(Formula::False),
            _ => Err(err(*o, format!("expected a formula, found `{a}`"))),
        },
        Sexpr::List(items, o) => {
            let head = items
                .first()
                .and_then(Sexpr::as_atom)
                .ok_or_else(|| err(*o, "expected a connective"))?;
            let args = &items[1..];
            let formulas = || args.iter().map(to_formula).collect::<Result<Vec<_>, _>>();
            if let Some(cmp) = Cmp::from_symbol(head) {
                if args.len() != 2 {
                    return Err(err(*o, format!("`{head}` takes two arguments")));
                }
                return Ok(Formula::Atom(cmp, to_term(&args[0])?, to_term(&args[1])?));
            }
            match head {
                "and" => Ok(Formula::And(formulas()?)),
                "or" => Ok(Formula::Or(formulas()?)),
                "not" if args.len() == 1 => Ok(Formula::not(to_formula(&args[0])?)),
                "forall" | "exists" if args.len() == 2 => {
                    let q = if head == "forall" {
                        Quantifier::Forall
                    } else {
                        Quantifier::Exists
                    };
                    let Sexpr::List(binders, bo) = &args[0] else {
                        return Err(err(args[0].offset(), "expected a binder list"));
                    };
                    if binders.is_empty() {
                        return Err(err(*bo, "empty binder list"));
                    }
                    let mut vars = Vec::with_capacity(binders.len());
                    for b in binders {
                        match b {
                            Sexpr::List(pair, _) if pair.len() == 2 && pair[1].as_atom() == Some("Real") => {
                                let name = pair[0]
                                    .as_atom()
                                    .ok_or_else(|| err(b.offset(), "expected a variable name"))?;
                                vars.push(name.to_string());
                            }
                            _ => return Err(err(b.offset(), "expected `(<name> Real)`")),
                        }
                    }
                    Ok(Formula::Quant(q, vars, Box::new(to_formula(&args[1])?)))
                }
                _ => Err(err(*o, format!("unsupported connective `{head}`"))),
            }
        }
    }
}
