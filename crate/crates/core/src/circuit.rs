//! Division-free algebraic circuits over `{+, -, *, min, max}`.
//!
//! Inputs are one slot per profile coordinate `x_{i,j}` plus an optional
//! `eps` slot. Gates form an append-only list; every operand refers to an
//! input or to an earlier gate, so the list is a topological order by
//! construction. Rational constants are gates of their own.
//!
//! Text format (1-based indices):
//!
//! ```text
//! inputs 2 2 eps
//! g1 = mul x1_1 x2_1
//! g2 = const 1/2
//! g3 = max g1 eps
//! out 1 1 g3
//! ```
//!
//! The header lists the strategy count of every player followed by `eps`
//! when the circuit has an eps slot. A closed constant circuit has the bare
//! header `inputs`.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use num_traits::Zero;
use thiserror::Error;

use crate::extfloat::ExtFloat;
use crate::game::PureStrategy;
use crate::numfmt::{format_fraction, parse_rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CircuitError {
    #[error("expected {expected} input values, got {got}")]
    InputCount { expected: usize, got: usize },
    #[error("the eps input is unbound")]
    UnboundEps,
    #[error("a value was supplied for eps but the circuit has no eps input")]
    UnexpectedEps,
    #[error("gate {gate}: operand {operand} does not refer to an input or an earlier gate")]
    BadReference { gate: usize, operand: String },
    #[error("output {key}: reference {operand} is not a gate or input")]
    BadOutput { key: PureStrategy, operand: String },
    #[error("output {0} is defined twice")]
    DuplicateOutput(PureStrategy),
    #[error("cannot bind eps: {0}")]
    Bind(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ref {
    /// Flat index of an `x_{i,j}` slot.
    Input(usize),
    Eps,
    /// 0-based gate index.
    Gate(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Min,
    Max,
}

impl Op {
    pub const ALL: [Op; 5] = [Op::Add, Op::Sub, Op::Mul, Op::Min, Op::Max];

    pub fn name(self) -> &'static str {
        match self {
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::Min => "min",
            Op::Max => "max",
        }
    }

    fn from_name(s: &str) -> Option<Op> {
        Op::ALL.into_iter().find(|op| op.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Gate {
    Const(BigRational),
    Binary { op: Op, lhs: Ref, rhs: Ref },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Output {
    pub key: PureStrategy,
    pub source: Ref,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit {
    strategy_counts: Vec<usize>,
    has_eps: bool,
    gates: Vec<Gate>,
    outputs: Vec<Output>,
}

impl Circuit {
    /// Validates the DAG invariant and output references.
    pub fn new(
        strategy_counts: Vec<usize>,
        has_eps: bool,
        gates: Vec<Gate>,
        outputs: Vec<Output>,
    ) -> Result<Self, CircuitError> {
        let circuit = Circuit {
            strategy_counts,
            has_eps,
            gates,
            outputs,
        };
        for (k, gate) in circuit.gates.iter().enumerate() {
            if let Gate::Binary { lhs, rhs, .. } = gate {
                for r in [lhs, rhs] {
                    if !circuit.is_valid_ref(*r, k) {
                        return Err(CircuitError::BadReference {
                            gate: k + 1,
                            operand: circuit.ref_name(*r),
                        });
                    }
                }
            }
        }
        let mut seen = HashSet::new();
        for out in &circuit.outputs {
            if !circuit.is_valid_ref(out.source, circuit.gates.len()) {
                return Err(CircuitError::BadOutput {
                    key: out.key,
                    operand: circuit.ref_name(out.source),
                });
            }
            if !seen.insert(out.key) {
                return Err(CircuitError::DuplicateOutput(out.key));
            }
        }
        Ok(circuit)
    }

    fn is_valid_ref(&self, r: Ref, before: usize) -> bool {
        match r {
            Ref::Input(i) => i < self.num_inputs(),
            Ref::Eps => self.has_eps,
            Ref::Gate(g) => g < before,
        }
    }

    pub fn strategy_counts(&self) -> &[usize] {
        &self.strategy_counts
    }

    pub fn num_inputs(&self) -> usize {
        self.strategy_counts.iter().sum()
    }

    pub fn has_eps(&self) -> bool {
        self.has_eps
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn outputs(&self) -> &[Output] {
        &self.outputs
    }

    /// Number of gates, constants included.
    pub fn gate_count(&self) -> usize {
        self.gates.len()
    }

    pub fn count_op(&self, op: Op) -> usize {
        self.gates
            .iter()
            .filter(|g| matches!(g, Gate::Binary { op: o, .. } if *o == op))
            .count()
    }

    /// Longest path measured in binary gates; inputs and constants have
    /// depth 0.
    pub fn depth(&self) -> usize {
        let mut depth = vec![0usize; self.gates.len()];
        let of = |depth: &[usize], r: Ref| match r {
            Ref::Gate(g) => depth[g],
            _ => 0,
        };
        for (k, gate) in self.gates.iter().enumerate() {
            if let Gate::Binary { lhs, rhs, .. } = gate {
                depth[k] = 1 + of(&depth, *lhs).max(of(&depth, *rhs));
            }
        }
        self.outputs.iter().map(|o| of(&depth, o.source)).max().unwrap_or(0)
    }

    fn input_name(&self, flat: usize) -> String {
        let mut rest = flat;
        for (player, &m) in self.strategy_counts.iter().enumerate() {
            if rest < m {
                return format!("x{}_{}", player + 1, rest + 1);
            }
            rest -= m;
        }
        format!("x?{flat}")
    }

    fn ref_name(&self, r: Ref) -> String {
        match r {
            Ref::Input(i) => self.input_name(i),
            Ref::Eps => "eps".to_string(),
            Ref::Gate(g) => format!("g{}", g + 1),
        }
    }

    fn eval_with<A: Arith>(
        &self,
        arith: &A,
        x: &[A::Value],
        eps: Option<&A::Value>,
    ) -> Result<Vec<A::Value>, CircuitError> {
        if x.len() != self.num_inputs() {
            return Err(CircuitError::InputCount {
                expected: self.num_inputs(),
                got: x.len(),
            });
        }
        match (self.has_eps, eps) {
            (true, None) => return Err(CircuitError::UnboundEps),
            (false, Some(_)) => return Err(CircuitError::UnexpectedEps),
            _ => {}
        }
        let mut values: Vec<A::Value> = Vec::with_capacity(self.gates.len());
        let fetch = |values: &[A::Value], r: Ref| -> A::Value {
            match r {
                Ref::Input(i) => x[i].clone(),
                Ref::Eps => eps.expect("checked above").clone(),
                Ref::Gate(g) => values[g].clone(),
            }
        };
        for gate in &self.gates {
            let v = match gate {
                Gate::Const(c) => arith.constant(c),
                Gate::Binary { op, lhs, rhs } => {
                    let a = fetch(&values, *lhs);
                    let b = fetch(&values, *rhs);
                    arith.apply(*op, &a, &b)
                }
            };
            values.push(v);
        }
        Ok(self.outputs.iter().map(|o| fetch(&values, o.source)).collect())
    }

    /// Exact rational evaluation; outputs in declaration order.
    pub fn eval_exact(&self, x: &[BigRational], eps: Option<&BigRational>) -> Result<Vec<BigRational>, CircuitError> {
        self.eval_with(&ExactArith, x, eps)
    }

    /// Evaluation with every gate rounded to `precision_bits`.
    pub fn eval_float(
        &self,
        x: &[ExtFloat],
        eps: Option<&ExtFloat>,
        precision_bits: u64,
    ) -> Result<Vec<ExtFloat>, CircuitError> {
        self.eval_with(&FloatArith { prec: precision_bits }, x, eps)
    }

    /// Replaces the eps input by the single output of a closed constant
    /// circuit, whose gates are prepended.
    pub fn bind_eps(&self, constant: &Circuit) -> Result<Circuit, CircuitError> {
        if !self.has_eps {
            return Err(CircuitError::Bind("circuit has no eps input".into()));
        }
        if constant.num_inputs() != 0 || constant.has_eps || constant.outputs.len() != 1 {
            return Err(CircuitError::Bind(
                "eps replacement must be a closed circuit with exactly one output".into(),
            ));
        }
        let offset = constant.gates.len();
        let eps_ref = constant.outputs[0].source;
        let remap = |r: Ref| match r {
            Ref::Eps => eps_ref,
            Ref::Gate(g) => Ref::Gate(g + offset),
            input => input,
        };
        let mut gates = constant.gates.clone();
        gates.extend(self.gates.iter().map(|g| match g {
            Gate::Const(c) => Gate::Const(c.clone()),
            Gate::Binary { op, lhs, rhs } => Gate::Binary {
                op: *op,
                lhs: remap(*lhs),
                rhs: remap(*rhs),
            },
        }));
        let outputs = self
            .outputs
            .iter()
            .map(|o| Output {
                key: o.key,
                source: remap(o.source),
            })
            .collect();
        Circuit::new(self.strategy_counts.clone(), false, gates, outputs)
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "inputs")?;
        for m in &self.strategy_counts {
            write!(f, " {m}")?;
        }
        if self.has_eps {
            write!(f, " eps")?;
        }
        writeln!(f)?;
        for (k, gate) in self.gates.iter().enumerate() {
            match gate {
                Gate::Const(c) => writeln!(f, "g{} = const {}", k + 1, format_fraction(c))?,
                Gate::Binary { op, lhs, rhs } => writeln!(
                    f,
                    "g{} = {} {} {}",
                    k + 1,
                    op.name(),
                    self.ref_name(*lhs),
                    self.ref_name(*rhs)
                )?,
            }
        }
        for out in &self.outputs {
            writeln!(
                f,
                "out {} {} {}",
                out.key.player + 1,
                out.key.strategy + 1,
                self.ref_name(out.source)
            )?;
        }
        Ok(())
    }
}

impl FromStr for Circuit {
    type Err = CircuitError;

    fn from_str(text: &str) -> Result<Self, CircuitError> {
        let err = |line: usize, message: String| CircuitError::Parse { line, message };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let (header_line, header) = lines.next().ok_or_else(|| err(1, "missing `inputs` header".into()))?;
        let mut tokens = header.split_whitespace();
        if tokens.next() != Some("inputs") {
            return Err(err(header_line, format!("expected `inputs` header, found `{header}`")));
        }
        let mut strategy_counts = Vec::new();
        let mut has_eps = false;
        for tok in tokens {
            if has_eps {
                return Err(err(header_line, format!("unexpected `{tok}` after eps")));
            }
            if tok == "eps" {
                has_eps = true;
                continue;
            }
            match tok.parse::<usize>() {
                Ok(m) if m > 0 => strategy_counts.push(m),
                _ => return Err(err(header_line, format!("invalid strategy count `{tok}`"))),
            }
        }
        let mut offsets = Vec::with_capacity(strategy_counts.len());
        let mut total = 0;
        for &m in &strategy_counts {
            offsets.push(total);
            total += m;
        }

        let parse_ref = |tok: &str, line: usize, gates_so_far: usize| -> Result<Ref, CircuitError> {
            if tok == "eps" {
                return if has_eps {
                    Ok(Ref::Eps)
                } else {
                    Err(err(
                        line,
                        "reference to eps, but the header declares no eps input".into(),
                    ))
                };
            }
            if let Some(rest) = tok.strip_prefix('g') {
                let k: usize = rest
                    .parse()
                    .map_err(|_| err(line, format!("invalid gate reference `{tok}`")))?;
                if k == 0 || k > gates_so_far {
                    return Err(err(line, format!("`{tok}` is not an earlier gate")));
                }
                return Ok(Ref::Gate(k - 1));
            }
            if let Some(rest) = tok.strip_prefix('x') {
                if let Some((i, j)) = rest.split_once('_') {
                    if let (Ok(i), Ok(j)) = (i.parse::<usize>(), j.parse::<usize>()) {
                        if i >= 1 && i <= strategy_counts.len() && j >= 1 && j <= strategy_counts[i - 1] {
                            return Ok(Ref::Input(offsets[i - 1] + j - 1));
                        }
                        return Err(err(line, format!("input `{tok}` is out of range")));
                    }
                }
            }
            Err(err(line, format!("invalid reference `{tok}`")))
        };

        let mut gates = Vec::new();
        let mut outputs = Vec::new();
        for (line, content) in lines {
            let tokens: Vec<&str> = content.split_whitespace().collect();
            if tokens[0] == "out" {
                if tokens.len() != 4 {
                    return Err(err(line, "expected `out <i> <j> <ref>`".into()));
                }
                let idx = |t: &str| t.parse::<usize>().ok().filter(|&v| v >= 1);
                let (Some(i), Some(j)) = (idx(tokens[1]), idx(tokens[2])) else {
                    return Err(err(line, "output indices must be positive integers".into()));
                };
                outputs.push(Output {
                    key: PureStrategy {
                        player: i - 1,
                        strategy: j - 1,
                    },
                    source: parse_ref(tokens[3], line, gates.len())?,
                });
                continue;
            }
            if !outputs.is_empty() {
                return Err(err(line, "gate definitions must precede outputs".into()));
            }
            let expected_name = format!("g{}", gates.len() + 1);
            if tokens[0] != expected_name {
                return Err(err(
                    line,
                    format!("expected gate `{expected_name}`, found `{}`", tokens[0]),
                ));
            }
            if tokens.get(1) != Some(&"=") {
                return Err(err(line, "expected `=` after gate name".into()));
            }
            let gate = match tokens.get(2..) {
                Some(["const", value]) => {
                    Gate::Const(parse_rational(value).ok_or_else(|| err(line, format!("invalid constant `{value}`")))?)
                }
                Some([op, lhs, rhs]) => Gate::Binary {
                    op: Op::from_name(op).ok_or_else(|| err(line, format!("unknown operation `{op}`")))?,
                    lhs: parse_ref(lhs, line, gates.len())?,
                    rhs: parse_ref(rhs, line, gates.len())?,
                },
                _ => return Err(err(line, format!("malformed gate definition `{content}`"))),
            };
            gates.push(gate);
        }
        Circuit::new(strategy_counts, has_eps, gates, outputs)
    }
}

/// Gate semantics over some value type.
trait Arith {
    type Value: Clone;
    fn constant(&self, c: &BigRational) -> Self::Value;
    fn apply(&self, op: Op, a: &Self::Value, b: &Self::Value) -> Self::Value;
}

struct ExactArith;

impl Arith for ExactArith {
    type Value = BigRational;

    fn constant(&self, c: &BigRational) -> BigRational {
        c.clone()
    }

    fn apply(&self, op: Op, a: &BigRational, b: &BigRational) -> BigRational {
        match op {
            Op::Add => a + b,
            Op::Sub => a - b,
            Op::Mul => a * b,
            Op::Min => a.min(b).clone(),
            Op::Max => a.max(b).clone(),
        }
    }
}

struct FloatArith {
    prec: u64,
}

impl Arith for FloatArith {
    type Value = ExtFloat;

    fn constant(&self, c: &BigRational) -> ExtFloat {
        ExtFloat::from_rational(c, self.prec)
    }

    fn apply(&self, op: Op, a: &ExtFloat, b: &ExtFloat) -> ExtFloat {
        match op {
            Op::Add => a.add(b, self.prec),
            Op::Sub => a.sub(b, self.prec),
            Op::Mul => a.mul(b, self.prec),
            Op::Min => a.min(b).clone(),
            Op::Max => a.max(b).clone(),
        }
    }
}

/// Incremental circuit construction with constant sharing.
#[derive(Debug)]
pub struct CircuitBuilder {
    strategy_counts: Vec<usize>,
    offsets: Vec<usize>,
    has_eps: bool,
    gates: Vec<Gate>,
    outputs: Vec<Output>,
    constants: HashMap<BigRational, Ref>,
}

impl CircuitBuilder {
    pub fn new(strategy_counts: Vec<usize>, has_eps: bool) -> Self {
        let mut offsets = Vec::with_capacity(strategy_counts.len());
        let mut total = 0;
        for &m in &strategy_counts {
            offsets.push(total);
            total += m;
        }
        CircuitBuilder {
            strategy_counts,
            offsets,
            has_eps,
            gates: Vec::new(),
            outputs: Vec::new(),
            constants: HashMap::new(),
        }
    }

    pub fn input(&self, s: PureStrategy) -> Ref {
        assert!(s.strategy < self.strategy_counts[s.player], "input {s} out of range");
        Ref::Input(self.offsets[s.player] + s.strategy)
    }

    pub fn eps(&self) -> Ref {
        assert!(self.has_eps, "builder has no eps input");
        Ref::Eps
    }

    pub fn constant(&mut self, c: BigRational) -> Ref {
        if let Some(&r) = self.constants.get(&c) {
            return r;
        }
        self.gates.push(Gate::Const(c.clone()));
        let r = Ref::Gate(self.gates.len() - 1);
        self.constants.insert(c, r);
        r
    }

    pub fn op(&mut self, op: Op, lhs: Ref, rhs: Ref) -> Ref {
        self.gates.push(Gate::Binary { op, lhs, rhs });
        Ref::Gate(self.gates.len() - 1)
    }

    pub fn add(&mut self, a: Ref, b: Ref) -> Ref {
        self.op(Op::Add, a, b)
    }

    pub fn sub(&mut self, a: Ref, b: Ref) -> Ref {
        self.op(Op::Sub, a, b)
    }

    pub fn mul(&mut self, a: Ref, b: Ref) -> Ref {
        self.op(Op::Mul, a, b)
    }

    pub fn min(&mut self, a: Ref, b: Ref) -> Ref {
        self.op(Op::Min, a, b)
    }

    pub fn max(&mut self, a: Ref, b: Ref) -> Ref {
        self.op(Op::Max, a, b)
    }

    /// Balanced binary reduction; `None` for an empty slice.
    pub fn reduce_balanced(&mut self, op: Op, terms: &[Ref]) -> Option<Ref> {
        match terms.len() {
            0 => None,
            1 => Some(terms[0]),
            n => {
                let (left, right) = terms.split_at(n / 2);
                let l = self.reduce_balanced(op, left)?;
                let r = self.reduce_balanced(op, right)?;
                Some(self.op(op, l, r))
            }
        }
    }

    /// Balanced sum; the empty sum is the constant 0.
    pub fn sum(&mut self, terms: &[Ref]) -> Ref {
        match self.reduce_balanced(Op::Add, terms) {
            Some(r) => r,
            None => self.constant(BigRational::zero()),
        }
    }

    pub fn output(&mut self, key: PureStrategy, source: Ref) {
        self.outputs.push(Output { key, source });
    }

    pub fn gate_count(&self) -> usize {
        self.gates.len()
    }

    pub fn finish(self) -> Result<Circuit, CircuitError> {
        Circuit::new(self.strategy_counts, self.has_eps, self.gates, self.outputs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn key(i: usize, j: usize) -> PureStrategy {
        PureStrategy { player: i, strategy: j }
    }

    #[test]
    fn max_with_zero_constant() {
        let mut b = CircuitBuilder::new(vec![1], false);
        let zero = b.constant(q(0, 1));
        let x = b.input(key(0, 0));
        let m = b.max(x, zero);
        b.output(key(0, 0), m);
        let c = b.finish().unwrap();
        assert_eq!(c.eval_exact(&[q(-3, 7)], None).unwrap(), vec![q(0, 1)]);
    }

    #[test]
    fn eps_squared() {
        let mut b = CircuitBuilder::new(vec![], true);
        let e = b.eps();
        let sq = b.mul(e, e);
        b.output(key(0, 0), sq);
        let c = b.finish().unwrap();
        assert_eq!(c.eval_exact(&[], Some(&q(1, 4))).unwrap(), vec![q(1, 16)]);
        assert_eq!(c.eval_exact(&[], None).unwrap_err(), CircuitError::UnboundEps);
        assert_eq!(
            c.eval_exact(&[q(1, 1)], Some(&q(1, 4))).unwrap_err(),
            CircuitError::InputCount { expected: 0, got: 1 }
        );
    }

    #[test]
    fn trivial_circuit_is_two_lines() {
        let mut b = CircuitBuilder::new(vec![1], true);
        let x = b.input(key(0, 0));
        b.output(key(0, 0), x);
        let c = b.finish().unwrap();
        let text = c.to_text();
        assert_eq!(text, "inputs 1 eps\nout 1 1 x1_1\n");
        assert_eq!(text.parse::<Circuit>().unwrap(), c);
    }

    #[test]
    fn rejects_forward_and_dangling_references() {
        let forward = "inputs 2 eps\ng1 = add x1_1 g2\ng2 = const 1/1\nout 1 1 g1\n";
        assert!(matches!(
            forward.parse::<Circuit>(),
            Err(CircuitError::Parse { line: 2, .. })
        ));
        let self_ref = "inputs 2\ng1 = add g1 x1_1\nout 1 1 g1\n";
        assert!(matches!(
            self_ref.parse::<Circuit>(),
            Err(CircuitError::Parse { line: 2, .. })
        ));
        let bad_input = "inputs 2\ng1 = add x1_3 x1_1\n";
        assert!(matches!(
            bad_input.parse::<Circuit>(),
            Err(CircuitError::Parse { line: 2, .. })
        ));
        let no_eps = "inputs 2\ng1 = add eps x1_1\n";
        assert!(no_eps.parse::<Circuit>().is_err());
        let div = "inputs 2\ng1 = div x1_2 x1_1\n";
        assert!(matches!(
            div.parse::<Circuit>(),
            Err(CircuitError::Parse { line: 2, .. })
        ));
        let skipped = "inputs 2\ng2 = add x1_2 x1_1\n";
        assert!(skipped.parse::<Circuit>().is_err());
        let dup = "inputs 2\nout 1 1 x1_1\nout 1 1 x1_2\n";
        assert!(matches!(dup.parse::<Circuit>(), Err(CircuitError::DuplicateOutput(_))));
        // the constructor enforces the same invariant
        let gates = vec![Gate::Binary {
            op: Op::Add,
            lhs: Ref::Gate(0),
            rhs: Ref::Input(0),
        }];
        assert!(matches!(
            Circuit::new(vec![1], false, gates, vec![]),
            Err(CircuitError::BadReference { gate: 1, .. })
        ));
    }

    #[test]
    fn counts_and_depth() {
        let mut b = CircuitBuilder::new(vec![4], false);
        let xs: Vec<Ref> = (0..4).map(|j| b.input(key(0, j))).collect();
        let s = b.sum(&xs);
        let c1 = b.constant(q(1, 2));
        let c1_again = b.constant(q(1, 2));
        assert_eq!(c1, c1_again);
        let p = b.mul(s, c1);
        b.output(key(0, 0), p);
        let c = b.finish().unwrap();
        assert_eq!(c.gate_count(), 5);
        assert_eq!(c.count_op(Op::Add), 3);
        // balanced sum of 4 has depth 2, then one multiplication
        assert_eq!(c.depth(), 3);
    }

    #[test]
    fn bind_eps_prepends_constant_circuit() {
        let mut b = CircuitBuilder::new(vec![2], true);
        let x = b.input(key(0, 1));
        let e = b.eps();
        let m = b.max(x, e);
        b.output(key(0, 1), m);
        let open = b.finish().unwrap();

        let mut k = CircuitBuilder::new(vec![], false);
        let base = k.constant(q(1, 4));
        let sq = k.mul(base, base);
        k.output(key(0, 0), sq);
        let konst = k.finish().unwrap();

        let closed = open.bind_eps(&konst).unwrap();
        assert!(!closed.has_eps());
        assert_eq!(closed.gate_count(), 3);
        assert_eq!(closed.eval_exact(&[q(1, 1), q(0, 1)], None).unwrap(), vec![q(1, 16)]);
        let text = closed.to_text();
        assert_eq!(text.parse::<Circuit>().unwrap(), closed);
        assert!(open.bind_eps(&open).is_err());
    }

    #[test]
    fn float_matches_exact_without_rounding() {
        let mut b = CircuitBuilder::new(vec![2], true);
        let x1 = b.input(key(0, 0));
        let x2 = b.input(key(0, 1));
        let e = b.eps();
        let s = b.sub(x1, x2);
        let p = b.mul(s, e);
        let c = b.constant(q(3, 8));
        let m = b.min(p, c);
        b.output(key(0, 0), m);
        let circuit = b.finish().unwrap();
        let xs = [q(5, 4), q(-3, 16)];
        let eps = q(1, 8);
        let exact = circuit.eval_exact(&xs, Some(&eps)).unwrap();
        let fx: Vec<ExtFloat> = xs.iter().map(|v| ExtFloat::from_rational_exact(v).unwrap()).collect();
        let float = circuit
            .eval_float(&fx, Some(&ExtFloat::from_rational_exact(&eps).unwrap()), 64)
            .unwrap();
        assert_eq!(float[0].to_rational().unwrap(), exact[0]);
    }

    #[derive(Debug, Clone)]
    struct RandomCircuit {
        inputs: usize,
        gates: Vec<(Op, usize, usize)>,
        constants: Vec<BigRational>,
    }

    impl RandomCircuit {
        /// Operand index space: inputs, then constants, then gates.
        fn build(&self) -> Circuit {
            let mut b = CircuitBuilder::new(vec![self.inputs], false);
            let mut refs: Vec<Ref> = (0..self.inputs).map(|j| b.input(key(0, j))).collect();
            for c in &self.constants {
                let r = b.constant(c.clone());
                refs.push(r);
            }
            for &(op, l, r) in &self.gates {
                let (l, r) = (refs[l % refs.len()], refs[r % refs.len()]);
                let g = b.op(op, l, r);
                refs.push(g);
            }
            b.output(key(0, 0), *refs.last().unwrap());
            b.finish().unwrap()
        }
    }

    fn random_circuit(ops: Vec<Op>) -> impl Strategy<Value = RandomCircuit> {
        (
            1usize..4,
            prop::collection::vec((prop::sample::select(ops), 0usize..64, 0usize..64), 1..24),
            prop::collection::vec((1i64..50, 1i64..50), 0..3),
        )
            .prop_map(|(inputs, gates, consts)| RandomCircuit {
                inputs,
                gates,
                constants: consts.into_iter().map(|(n, d)| q(n, d)).collect(),
            })
    }

    fn reference(op: Op, a: &BigRational, b: &BigRational) -> BigRational {
        match op {
            Op::Add => a + b,
            Op::Sub => a - b,
            Op::Mul => a * b,
            Op::Min => {
                if a <= b {
                    a.clone()
                } else {
                    b.clone()
                }
            }
            Op::Max => {
                if a >= b {
                    a.clone()
                } else {
                    b.clone()
                }
            }
        }
    }

    proptest! {
        #[test]
        fn single_gate_semantics(a in (-99i64..99, 1i64..99), b in (-99i64..99, 1i64..99), op in prop::sample::select(Op::ALL.to_vec())) {
            let (a, b) = (q(a.0, a.1), q(b.0, b.1));
            let mut builder = CircuitBuilder::new(vec![2], false);
            let (x, y) = (builder.input(key(0, 0)), builder.input(key(0, 1)));
            let g = builder.op(op, x, y);
            builder.output(key(0, 0), g);
            let c = builder.finish().unwrap();
            prop_assert_eq!(c.eval_exact(&[a.clone(), b.clone()], None).unwrap()[0].clone(), reference(op, &a, &b));
        }

        #[test]
        fn text_round_trip_preserves_evaluation(rc in random_circuit(vec![Op::Add, Op::Sub, Op::Min, Op::Max, Op::Mul]), seed in any::<u64>()) {
            let c = rc.build();
            let text = c.to_text();
            let back: Circuit = text.parse().unwrap();
            prop_assert_eq!(&back, &c);
            prop_assert_eq!(back.to_text(), text);
            let mut s = seed;
            for _ in 0..4 {
                let xs: Vec<BigRational> = (0..rc.inputs).map(|_| {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    q(((s >> 33) % 19) as i64 - 9, ((s >> 13) % 7 + 1) as i64)
                }).collect();
                prop_assert_eq!(back.eval_exact(&xs, None).unwrap(), c.eval_exact(&xs, None).unwrap());
            }
        }

        #[test]
        fn float_error_grows_at_most_linearly(rc in random_circuit(vec![Op::Add, Op::Min, Op::Max, Op::Mul]), xs in prop::collection::vec((1i64..1000, 1i64..1000), 3)) {
            // positive inputs and no subtraction: no cancellation, so the
            // relative error of P-bit evaluation is at most gates * 2^(1-P)
            // against the 256-bit run
            let c = rc.build();
            let xs: Vec<ExtFloat> = xs.iter().take(rc.inputs).map(|&(n, d)| ExtFloat::from_rational(&q(n, d), 128)).collect();
            let lo = c.eval_float(&xs, None, 128).unwrap().remove(0);
            let hi = c.eval_float(&xs, None, 256).unwrap().remove(0);
            // |lo - hi| * 2^127 <= gates * |hi|, evaluated exactly
            let scaled_diff = lo.checked_sub_exact(&hi).unwrap().abs().mul_exact(&ExtFloat::pow2(127));
            let allowance = hi.abs().mul_exact(&ExtFloat::from_i64(c.gate_count() as i64));
            prop_assert!(scaled_diff <= allowance, "{:?} vs {:?}", lo, hi);
        }
    }
}
