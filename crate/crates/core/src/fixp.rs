//! FIXP instances: a polytope of linear constraints, a closed circuit
//! mapping it to itself, and the identity output map.
//!
//! ```text
//! fixp 4
//! polytope 6
//! -1 0 0 0 <= 0
//! ...
//! 1 1 0 0 == 1
//! map identity
//! circuit
//! inputs 2 2
//! g1 = const 1/4
//! ...
//! ```

use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::circuit::{Circuit, CircuitError};
use crate::numfmt::{format_rational, parse_rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FixpError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("circuit section: {0}")]
    Circuit(#[from] CircuitError),
    #[error("circuit has {circuit} inputs but the polytope has dimension {dimension}")]
    Dimension { circuit: usize, dimension: usize },
    #[error("the circuit still has a free eps input")]
    OpenCircuit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "==",
        }
    }
}

/// `coeffs · x (<= | ==) rhs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearConstraint {
    pub coeffs: Vec<BigRational>,
    pub relation: Relation,
    pub rhs: BigRational,
}

impl LinearConstraint {
    pub fn holds(&self, x: &[BigRational]) -> bool {
        let lhs: BigRational = self.coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
        match self.relation {
            Relation::Le => lhs <= self.rhs,
            Relation::Eq => lhs == self.rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixpInstance {
    dimension: usize,
    constraints: Vec<LinearConstraint>,
    circuit: Circuit,
}

impl FixpInstance {
    pub fn new(dimension: usize, constraints: Vec<LinearConstraint>, circuit: Circuit) -> Result<Self, FixpError> {
        if circuit.has_eps() {
            return Err(FixpError::OpenCircuit);
        }
        if circuit.num_inputs() != dimension {
            return Err(FixpError::Dimension {
                circuit: circuit.num_inputs(),
                dimension,
            });
        }
        Ok(FixpInstance {
            dimension,
            constraints,
            circuit,
        })
    }

    /// The product of simplices: `x_{i,j} ≥ 0` for every coordinate, then
    /// one block-sum equality per player.
    pub fn for_profiles(strategy_counts: &[usize], circuit: Circuit) -> Self {
        let dimension: usize = strategy_counts.iter().sum();
        let mut constraints = Vec::new();
        for k in 0..dimension {
            let mut coeffs = vec![BigRational::zero(); dimension];
            coeffs[k] = -BigRational::one();
            constraints.push(LinearConstraint {
                coeffs,
                relation: Relation::Le,
                rhs: BigRational::zero(),
            });
        }
        let mut offset = 0;
        for &m in strategy_counts {
            let mut coeffs = vec![BigRational::zero(); dimension];
            for c in &mut coeffs[offset..offset + m] {
                *c = BigRational::one();
            }
            constraints.push(LinearConstraint {
                coeffs,
                relation: Relation::Eq,
                rhs: BigRational::one(),
            });
            offset += m;
        }
        FixpInstance::new(dimension, constraints, circuit).expect("closed circuit over the profile coordinates")
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn contains(&self, x: &[BigRational]) -> bool {
        x.len() == self.dimension && self.constraints.iter().all(|c| c.holds(x))
    }

    /// Applies the closed circuit; the output map is the identity.
    pub fn apply(&self, x: &[BigRational]) -> Result<Vec<BigRational>, CircuitError> {
        self.circuit.eval_exact(x, None)
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for FixpInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "fixp {}", self.dimension)?;
        writeln!(f, "polytope {}", self.constraints.len())?;
        for c in &self.constraints {
            for a in &c.coeffs {
                write!(f, "{} ", format_rational(a))?;
            }
            writeln!(f, "{} {}", c.relation.symbol(), format_rational(&c.rhs))?;
        }
        writeln!(f, "map identity")?;
        writeln!(f, "circuit")?;
        write!(f, "{}", self.circuit)
    }
}

impl FromStr for FixpInstance {
    type Err = FixpError;

    fn from_str(text: &str) -> Result<Self, FixpError> {
        let err = |line: usize, message: String| FixpError::Parse { line, message };
        let all: Vec<&str> = text.lines().collect();
        let mut idx = 0;
        let mut next = |what: &str| -> Result<(usize, &str), FixpError> {
            while idx < all.len() {
                let line = all[idx].trim();
                idx += 1;
                if !line.is_empty() && !line.starts_with('#') {
                    return Ok((idx, line));
                }
            }
            Err(err(
                all.len().max(1),
                format!("unexpected end of input, expected {what}"),
            ))
        };

        let header_count = |line: usize, content: &str, keyword: &str| -> Result<usize, FixpError> {
            match content.split_whitespace().collect::<Vec<_>>().as_slice() {
                [k, v] if *k == keyword => v
                    .parse()
                    .map_err(|_| err(line, format!("invalid count `{v}` after `{keyword}`"))),
                _ => Err(err(line, format!("expected `{keyword} <count>`"))),
            }
        };

        let (line, content) = next("`fixp` header")?;
        let dimension = header_count(line, content, "fixp")?;
        let (line, content) = next("`polytope` header")?;
        let count = header_count(line, content, "polytope")?;
        let mut constraints = Vec::with_capacity(count);
        for _ in 0..count {
            let (line, content) = next("a constraint")?;
            let tokens: Vec<&str> = content.split_whitespace().collect();
            if tokens.len() != dimension + 2 {
                return Err(err(
                    line,
                    format!("expected {dimension} coefficients, a relation and a right-hand side"),
                ));
            }
            let num = |t: &str| parse_rational(t).ok_or_else(|| err(line, format!("invalid number `{t}`")));
            let coeffs = tokens[..dimension]
                .iter()
                .map(|t| num(t))
                .collect::<Result<Vec<_>, _>>()?;
            let relation = match tokens[dimension] {
                "<=" => Relation::Le,
                "==" => Relation::Eq,
                other => return Err(err(line, format!("unknown relation `{other}`"))),
            };
            let rhs = num(tokens[dimension + 1])?;
            constraints.push(LinearConstraint { coeffs, relation, rhs });
        }
        let (line, content) = next("`map identity`")?;
        if content.split_whitespace().collect::<Vec<_>>() != ["map", "identity"] {
            return Err(err(line, "only the identity output map is supported".into()));
        }
        let (line, content) = next("`circuit`")?;
        if content != "circuit" {
            return Err(err(line, "expected `circuit`".into()));
        }
        let circuit_start = line;
        let rest = all[circuit_start..].join("\n");
        let circuit: Circuit = rest.parse().map_err(|e| match e {
            CircuitError::Parse { line, message } => err(line + circuit_start, message),
            other => FixpError::Circuit(other),
        })?;
        FixpInstance::new(dimension, constraints, circuit)
    }
}
