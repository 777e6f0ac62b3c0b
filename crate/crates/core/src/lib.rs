//! Compile finite normal-form games into division-free `{+, −, *, min, max}`
//! circuits whose fixed points are ε-perfect equilibria, and approximate
//! trembling-hand perfect equilibria with a shrinking-ε fixed-point search.
//!
//! ```
//! use tremble::compiler::{compile_f_eps, reference_f_eps};
//! use tremble::game::{fixtures, ratio, MixedProfile};
//!
//! let g = fixtures::weak_domination();
//! let x = MixedProfile::from_ratios(&[vec![(7, 8), (1, 8)], vec![(7, 8), (1, 8)]]).unwrap();
//! let eps = ratio(1, 8);
//! assert_eq!(reference_f_eps(&g, &x, &eps).unwrap(), x);
//! let c = compile_f_eps(&g);
//! assert_eq!(c.eval_exact(&x.flatten(), Some(&eps)).unwrap(), x.flatten());
//! ```

pub mod circuit;
pub mod compiler;
pub mod extfloat;
pub mod fixp;
pub mod game;
pub mod logic;
pub mod numfmt;
pub mod solver;
pub mod verifier;

pub use circuit::{Circuit, CircuitBuilder, CircuitError};
pub use extfloat::ExtFloat;
pub use fixp::FixpInstance;
pub use game::{Game, GameError, MixedProfile, PureStrategy};
