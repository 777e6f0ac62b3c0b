//! Certificate-level checks tying profiles back to the equilibrium
//! definitions.
//!
//! All checks run in exact rational arithmetic. Solver output is dyadic, so
//! it converts to rationals without loss before it gets here.

use std::fmt;

use num_rational::BigRational;
use num_traits::Signed;

use crate::game::{pure_response_payoffs, Game, GameError, MixedProfile, PureStrategy};
use crate::numfmt::{format_rational, format_scientific};

/// Evidence for one pure strategy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertificateEntry {
    pub strategy: PureStrategy,
    pub probability: BigRational,
    /// `max_l v(x)_{i,l} - v(x)_{i,j}`, never negative.
    pub gap: BigRational,
    pub exceeds_eps: bool,
}

/// Per-strategy best-response evidence that a profile is an ε-perfect
/// equilibrium, up to `slack`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpsPeCertificate {
    pub eps: BigRational,
    pub slack: BigRational,
    pub entries: Vec<CertificateEntry>,
    pub fully_mixed: bool,
}

impl EpsPeCertificate {
    pub(crate) fn from_parts(
        eps: BigRational,
        slack: BigRational,
        entries: Vec<CertificateEntry>,
        fully_mixed: bool,
    ) -> Self {
        EpsPeCertificate {
            eps,
            slack,
            entries,
            fully_mixed,
        }
    }

    /// Valid iff fully mixed and every entry above `eps` has gap within
    /// `slack`.
    pub fn is_valid(&self) -> bool {
        self.fully_mixed
            && self
                .entries
                .iter()
                .filter(|e| e.exceeds_eps)
                .all(|e| e.gap <= self.slack)
    }

    /// Entries that break the certificate.
    pub fn violations(&self) -> impl Iterator<Item = &CertificateEntry> {
        self.entries.iter().filter(|e| e.exceeds_eps && e.gap > self.slack)
    }
}

impl fmt::Display for EpsPeCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "# eps = {}  slack = {}",
            format_rational(&self.eps),
            format_rational(&self.slack)
        )?;
        writeln!(
            f,
            "{:<8} {:<10} {:<24} {:<14} exceeds_eps",
            "player", "strategy", "probability", "gap"
        )?;
        for e in &self.entries {
            writeln!(
                f,
                "{:<8} {:<10} {:<24} {:<14} {}",
                e.strategy.player + 1,
                e.strategy.strategy + 1,
                format_scientific(&e.probability, 12),
                format_scientific(&e.gap, 6),
                if e.exceeds_eps { "yes" } else { "no" }
            )?;
        }
        if !self.fully_mixed {
            writeln!(f, "# profile is not fully mixed")?;
        }
        write!(f, "verdict: {}", if self.is_valid() { "valid" } else { "invalid" })
    }
}

/// Builds the ε-PE certificate for `x` and returns it with its verdict.
pub fn check_certificate(
    g: &Game,
    x: &MixedProfile,
    eps: &BigRational,
    slack: &BigRational,
) -> Result<(EpsPeCertificate, bool), GameError> {
    if !eps.is_positive() {
        return Err(GameError::NonPositiveEps);
    }
    let v = pure_response_payoffs(g, x)?;
    let mut entries = Vec::new();
    for (player, payoffs) in v.iter().enumerate() {
        let best = payoffs.iter().max().expect("non-empty block");
        for (strategy, payoff) in payoffs.iter().enumerate() {
            let s = PureStrategy { player, strategy };
            let probability = x.get(s).clone();
            entries.push(CertificateEntry {
                strategy: s,
                exceeds_eps: &probability > eps,
                probability,
                gap: best - payoff,
            });
        }
    }
    let fully_mixed = entries.iter().all(|e| e.probability.is_positive());
    let cert = EpsPeCertificate::from_parts(eps.clone(), slack.clone(), entries, fully_mixed);
    let verdict = cert.is_valid();
    Ok((cert, verdict))
}

/// `‖x − y‖_∞ <= delta`.
pub fn check_delta_nearness(x: &MixedProfile, y: &MixedProfile, delta: &BigRational) -> Result<bool, GameError> {
    let d = x.linf_distance(y).ok_or_else(|| GameError::Shape {
        expected: x.strategy_counts(),
        got: y.strategy_counts(),
    })?;
    Ok(!delta.is_negative() && d <= *delta)
}

/// ℓ∞ distance between two profiles, zero for identical ones.
pub fn linf_distance(x: &MixedProfile, y: &MixedProfile) -> Result<BigRational, GameError> {
    x.linf_distance(y).ok_or_else(|| GameError::Shape {
        expected: x.strategy_counts(),
        got: y.strategy_counts(),
    })
}
