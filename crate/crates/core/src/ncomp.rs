//! N-COMP decoding: a user is declared active when the fraction of its
//! channel uses that read positive is at least `1 - q1 (1 + delta)`.

use crate::channel::{ActivityVector, SignatureMatrix, TestOutcomes};
use crate::error::{domain, Error, Result};
use crate::exec::Exec;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedActivity(pub Vec<bool>);

impl DecodedActivity {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn popcount(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }
}

/// Decision rule parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NcompRule {
    pub q1: f64,
    pub delta: f64,
}

impl NcompRule {
    pub fn new(q1: f64, delta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q1) {
            return Err(domain(format!("q1 must lie in [0, 1], got {q1}")));
        }
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(domain(format!("margin must be non-negative, got {delta}")));
        }
        let rule = NcompRule { q1, delta };
        if rule.is_degenerate() {
            log::warn!(
                "q1 (1 + delta) = {} exceeds 1; every tested user will be declared active",
                q1 * (1.0 + delta)
            );
        }
        Ok(rule)
    }

    /// `1 - q1 (1 + delta)`.
    pub fn threshold(&self) -> f64 {
        1.0 - self.q1 * (1.0 + self.delta)
    }

    /// The threshold is negative, so the rule accepts everyone.
    pub fn is_degenerate(&self) -> bool {
        self.q1 * (1.0 + self.delta) > 1.0
    }

    /// Decision for a user included in `tests` uses with `positives` of
    /// them positive. Users never tested are declared inactive.
    pub fn declares_active(&self, tests: u32, positives: u32) -> bool {
        tests > 0 && positives as f64 / tests as f64 >= self.threshold()
    }
}

/// `(N_j, S_j)` for one user: uses it appears in and how many read positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct UserCounts {
    pub tests: u32,
    pub positives: u32,
}

pub fn user_counts(sig: &SignatureMatrix, outcomes: &TestOutcomes, j: usize) -> UserCounts {
    let col = sig.column(j);
    UserCounts {
        tests: col.len() as u32,
        positives: col.iter().filter(|&&i| outcomes.0[i as usize]).count() as u32,
    }
}

fn check_outcomes(sig: &SignatureMatrix, outcomes: &TestOutcomes) -> Result<()> {
    if outcomes.len() != sig.n() {
        return Err(Error::Dimension {
            what: "test outcome length",
            expected: sig.n(),
            got: outcomes.len(),
        });
    }
    Ok(())
}

pub fn ncomp_decode(sig: &SignatureMatrix, outcomes: &TestOutcomes, q1: f64, delta: f64) -> Result<DecodedActivity> {
    ncomp_decode_with(Exec::Sequential, sig, outcomes, NcompRule::new(q1, delta)?)
}

/// Decode with per-user decisions spread over `exec`.
pub fn ncomp_decode_with(
    exec: Exec,
    sig: &SignatureMatrix,
    outcomes: &TestOutcomes,
    rule: NcompRule,
) -> Result<DecodedActivity> {
    check_outcomes(sig, outcomes)?;
    Ok(DecodedActivity(exec.map(sig.ell(), |j| {
        let c = user_counts(sig, outcomes, j);
        rule.declares_active(c.tests, c.positives)
    })))
}

/// Misdetections and false positives of one decoded round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ErrorTally {
    pub md_count: usize,
    pub fp_count: usize,
    pub md_any: bool,
    pub fp_any: bool,
}

pub fn count_errors(truth: &ActivityVector, decoded: &DecodedActivity) -> Result<ErrorTally> {
    if truth.len() != decoded.len() {
        return Err(Error::Dimension {
            what: "decoded activity length",
            expected: truth.len(),
            got: decoded.len(),
        });
    }
    let (mut md, mut fp) = (0, 0);
    for (&b, &bh) in truth.0.iter().zip(&decoded.0) {
        md += usize::from(b && !bh);
        fp += usize::from(!b && bh);
    }
    Ok(ErrorTally {
        md_count: md,
        fp_count: fp,
        md_any: md > 0,
        fp_any: fp > 0,
    })
}
