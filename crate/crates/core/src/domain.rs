//! Hybrid time and hybrid time domains.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// A hybrid time `(t, j)`: continuous time and jump counter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct HybridTime<S> {
    pub t: S,
    pub j: usize,
}

impl<S: Scalar> HybridTime<S> {
    pub fn new(t: S, j: usize) -> Self {
        Self { t, j }
    }
}

/// The interval `[t_start, t_end] × {j}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct DomainSegment<S> {
    pub j: usize,
    pub t_start: S,
    pub t_end: S,
}

impl<S: Scalar> DomainSegment<S> {
    pub fn new(j: usize, t_start: S, t_end: S) -> Self {
        Self { j, t_start, t_end }
    }

    pub fn len(&self) -> S {
        self.t_end - self.t_start
    }

    pub fn is_degenerate(&self) -> bool {
        self.t_end == self.t_start
    }

    pub fn contains(&self, t: S) -> bool {
        self.t_start <= t && t <= self.t_end
    }
}

/// A compact hybrid time domain `⋃_j [t_j, t_{j+1}] × {j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct HybridTimeDomain<S> {
    pub segments: Vec<DomainSegment<S>>,
}

impl<S: Scalar> HybridTimeDomain<S> {
    pub fn new(segments: Vec<DomainSegment<S>>) -> Self {
        Self { segments }
    }

    /// Builds a domain from `(j, t_start, t_end)` triples.
    pub fn from_triples(triples: &[(usize, f64, f64)]) -> Self {
        Self::new(
            triples
                .iter()
                .map(|&(j, a, b)| DomainSegment::new(j, S::lit(a), S::lit(b)))
                .collect(),
        )
    }

    pub fn jump_count(&self) -> usize {
        self.segments.len().saturating_sub(1)
    }

    pub fn t_max(&self) -> Option<S> {
        self.segments.last().map(|s| s.t_end)
    }

    pub fn contains(&self, time: HybridTime<S>) -> bool {
        self.segments
            .get(time.j)
            .is_some_and(|seg| seg.contains(time.t))
    }

    /// Jump counters `j` with `(t, j)` in the domain.
    pub fn indices_at(&self, t: S) -> impl Iterator<Item = usize> + '_ {
        self.segments
            .iter()
            .filter(move |s| s.contains(t))
            .map(|s| s.j)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DomainViolation {
    Empty,
    /// Segment at position `index` carries jump counter `found`.
    WrongIndex { index: usize, found: usize },
    /// First segment starts at `found` rather than zero.
    NonZeroStart { found: f64 },
    /// Segment `index` does not start where segment `index - 1` ended.
    Discontinuous { index: usize, expected: f64, found: f64 },
    /// Segment `index` ends before it starts.
    Reversed { index: usize, t_start: f64, t_end: f64 },
    NonFinite { index: usize },
}

impl fmt::Display for DomainViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Empty => write!(f, "domain has no segments"),
            Self::WrongIndex { index, found } => {
                write!(f, "segment {index} carries jump index {found}, expected {index}")
            }
            Self::NonZeroStart { found } => write!(f, "segment 0 must start at 0, starts at {found}"),
            Self::Discontinuous {
                index, expected, ..
            } => write!(f, "segment {index} must start at {expected}"),
            Self::Reversed {
                index,
                t_start,
                t_end,
            } => write!(f, "segment {index} ends at {t_end} before its start {t_start}"),
            Self::NonFinite { index } => write!(f, "segment {index} has non-finite bounds"),
        }
    }
}

/// Checks the hybrid time domain structure. Never fails; malformed input
/// yields a list of violations.
pub fn validate_domain<S: Scalar>(domain: &HybridTimeDomain<S>) -> Result<(), Vec<DomainViolation>> {
    let mut violations = Vec::new();
    if domain.segments.is_empty() {
        return Err(vec![DomainViolation::Empty]);
    }
    for (index, seg) in domain.segments.iter().enumerate() {
        if seg.j != index {
            violations.push(DomainViolation::WrongIndex { index, found: seg.j });
        }
        if !seg.t_start.is_finite() || !seg.t_end.is_finite() {
            violations.push(DomainViolation::NonFinite { index });
            continue;
        }
        if seg.t_end < seg.t_start {
            violations.push(DomainViolation::Reversed {
                index,
                t_start: seg.t_start.as_f64(),
                t_end: seg.t_end.as_f64(),
            });
        }
        if index == 0 {
            if seg.t_start != S::zero() {
                violations.push(DomainViolation::NonZeroStart {
                    found: seg.t_start.as_f64(),
                });
            }
        } else {
            let prev = &domain.segments[index - 1];
            if prev.t_end != seg.t_start {
                violations.push(DomainViolation::Discontinuous {
                    index,
                    expected: prev.t_end.as_f64(),
                    found: seg.t_start.as_f64(),
                });
            }
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}
