//! Hybrid arcs: sampled solutions on a hybrid time domain.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{DomainSegment, HybridTime, HybridTimeDomain};
use crate::scalar::{format_round_trip, Scalar};
use crate::state::StateVector;
use crate::system::SystemSpec;

/// One stored node: time, state and flow derivative at that state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct ArcSample<S> {
    pub t: S,
    pub x: StateVector<S>,
    pub dx: StateVector<S>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct FlowSegment<S> {
    pub j: usize,
    pub samples: Vec<ArcSample<S>>,
}

impl<S: Scalar> FlowSegment<S> {
    pub fn first(&self) -> &ArcSample<S> {
        &self.samples[0]
    }

    pub fn last(&self) -> &ArcSample<S> {
        &self.samples[self.samples.len() - 1]
    }
}

/// The jump from `(t_jump, j)` to `(t_jump, j + 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct JumpRecord<S> {
    pub t_jump: S,
    pub j: usize,
    pub x_minus: StateVector<S>,
    pub x_plus: StateVector<S>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    Horizon,
    LeftFlowSet,
    JumpCap,
    SolverFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArcFlags {
    pub t_complete_up_to_horizon: bool,
    pub terminated_reason: TerminationReason,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArcError {
    #[error("({t}, {j}) is outside the arc's domain; nearest valid hybrid time is ({nearest_t}, {nearest_j})")]
    OutOfDomain {
        t: f64,
        j: usize,
        nearest_t: f64,
        nearest_j: usize,
    },
    #[error("arc has no samples")]
    Empty,
    #[error("malformed arc: {0}")]
    Malformed(String),
    #[error("arc JSON: {0}")]
    Json(String),
}

/// A point of the graph of an arc, produced by dense sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcPoint<S> {
    pub t: S,
    pub j: usize,
    pub x: Vec<S>,
}

/// A solution `φ` sampled on its hybrid time domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct HybridArc<S> {
    pub domain: HybridTimeDomain<S>,
    pub segments: Vec<FlowSegment<S>>,
    pub jumps: Vec<JumpRecord<S>>,
    pub flags: ArcFlags,
}

/// Cubic Hermite interpolation between two nodes.
pub fn hermite<S: Scalar>(a: &ArcSample<S>, b: &ArcSample<S>, t: S) -> Vec<S> {
    let h = b.t - a.t;
    if h <= S::zero() {
        return a.x.to_vec();
    }
    let s = (t - a.t) / h;
    let one = S::one();
    let two = S::lit(2.0);
    let three = S::lit(3.0);
    let h00 = (one + two * s) * (one - s) * (one - s);
    let h10 = s * (one - s) * (one - s);
    let h01 = s * s * (three - two * s);
    let h11 = s * s * (s - one);
    (0..a.x.dim())
        .map(|i| h00 * a.x[i] + h10 * h * a.dx[i] + h01 * b.x[i] + h11 * h * b.dx[i])
        .collect()
}

impl<S: Scalar> HybridArc<S> {
    /// Assembles an arc and derives its domain from the segments.
    pub fn from_parts(
        segments: Vec<FlowSegment<S>>,
        jumps: Vec<JumpRecord<S>>,
        flags: ArcFlags,
    ) -> Result<Self, ArcError> {
        if segments.is_empty() || segments.iter().any(|s| s.samples.is_empty()) {
            return Err(ArcError::Empty);
        }
        let domain = HybridTimeDomain::new(
            segments
                .iter()
                .map(|s| DomainSegment::new(s.j, s.first().t, s.last().t))
                .collect(),
        );
        let arc = Self {
            domain,
            segments,
            jumps,
            flags,
        };
        arc.check_structure()?;
        Ok(arc)
    }

    /// Structural invariants that do not need the system.
    pub fn check_structure(&self) -> Result<(), ArcError> {
        let bad = |m: String| Err(ArcError::Malformed(m));
        if self.segments.is_empty() {
            return Err(ArcError::Empty);
        }
        if let Err(v) = crate::domain::validate_domain(&self.domain) {
            return bad(v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; "));
        }
        if self.domain.segments.len() != self.segments.len() {
            return bad("domain and segment counts differ".into());
        }
        if self.jumps.len() + 1 != self.segments.len() {
            return bad(format!(
                "{} segments need {} jump records, found {}",
                self.segments.len(),
                self.segments.len() - 1,
                self.jumps.len()
            ));
        }
        for (seg, dom) in self.segments.iter().zip(&self.domain.segments) {
            if seg.samples.is_empty() {
                return Err(ArcError::Empty);
            }
            if seg.j != dom.j || seg.first().t != dom.t_start || seg.last().t != dom.t_end {
                return bad(format!("segment {} disagrees with the domain", seg.j));
            }
            if seg.samples.windows(2).any(|w| w[1].t <= w[0].t) {
                return bad(format!("segment {} sample times not strictly increasing", seg.j));
            }
        }
        for (k, jump) in self.jumps.iter().enumerate() {
            let before = &self.segments[k];
            let after = &self.segments[k + 1];
            if jump.j != k || jump.t_jump != before.last().t || jump.t_jump != after.first().t {
                return bad(format!("jump record {k} does not match segment boundaries"));
            }
            if jump.x_minus != before.last().x || jump.x_plus != after.first().x {
                return bad(format!("jump record {k} states do not match segment end points"));
            }
        }
        Ok(())
    }

    /// Structural invariants plus `x⁺ = G(x⁻)` and `x⁻ ∈ D` within `event_tol`.
    pub fn check_against(&self, system: &SystemSpec<S>, event_tol: S) -> Result<(), ArcError> {
        self.check_structure()?;
        for jump in &self.jumps {
            if system.jump(&jump.x_minus) != jump.x_plus.as_slice() {
                return Err(ArcError::Malformed(format!(
                    "jump {} post-state is not G(pre-state)",
                    jump.j
                )));
            }
            if system.jump_event(&jump.x_minus).abs() > event_tol || !system.jump_predicate(&jump.x_minus) {
                return Err(ArcError::Malformed(format!(
                    "jump {} pre-state is not in the jump set",
                    jump.j
                )));
            }
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.segments[0].first().x.dim()
    }

    pub fn initial_state(&self) -> &StateVector<S> {
        &self.segments[0].first().x
    }

    pub fn final_state(&self) -> &StateVector<S> {
        &self.segments[self.segments.len() - 1].last().x
    }

    pub fn final_time(&self) -> S {
        self.segments[self.segments.len() - 1].last().t
    }

    pub fn jump_count(&self) -> usize {
        self.jumps.len()
    }

    pub fn jump_times(&self) -> Vec<S> {
        self.jumps.iter().map(|j| j.t_jump).collect()
    }

    pub fn sample_count(&self) -> usize {
        self.segments.iter().map(|s| s.samples.len()).sum()
    }

    pub fn samples(&self) -> impl Iterator<Item = (usize, &ArcSample<S>)> {
        self.segments
            .iter()
            .flat_map(|seg| seg.samples.iter().map(move |s| (seg.j, s)))
    }

    /// Largest state norm over all stored samples, with the hybrid time attaining it.
    pub fn max_norm(&self) -> (S, HybridTime<S>) {
        let mut best = (S::zero(), HybridTime::new(S::zero(), 0));
        for (j, s) in self.samples() {
            let n = s.x.norm();
            if n > best.0 {
                best = (n, HybridTime::new(s.t, j));
            }
        }
        best
    }

    fn nearest_valid(&self, t: S, j: usize) -> HybridTime<S> {
        let seg = self.domain.segments.get(j).unwrap_or_else(|| {
            self.domain
                .segments
                .last()
                .expect("arc has at least one segment")
        });
        HybridTime::new(t.max(seg.t_start).min(seg.t_end), seg.j)
    }

    /// `φ(t, j)`: the stored node when `t` is one, else Hermite interpolation
    /// between the bracketing nodes of segment `j`.
    pub fn state_at(&self, t: S, j: usize) -> Result<StateVector<S>, ArcError> {
        let out_of_domain = || {
            let near = self.nearest_valid(t, j);
            ArcError::OutOfDomain {
                t: t.as_f64(),
                j,
                nearest_t: near.t.as_f64(),
                nearest_j: near.j,
            }
        };
        let seg = self.segments.get(j).ok_or_else(out_of_domain)?;
        let samples = &seg.samples;
        if !(t >= seg.first().t && t <= seg.last().t) {
            return Err(out_of_domain());
        }
        let idx = samples.partition_point(|s| s.t < t);
        if idx < samples.len() && samples[idx].t == t {
            return Ok(samples[idx].x.clone());
        }
        Ok(StateVector::new(hermite(&samples[idx - 1], &samples[idx], t)))
    }

    /// All `(j, φ(t, j))` with `(t, j)` in the domain; two or more entries at jump instants.
    pub fn slice_at_time(&self, t: S) -> Vec<(usize, StateVector<S>)> {
        self.domain
            .indices_at(t)
            .map(|j| (j, self.state_at(t, j).expect("index taken from the domain")))
            .collect()
    }

    /// Samples the graph on the global grid `{k·step}` plus every segment end
    /// point, ordered by `(t, j)`.
    pub fn dense_points(&self, step: S) -> Vec<ArcPoint<S>> {
        assert!(step > S::zero(), "grid step must be positive");
        let mut out = Vec::new();
        for seg in &self.segments {
            let (a, b) = (seg.first().t, seg.last().t);
            out.push(ArcPoint {
                t: a,
                j: seg.j,
                x: seg.first().x.to_vec(),
            });
            let mut k = (a / step).floor().to_usize().unwrap_or(0);
            let mut idx = 1;
            loop {
                let tk = S::from_usize(k) * step;
                k += 1;
                if tk <= a {
                    continue;
                }
                if tk >= b {
                    break;
                }
                while seg.samples[idx].t < tk {
                    idx += 1;
                }
                let x = if seg.samples[idx].t == tk {
                    seg.samples[idx].x.to_vec()
                } else {
                    hermite(&seg.samples[idx - 1], &seg.samples[idx], tk)
                };
                out.push(ArcPoint { t: tk, j: seg.j, x });
            }
            if b > a {
                out.push(ArcPoint {
                    t: b,
                    j: seg.j,
                    x: seg.last().x.to_vec(),
                });
            }
        }
        out
    }

    /// CSV with header `t,j,x0,...`; jump instants appear as two rows with equal `t`.
    pub fn to_csv(&self) -> String {
        let n = self.dimension();
        let mut out = String::from("t,j");
        for i in 0..n {
            let _ = write!(out, ",x{i}");
        }
        out.push('\n');
        for (j, s) in self.samples() {
            let _ = write!(out, "{},{}", format_round_trip(s.t), j);
            for v in s.x.iter() {
                let _ = write!(out, ",{}", format_round_trip(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("arc serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ArcError> {
        let arc: Self = serde_json::from_str(text).map_err(|e| ArcError::Json(e.to_string()))?;
        arc.check_structure()?;
        Ok(arc)
    }
}

/// Free-function form of [`HybridArc::state_at`].
pub fn arc_state_at<S: Scalar>(arc: &HybridArc<S>, t: S, j: usize) -> Result<StateVector<S>, ArcError> {
    arc.state_at(t, j)
}

/// Free-function form of [`HybridArc::slice_at_time`].
pub fn arc_slice_at_time<S: Scalar>(arc: &HybridArc<S>, t: S) -> Vec<(usize, StateVector<S>)> {
    arc.slice_at_time(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(t: f64, x: f64, dx: f64) -> ArcSample<f64> {
        ArcSample {
            t,
            x: StateVector::new(vec![x]),
            dx: StateVector::new(vec![dx]),
        }
    }

    fn drift_arc() -> HybridArc<f64> {
        let seg = FlowSegment {
            j: 0,
            samples: vec![sample(0.0, 0.0, 1.0), sample(0.25, 0.25, 1.0), sample(1.0, 1.0, 1.0)],
        };
        HybridArc::from_parts(
            vec![seg],
            vec![],
            ArcFlags {
                t_complete_up_to_horizon: true,
                terminated_reason: TerminationReason::Horizon,
            },
        )
        .unwrap()
    }

    fn jumping_arc() -> HybridArc<f64> {
        let s0 = FlowSegment {
            j: 0,
            samples: vec![sample(0.0, 1.0, -1.0), sample(1.0, 0.0, -1.0)],
        };
        let s1 = FlowSegment {
            j: 1,
            samples: vec![sample(1.0, 0.5, -1.0), sample(1.5, 0.0, -1.0)],
        };
        let jump = JumpRecord {
            t_jump: 1.0,
            j: 0,
            x_minus: StateVector::new(vec![0.0]),
            x_plus: StateVector::new(vec![0.5]),
        };
        HybridArc::from_parts(
            vec![s0, s1],
            vec![jump],
            ArcFlags {
                t_complete_up_to_horizon: true,
                terminated_reason: TerminationReason::Horizon,
            },
        )
        .unwrap()
    }

    #[test]
    fn stored_nodes_are_returned_exactly() {
        let arc = drift_arc();
        assert_eq!(arc.state_at(0.25, 0).unwrap()[0].to_bits(), 0.25_f64.to_bits());
    }

    #[test]
    fn interpolates_a_line() {
        let arc = drift_arc();
        assert!((arc.state_at(0.5, 0).unwrap()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn out_of_domain_query_names_nearest_time() {
        let err = drift_arc().state_at(5.0, 0).unwrap_err();
        assert_eq!(
            err,
            ArcError::OutOfDomain {
                t: 5.0,
                j: 0,
                nearest_t: 1.0,
                nearest_j: 0
            }
        );
        assert!(matches!(drift_arc().state_at(0.5, 3), Err(ArcError::OutOfDomain { nearest_j: 0, .. })));
    }

    #[test]
    fn slice_at_jump_has_both_sides() {
        let arc = jumping_arc();
        let slice = arc.slice_at_time(1.0);
        assert_eq!(slice.len(), 2);
        assert_eq!(slice[0], (0, StateVector::new(vec![0.0])));
        assert_eq!(slice[1], (1, StateVector::new(vec![0.5])));
        assert_eq!(arc.slice_at_time(0.5).len(), 1);
        assert!(arc.slice_at_time(2.0).is_empty());
    }

    #[test]
    fn dense_points_cover_jump_instants() {
        let arc = jumping_arc();
        let pts = arc.dense_points(0.3);
        let times: Vec<(f64, usize)> = pts.iter().map(|p| (p.t, p.j)).collect();
        assert_eq!(times.first(), Some(&(0.0, 0)));
        assert!(times.contains(&(1.0, 0)) && times.contains(&(1.0, 1)));
        assert_eq!(times.last(), Some(&(1.5, 1)));
        assert!(times.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn csv_repeats_jump_instant() {
        let csv = jumping_arc().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,j,x0");
        assert_eq!(lines.len(), 5);
        assert!(lines[2].starts_with("1.0000000000000000e0,0"));
        assert!(lines[3].starts_with("1.0000000000000000e0,1"));
    }

    #[test]
    fn json_round_trip_and_keys() {
        let arc = jumping_arc();
        let text = arc.to_json();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in ["domain", "segments", "jumps", "flags"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(HybridArc::from_json(&text).unwrap(), arc);
    }

    #[test]
    fn broken_jump_record_is_rejected() {
        let mut arc = jumping_arc();
        arc.jumps[0].x_plus = StateVector::new(vec![0.4]);
        assert!(matches!(arc.check_structure(), Err(ArcError::Malformed(_))));
    }
}
