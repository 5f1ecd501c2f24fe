//! Sampling-based checks of the structural conditions under which
//! graphical stability follows from ρ_𝒜 stability, and empirical probes of
//! the jump-time mismatch bounds.

mod checks;
mod probe;
mod samplers;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::state::StateVector;

pub use checks::{
    check_all, check_boundedness, check_jump_structure, check_transversality, CheckOptions, Direction,
};
pub use probe::{lemma_probe, LemmaProbeTable, ProbeError, ProbeOptions, ProbeRow};
pub use samplers::{ChartSampler, ImageSampler, RejectionSampler, SurfaceSampler};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Unknown,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Unknown => "unknown",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Condition {
    /// `G(D) ∩ D = ∅`.
    #[serde(rename = "i_separation")]
    Separation,
    /// `G(D) ⊂ C`.
    #[serde(rename = "i_image_in_C")]
    ImageInC,
    /// `G` is proper.
    #[serde(rename = "i_properness")]
    Properness,
    /// The flow points out of `C` on `C ∩ D`.
    #[serde(rename = "ii_forward_transversality")]
    ForwardTransversality,
    /// The reversed flow points out of `C` on `C ∩ G(D)`.
    #[serde(rename = "iii_backward_transversality")]
    BackwardTransversality,
    /// `D` or the reference solution is bounded.
    #[serde(rename = "iv_boundedness")]
    Boundedness,
}

impl Condition {
    pub const ALL: [Condition; 6] = [
        Condition::Separation,
        Condition::ImageInC,
        Condition::Properness,
        Condition::ForwardTransversality,
        Condition::BackwardTransversality,
        Condition::Boundedness,
    ];

    pub fn key(&self) -> &'static str {
        match self {
            Condition::Separation => "i_separation",
            Condition::ImageInC => "i_image_in_C",
            Condition::Properness => "i_properness",
            Condition::ForwardTransversality => "ii_forward_transversality",
            Condition::BackwardTransversality => "iii_backward_transversality",
            Condition::Boundedness => "iv_boundedness",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct ConditionResult<S> {
    pub condition: Condition,
    pub verdict: Verdict,
    /// Worst signed margin over the samples; positive means satisfied.
    pub margin: Option<S>,
    pub counterexample: Option<StateVector<S>>,
    pub sample_count: usize,
    pub note: String,
}

impl<S: Scalar> ConditionResult<S> {
    fn unknown(condition: Condition, note: impl Into<String>) -> Self {
        Self {
            condition,
            verdict: Verdict::Unknown,
            margin: None,
            counterexample: None,
            sample_count: 0,
            note: note.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(bound = "S: Scalar")]
pub struct HypothesisReport<S> {
    pub results: Vec<ConditionResult<S>>,
}

impl<S: Scalar> HypothesisReport<S> {
    pub fn get(&self, condition: Condition) -> Option<&ConditionResult<S>> {
        self.results.iter().find(|r| r.condition == condition)
    }

    pub fn verdict(&self, condition: Condition) -> Verdict {
        self.get(condition).map_or(Verdict::Unknown, |r| r.verdict)
    }

    pub fn merge(mut self, other: HypothesisReport<S>) -> Self {
        for r in other.results {
            self.results.retain(|x| x.condition != r.condition);
            self.results.push(r);
        }
        self.results.sort_by_key(|r| Condition::ALL.iter().position(|c| *c == r.condition));
        self
    }

    pub fn all_pass(&self) -> bool {
        Condition::ALL.iter().all(|c| self.verdict(*c) == Verdict::Pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Fixed-width verdict table for terminals.
    pub fn to_table(&self) -> String {
        let mut out = format!("{:<30} {:<8} {:>14} {:>8}  {}\n", "condition", "verdict", "margin", "samples", "note");
        for r in &self.results {
            let margin = r.margin.map_or("-".to_string(), |m| format!("{:.6e}", m.as_f64()));
            out.push_str(&format!(
                "{:<30} {:<8} {:>14} {:>8}  {}\n",
                r.condition.key(),
                r.verdict,
                margin,
                r.sample_count,
                r.note
            ));
        }
        out
    }
}
