use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::checks::{check_transversality, CheckOptions, Direction};
use super::samplers::{ImageSampler, SurfaceSampler};
use super::{Condition, Verdict};
use crate::scalar::Scalar;
use crate::simulator::{flow_until_event, simulate_reversed, FlowStop, IntegratorConfig};
use crate::state::{norm, StateVector};
use crate::system::SystemSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar", default)]
pub struct ProbeOptions<S> {
    pub samples_per_eps: usize,
    pub seed: u64,
    /// Start time of every probe flow.
    pub t0: S,
    /// `horizon` is the longest flow duration explored per probe.
    pub config: IntegratorConfig<S>,
    pub check: CheckOptions<S>,
}

impl<S: Scalar> Default for ProbeOptions<S> {
    fn default() -> Self {
        Self {
            samples_per_eps: 200,
            seed: 0,
            t0: S::zero(),
            config: IntegratorConfig::default().with_horizon(S::lit(10.0)),
            check: CheckOptions {
                samples: 2_000,
                ..Default::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct ProbeRow<S> {
    pub eps_in: S,
    /// Longest flow time until the surface was reached; `None` when some
    /// probe never reached it within the horizon.
    pub max_mismatch_time: Option<S>,
    /// Probes that contributed.
    pub samples: usize,
    /// Probes that left `C` through a non-admissible crossing.
    pub excluded: usize,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct LemmaProbeTable<S> {
    pub direction: Direction,
    pub rows: Vec<ProbeRow<S>>,
}

impl<S: Scalar> LemmaProbeTable<S> {
    /// Every row finite and strictly smaller than the previous one.
    pub fn is_decreasing(&self) -> bool {
        self.rows.iter().all(|r| r.max_mismatch_time.is_some())
            && self
                .rows
                .windows(2)
                .all(|w| w[1].max_mismatch_time < w[0].max_mismatch_time)
    }

    /// `max(time / eps_in)` over the table; `None` if any row is unbounded.
    pub fn ratio_bound(&self) -> Option<S> {
        self.rows
            .iter()
            .map(|r| r.max_mismatch_time.map(|t| t / r.eps_in))
            .try_fold(S::zero(), |acc, v| v.map(|v| acc.max(v)))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbeError {
    #[error("probe refused: {0}")]
    Refused(String),
    #[error("eps_in values must be positive and strictly decreasing")]
    InvalidEps,
    #[error("no surface points to probe from")]
    NoSamples,
}

enum Outcome<S> {
    Reached(S),
    Never,
    Excluded,
}

fn probe_one<S: Scalar>(
    system: &SystemSpec<S>,
    direction: Direction,
    base: &[S],
    eps: S,
    options: &ProbeOptions<S>,
    stream: u64,
) -> Outcome<S> {
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    rng.set_stream(stream);
    let mut x = None;
    for _ in 0..10_000 {
        let u: Vec<S> = base.iter().map(|_| S::lit(rng.gen_range(-1.0..1.0)) * eps).collect();
        if !(norm(&u) < eps) {
            continue;
        }
        let p: Vec<S> = base.iter().zip(&u).map(|(&b, &d)| b + d).collect();
        if system.flow_set_value(&p) >= S::zero() {
            x = Some(p);
            break;
        }
    }
    let Some(x) = x else {
        return Outcome::Excluded;
    };
    let on_surface = match direction {
        Direction::Forward => system.in_jump_set(&x),
        Direction::Backward => system.in_jump_image(&x) == Some(true),
    };
    if on_surface {
        return Outcome::Reached(S::zero());
    }
    let x = StateVector::new(x);
    let result = match direction {
        Direction::Forward => {
            let config = options.config.clone().with_horizon(options.t0 + options.config.horizon);
            flow_until_event(system, &x, options.t0, &config)
        }
        Direction::Backward => simulate_reversed(system, &x, options.t0, &options.config),
    };
    match result {
        Ok(res) => match res.stop {
            FlowStop::Event { .. } => Outcome::Reached(res.elapsed()),
            FlowStop::LeftFlowSet => Outcome::Excluded,
            FlowStop::Horizon | FlowStop::Failure { .. } => Outcome::Never,
        },
        Err(_) => Outcome::Excluded,
    }
}

/// Measures how long solutions starting within `eps_in` of `C ∩ D`
/// (forward) or `C ∩ G(D)` (backward) flow before reaching that surface.
///
/// Refuses to run unless the matching transversality check passes.
pub fn lemma_probe<S: Scalar>(
    system: &SystemSpec<S>,
    direction: Direction,
    eps_list: &[S],
    sampler: &dyn SurfaceSampler<S>,
    options: &ProbeOptions<S>,
) -> Result<LemmaProbeTable<S>, ProbeError> {
    if eps_list.is_empty()
        || eps_list.iter().any(|e| !(*e > S::zero()))
        || eps_list.windows(2).any(|w| !(w[1] < w[0]))
    {
        return Err(ProbeError::InvalidEps);
    }
    let check = check_transversality(system, direction, sampler, &options.check);
    let condition = match direction {
        Direction::Forward => Condition::ForwardTransversality,
        Direction::Backward => Condition::BackwardTransversality,
    };
    if check.verdict(condition) != Verdict::Pass {
        let note = check.get(condition).map(|r| r.note.clone()).unwrap_or_default();
        return Err(ProbeError::Refused(format!(
            "{} is {} ({note})",
            condition.key(),
            check.verdict(condition)
        )));
    }
    let image = ImageSampler { inner: sampler };
    let mut rows = Vec::with_capacity(eps_list.len());
    for (row, &eps) in eps_list.iter().enumerate() {
        let seed = options.seed.wrapping_add(row as u64);
        let bases: Vec<Vec<S>> = match direction {
            Direction::Forward => sampler.sample(system, options.samples_per_eps, seed),
            Direction::Backward => image.sample(system, options.samples_per_eps, seed),
        }
        .into_iter()
        .filter(|p| system.in_flow_set(p))
        .collect();
        if bases.is_empty() {
            return Err(ProbeError::NoSamples);
        }
        let outcomes: Vec<Outcome<S>> = bases
            .par_iter()
            .enumerate()
            .map(|(i, p)| probe_one(system, direction, p, eps, options, ((row as u64) << 32) | i as u64))
            .collect();
        let mut max = Some(S::zero());
        let mut samples = 0;
        let mut excluded = 0;
        for o in outcomes {
            match o {
                Outcome::Reached(t) => {
                    samples += 1;
                    max = max.map(|m| m.max(t));
                }
                Outcome::Never => {
                    samples += 1;
                    max = None;
                }
                Outcome::Excluded => excluded += 1,
            }
        }
        rows.push(ProbeRow {
            eps_in: eps,
            max_mismatch_time: if samples == 0 { None } else { max },
            samples,
            excluded,
            direction,
        });
    }
    Ok(LemmaProbeTable { direction, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypotheses::ChartSampler;
    use crate::system::JumpSetChart;

    fn gravity() -> SystemSpec<f64> {
        SystemSpec::builder(2)
            .flow(|_, x| vec![x[1], -1.0])
            .flow_set(|x| x[0])
            .jump_event(|x| x[0])
            .jump_predicate(|x| x[1] <= -1.0)
            .jump_map(|x| vec![x[0], -0.5 * x[1]])
            .jump_map_preimage(|y| vec![y[0], -2.0 * y[1]])
            .jump_chart(JumpSetChart::new(vec![(f64::NEG_INFINITY, -1.0)], |p| vec![0.0, p[0]]).unwrap())
            .build()
            .unwrap()
    }

    fn options() -> ProbeOptions<f64> {
        ProbeOptions {
            samples_per_eps: 60,
            check: CheckOptions {
                samples: 200,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn forward_and_backward_tables_shrink() {
        let sys = gravity();
        for dir in [Direction::Forward, Direction::Backward] {
            let table = lemma_probe(&sys, dir, &[0.1, 0.01, 0.001], &ChartSampler::default(), &options()).unwrap();
            assert!(table.is_decreasing(), "{table:?}");
            // |ẋ₁| ≥ 0.5 near G(D) and ≥ 1 near D, up to the ε-perturbation.
            assert!(table.ratio_bound().unwrap() < 3.0, "{table:?}");
            assert!(table.rows.iter().all(|r| r.samples > 0));
        }
    }

    #[test]
    fn single_forward_probe_matches_kinematics() {
        let sys = gravity();
        let res = flow_until_event(
            &sys,
            &StateVector::from_f64(&[0.01, -1.0]),
            0.0,
            &IntegratorConfig::default().with_horizon(1.0),
        )
        .unwrap();
        assert!((res.elapsed() - 0.01).abs() < 1e-4);
    }

    #[test]
    fn refuses_without_transversality() {
        let sys = SystemSpec::<f64>::builder(2)
            .flow(|_, x| vec![x[1], 1.0])
            .flow_set(|x| x[0])
            .jump_event(|x| x[0])
            .jump_predicate(|x| x[1] <= 0.0)
            .jump_map(|x| vec![x[0], -x[1]])
            .jump_chart(JumpSetChart::new(vec![(f64::NEG_INFINITY, 0.0)], |p| vec![0.0, p[0]]).unwrap())
            .build()
            .unwrap();
        assert!(matches!(
            lemma_probe(&sys, Direction::Forward, &[0.1], &ChartSampler::default(), &options()),
            Err(ProbeError::Refused(_))
        ));
        assert!(matches!(
            lemma_probe(&gravity(), Direction::Forward, &[0.1, 0.2], &ChartSampler::default(), &options()),
            Err(ProbeError::InvalidEps)
        ));
    }
}
