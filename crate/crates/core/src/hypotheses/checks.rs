use serde::{Deserialize, Serialize};

use super::samplers::{ImageSampler, SurfaceSampler};
use super::{Condition, ConditionResult, HypothesisReport, Verdict};
use crate::arc::HybridArc;
use crate::metrics::rho::minimize_over_jump_set;
use crate::scalar::Scalar;
use crate::state::{distance, dot, norm, squared_distance, StateVector};
use crate::system::{SetBound, SystemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar", default)]
pub struct CheckOptions<S> {
    /// Points drawn per surface.
    pub samples: usize,
    pub seed: u64,
    /// Transversality must hold with at least this margin.
    pub margin_tol: S,
    /// Times at which a time-varying flow is evaluated.
    pub times: Vec<S>,
    /// Radius `R` for the boundedness condition.
    pub bound_radius: S,
    /// Largest exponent `k` of the shell ladder `[2^k, 2^(k+1))` used for properness.
    pub ladder_top: u32,
}

impl<S: Scalar> Default for CheckOptions<S> {
    fn default() -> Self {
        Self {
            samples: 10_000,
            seed: 0,
            margin_tol: S::lit(1e-7),
            times: vec![S::zero()],
            bound_radius: S::lit(10.0),
            ladder_top: 20,
        }
    }
}

const DEGENERATE_FRACTION: f64 = 0.1;
const GROWTH_FACTOR: f64 = 1.5;

/// Distance from `y` to `D`: exact search over `D` where possible, bounded
/// above by the nearest sampled point.
fn distance_to_jump_set<S: Scalar>(system: &SystemSpec<S>, y: &[S], samples: &[Vec<S>]) -> (S, Vec<S>) {
    if system.in_jump_set(y) {
        return (S::zero(), y.to_vec());
    }
    let mut best = samples
        .iter()
        .map(|z| (distance(y, z), z.clone()))
        .fold((S::infinity(), y.to_vec()), |a, b| if b.0 < a.0 { b } else { a });
    let h = |z: &[S]| squared_distance(y, z);
    if let Some(c) = minimize_over_jump_set(system, &h, &[y]) {
        let d = c.value.sqrt();
        if d < best.0 {
            best = (d, c.z);
        }
    }
    best
}

/// Condition (i): separation of `G(D)` from `D`, `G(D) ⊂ C`, and properness of `G`.
pub fn check_jump_structure<S: Scalar>(
    system: &SystemSpec<S>,
    sampler: &dyn SurfaceSampler<S>,
    options: &CheckOptions<S>,
) -> HypothesisReport<S> {
    let points: Vec<Vec<S>> = sampler
        .sample(system, options.samples, options.seed)
        .into_iter()
        .filter(|z| system.in_jump_set(z))
        .collect();
    if points.is_empty() {
        let note = format!("{} produced no points of D", sampler.describe());
        return HypothesisReport {
            results: vec![
                ConditionResult::unknown(Condition::Separation, note.clone()),
                ConditionResult::unknown(Condition::ImageInC, note.clone()),
                ConditionResult::unknown(Condition::Properness, note),
            ],
        };
    }
    let n = points.len();

    let mut sep = (S::infinity(), points[0].clone());
    let mut image = (S::infinity(), points[0].clone());
    for z in &points {
        let y = system.jump(z);
        let (d, _) = distance_to_jump_set(system, &y, &points);
        if d < sep.0 {
            sep = (d, z.clone());
        }
        let c = system.flow_set_value(&y);
        if c < image.0 {
            image = (c, z.clone());
        }
    }
    let separation = if sep.0 > system.membership_tol() {
        ConditionResult {
            condition: Condition::Separation,
            verdict: Verdict::Pass,
            margin: Some(sep.0),
            counterexample: None,
            sample_count: n,
            note: "min distance from G(z) to D".into(),
        }
    } else {
        ConditionResult {
            condition: Condition::Separation,
            verdict: Verdict::Fail,
            margin: Some(sep.0),
            counterexample: Some(StateVector::new(sep.1)),
            sample_count: n,
            note: "G(z) lies in D".into(),
        }
    };
    let image_ok = image.0 >= -system.membership_tol();
    let image_in_c = ConditionResult {
        condition: Condition::ImageInC,
        verdict: if image_ok { Verdict::Pass } else { Verdict::Fail },
        margin: Some(image.0),
        counterexample: (!image_ok).then(|| StateVector::new(image.1)),
        sample_count: n,
        note: "min c(G(z))".into(),
    };
    HypothesisReport {
        results: vec![separation, image_in_c, check_properness(system, sampler, options)],
    }
}

fn check_properness<S: Scalar>(
    system: &SystemSpec<S>,
    sampler: &dyn SurfaceSampler<S>,
    options: &CheckOptions<S>,
) -> ConditionResult<S> {
    if let SetBound::Bounded { radius } = system.jump_set_bound() {
        return ConditionResult {
            condition: Condition::Properness,
            verdict: Verdict::Pass,
            margin: Some(radius),
            counterexample: None,
            sample_count: 0,
            note: "D declared bounded; a continuous G is proper on it".into(),
        };
    }
    let shells = options.ladder_top as usize + 1;
    let per_shell = (options.samples / shells).clamp(8, 500);
    // (shell radius, min ‖G(z)‖, argmin z, count)
    let mut ladder: Vec<(S, S, Vec<S>)> = Vec::new();
    let mut total = 0;
    for k in 0..shells {
        let r_lo = S::lit(2f64.powi(k as i32));
        let pts = sampler.sample_shell(system, r_lo, r_lo + r_lo, per_shell, options.seed.wrapping_add(k as u64));
        let mut best: Option<(S, Vec<S>)> = None;
        for z in pts.into_iter().filter(|z| system.in_jump_set(z)) {
            total += 1;
            let g = norm(&system.jump(&z));
            if best.as_ref().map_or(true, |b| g < b.0) {
                best = Some((g, z));
            }
        }
        if let Some((g, z)) = best {
            ladder.push((r_lo, g, z));
        }
    }
    if ladder.len() < 4 {
        return ConditionResult {
            sample_count: total,
            ..ConditionResult::unknown(Condition::Properness, "too few populated shells")
        };
    }
    let (top_r, top_g, top_z) = ladder.last().cloned().expect("non-empty");
    let (mid_r, mid_g, _) = ladder[ladder.len() / 2].clone();
    let grows = top_g >= S::lit(GROWTH_FACTOR) * mid_g && top_g > S::zero();
    ConditionResult {
        condition: Condition::Properness,
        verdict: if grows { Verdict::Pass } else { Verdict::Fail },
        margin: Some(top_g),
        counterexample: (!grows).then(|| StateVector::new(top_z)),
        sample_count: total,
        note: format!(
            "min |G(z)| over shells: {:.3e} at |z|~{:.3e}, {:.3e} at |z|~{:.3e}",
            mid_g.as_f64(),
            mid_r.as_f64(),
            top_g.as_f64(),
            top_r.as_f64()
        ),
    }
}

/// Conditions (ii)/(iii): the flow leaves `C` through `C ∩ D` (forward) and
/// the reversed flow leaves `C` through `C ∩ G(D)` (backward), with tangent
/// cone `T_C(x) = {v : ∇c(x)·v ≥ 0}`.
pub fn check_transversality<S: Scalar>(
    system: &SystemSpec<S>,
    direction: Direction,
    sampler: &dyn SurfaceSampler<S>,
    options: &CheckOptions<S>,
) -> HypothesisReport<S> {
    let condition = match direction {
        Direction::Forward => Condition::ForwardTransversality,
        Direction::Backward => Condition::BackwardTransversality,
    };
    let image = ImageSampler { inner: sampler };
    let raw = match direction {
        Direction::Forward => sampler.sample(system, options.samples, options.seed),
        Direction::Backward => image.sample(system, options.samples, options.seed),
    };
    let points: Vec<Vec<S>> = raw.into_iter().filter(|x| system.in_flow_set(x)).collect();
    if points.is_empty() {
        return HypothesisReport {
            results: vec![ConditionResult::unknown(condition, "no sampled surface point lies in C")],
        };
    }
    let times = if options.times.is_empty() {
        vec![S::zero()]
    } else {
        options.times.clone()
    };
    let mut degenerate = 0;
    let mut worst: Option<(S, Vec<S>, S)> = None;
    for x in &points {
        let grad = system.flow_set_gradient(x);
        if !(norm(&grad) > S::lit(1e-12)) {
            degenerate += 1;
            continue;
        }
        let c = system.flow_set_value(x);
        let candidates: Vec<(S, S)> = if c > system.membership_tol() {
            // Interior of C: every direction is tangent.
            vec![(-c, S::zero())]
        } else {
            times
                .iter()
                .map(|&t| {
                    let v = dot(&grad, &system.flow(t, x));
                    let m = match direction {
                        Direction::Forward => -v,
                        Direction::Backward => v,
                    };
                    (m, t)
                })
                .collect()
        };
        for (m, t) in candidates {
            if worst.as_ref().map_or(true, |w| m < w.0 || m.is_nan()) {
                worst = Some((m, x.clone(), t));
            }
        }
    }
    let n = points.len();
    if S::from_usize(degenerate) > S::lit(DEGENERATE_FRACTION) * S::from_usize(n) {
        return HypothesisReport {
            results: vec![ConditionResult {
                sample_count: n,
                ..ConditionResult::unknown(condition, format!("{degenerate} of {n} samples have a vanishing ∇c"))
            }],
        };
    }
    let Some((margin, x, t)) = worst else {
        return HypothesisReport {
            results: vec![ConditionResult::unknown(condition, "all samples degenerate")],
        };
    };
    let pass = margin > options.margin_tol;
    HypothesisReport {
        results: vec![ConditionResult {
            condition,
            verdict: if pass { Verdict::Pass } else { Verdict::Fail },
            margin: Some(margin),
            counterexample: (!pass).then(|| StateVector::new(x)),
            sample_count: n,
            note: format!("worst signed ∇c·F at t = {}", t),
        }],
    }
}

/// Condition (iv): `D` is bounded or the reference solution is.
pub fn check_boundedness<S: Scalar>(
    system: &SystemSpec<S>,
    reference: Option<&HybridArc<S>>,
    radius: S,
) -> HypothesisReport<S> {
    let result = match (system.jump_set_bound(), reference) {
        (SetBound::Bounded { radius: d }, _) if d <= radius => ConditionResult {
            condition: Condition::Boundedness,
            verdict: Verdict::Pass,
            margin: Some(radius - d),
            counterexample: None,
            sample_count: 0,
            note: "D declared bounded".into(),
        },
        (_, Some(arc)) => {
            let (max, at) = arc.max_norm();
            let ok = max <= radius;
            ConditionResult {
                condition: Condition::Boundedness,
                verdict: if ok { Verdict::Pass } else { Verdict::Fail },
                margin: Some(radius - max),
                counterexample: (!ok).then(|| arc.state_at(at.t, at.j).expect("witness is a node")),
                sample_count: arc.sample_count(),
                note: format!("max reference norm {:.6e} at t = {}, j = {}", max.as_f64(), at.t, at.j),
            }
        }
        _ => ConditionResult::unknown(Condition::Boundedness, "D not declared bounded within R and no reference arc"),
    };
    HypothesisReport { results: vec![result] }
}

/// All six conditions.
pub fn check_all<S: Scalar>(
    system: &SystemSpec<S>,
    sampler: &dyn SurfaceSampler<S>,
    reference: Option<&HybridArc<S>>,
    options: &CheckOptions<S>,
) -> HypothesisReport<S> {
    check_jump_structure(system, sampler, options)
        .merge(check_transversality(system, Direction::Forward, sampler, options))
        .merge(check_transversality(system, Direction::Backward, sampler, options))
        .merge(check_boundedness(system, reference, options.bound_radius))
}
