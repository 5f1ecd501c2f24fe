//! The impacting mass–spring–damper: unit mass, weak damping, a spring with
//! unloaded position `x̄₁` and an inelastic stop at `x₁ = 0` with
//! `x⁺ = −ε x` for impacts faster than `r`.
//!
//! A reference solution is generated without input; nearby solutions track
//! it with a proportional law whose target switches between the reference,
//! its jump image and its jump preimage, so that a jump-time mismatch does
//! not register as a large error.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arc::HybridArc;
use crate::metrics::{
    graphical_profile, rho_trace, ClosenessReport, GraphicalOptions, MetricsError, RhoTrace, DEFAULT_GRID_STEP,
};
use crate::scalar::Scalar;
use crate::simulator::{simulate, IntegratorConfig, SimError};
use crate::state::{distance, StateVector};
use crate::system::{JumpSetChart, SetBound, SystemSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar", default)]
pub struct ExampleParams<S> {
    pub damping: S,
    pub stiffness: S,
    pub unloaded_position: S,
    pub spring_constant_k: S,
    /// `ε` in `x⁺ = −ε x`.
    pub restitution: S,
    /// `r` in `D = {x₁ = 0, x₂ ≤ −r}`.
    pub jump_threshold: S,
    pub feedback_gains: (S, S),
    pub horizon: S,
    /// `|u_fb|` is clipped to this bound.
    pub control_bound: S,
    /// Distance to the impact surface within which the controller considers
    /// jump images and preimages as targets.
    pub capture_radius: S,
    pub reference_x0: Vec<S>,
}

impl<S: Scalar> Default for ExampleParams<S> {
    fn default() -> Self {
        Self {
            damping: S::lit(0.02),
            stiffness: S::one(),
            unloaded_position: S::one(),
            spring_constant_k: S::one(),
            restitution: S::lit(0.8),
            jump_threshold: S::lit(0.5),
            feedback_gains: (S::lit(2.0), S::lit(2.0)),
            horizon: S::lit(20.0),
            control_bound: S::lit(50.0),
            capture_radius: S::lit(0.5),
            reference_x0: vec![S::lit(3.0), S::zero()],
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExampleError {
    #[error("invalid example parameter: {0}")]
    InvalidParams(String),
    #[error("time {t} is outside the reference range [0, {end}]")]
    OutsideReference { t: f64, end: f64 },
}

impl<S: Scalar> ExampleParams<S> {
    pub fn validate(&self) -> Result<(), ExampleError> {
        let bad = |m: &str| Err(ExampleError::InvalidParams(m.to_string()));
        if !(self.restitution > S::zero() && self.restitution < S::one()) {
            return bad("restitution must lie in (0, 1)");
        }
        if !(self.jump_threshold > S::zero()) {
            return bad("jump_threshold must be positive");
        }
        if !(self.horizon > S::zero()) {
            return bad("horizon must be positive");
        }
        if !(self.control_bound > S::zero()) || !(self.capture_radius >= S::zero()) {
            return bad("control_bound must be positive and capture_radius non-negative");
        }
        let finite = [
            self.damping,
            self.stiffness,
            self.unloaded_position,
            self.spring_constant_k,
            self.feedback_gains.0,
            self.feedback_gains.1,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("coefficients must be finite");
        }
        if self.reference_x0.len() != 2 || self.reference_x0.iter().any(|v| !v.is_finite()) {
            return bad("reference_x0 must be a finite 2-vector");
        }
        Ok(())
    }

    fn gains_are_zero(&self) -> bool {
        self.feedback_gains.0 == S::zero() && self.feedback_gains.1 == S::zero()
    }
}

/// Builds the impact system without input (`reference = None`) or with the
/// tracking feedback around `reference`.
///
/// Assumes valid parameters; see [`ExampleParams::validate`].
pub fn build_example<S: Scalar>(params: &ExampleParams<S>, reference: Option<Arc<HybridArc<S>>>) -> SystemSpec<S> {
    let p = params.clone();
    let (eps, r) = (p.restitution, p.jump_threshold);
    let open_loop = {
        let p = p.clone();
        move |_: S, x: &[S]| {
            vec![
                x[1],
                -p.stiffness * x[0] - p.damping * x[1] + p.spring_constant_k * p.unloaded_position,
            ]
        }
    };
    let base = SystemSpec::builder(2)
        .name("impact_oscillator")
        .flow(open_loop.clone())
        .flow_set(|x| x[0])
        .flow_set_gradient(|_| vec![S::one(), S::zero()])
        .jump_event(|x| x[0])
        .jump_predicate(move |x| x[1] <= -r)
        .jump_map(move |x| vec![-eps * x[0], -eps * x[1]])
        .jump_map_preimage(move |y| vec![-y[0] / eps, -y[1] / eps])
        .image_surface(|y| y[0], move |y| y[1] >= eps * r)
        .jump_chart(JumpSetChart::new(vec![(S::neg_infinity(), -r)], |s| vec![S::zero(), s[0]]).expect("valid chart"))
        .jump_set_bound(SetBound::Unbounded)
        .build()
        .expect("example system is well formed");
    let Some(reference) = reference.filter(|_| !params.gains_are_zero()) else {
        return base;
    };
    let plant = base.clone();
    base.with_flow_field(move |t, x| {
        let mut dx = open_loop(t, x);
        let u = feedback_control(t, x, &reference, p.feedback_gains, &plant, &p).unwrap_or(S::nan());
        dx[1] += u;
        dx
    })
}

/// The jump-aware proportional law `u = −K₁(x₁ − τ₁) − K₂(x₂ − τ₂)`.
///
/// The target `τ` is the candidate closest to `x` among `φ⋆(t, j)` for every
/// `j` at time `t`, `G(φ⋆(t, j))` when `φ⋆(t, j)` is about to jump, and
/// `G⁻¹(φ⋆(t, j))` when `x` is about to jump.
pub fn feedback_control<S: Scalar>(
    t: S,
    x: &[S],
    reference: &HybridArc<S>,
    gains: (S, S),
    system: &SystemSpec<S>,
    params: &ExampleParams<S>,
) -> Result<S, ExampleError> {
    if gains.0 == S::zero() && gains.1 == S::zero() {
        return Ok(S::zero());
    }
    let start = reference.segments[0].first().t;
    let end = reference.final_time();
    if !(t >= start && t <= end) {
        return Err(ExampleError::OutsideReference {
            t: t.as_f64(),
            end: end.as_f64(),
        });
    }
    let near = |z: &[S]| system.jump_event(z).abs() <= params.capture_radius && system.jump_predicate(z);
    let x_near = near(x);
    let mut best: Option<(S, Vec<S>)> = None;
    let mut consider = |cand: Vec<S>| {
        let d = distance(x, &cand);
        if best.as_ref().map_or(true, |b| d < b.0) {
            best = Some((d, cand));
        }
    };
    for (_, p) in reference.slice_at_time(t) {
        if near(&p) {
            consider(system.jump(&p));
        }
        if x_near {
            if let Some(pre) = system.jump_preimage(&p) {
                consider(pre);
            }
        }
        consider(p.into_inner());
    }
    let target = best.expect("reference has a state at t").1;
    let u = -gains.0 * (x[0] - target[0]) - gains.1 * (x[1] - target[1]);
    Ok(u.max(-params.control_bound).min(params.control_bound))
}

/// Simulates the uncontrolled system from `x0` over `params.horizon`.
pub fn make_reference<S: Scalar>(
    params: &ExampleParams<S>,
    x0: &StateVector<S>,
    config: &IntegratorConfig<S>,
) -> Result<HybridArc<S>, SimError<S>> {
    params.validate().map_err(|e| SimError::InvalidConfig(e.to_string()))?;
    let system = build_example(params, None);
    simulate(&system, x0, &config.clone().with_horizon(params.horizon))
}

/// A controlled solution compared with its reference.
#[derive(Debug, Clone)]
pub struct TrackingRun<S: Scalar> {
    pub arc: HybridArc<S>,
    pub graphical: ClosenessReport<S>,
    pub rho: ClosenessReport<S>,
    pub trace: RhoTrace<S>,
}

#[derive(Debug, Error)]
pub enum TrackingError<S: Scalar> {
    #[error(transparent)]
    Simulation(#[from] SimError<S>),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Params(#[from] ExampleError),
}

/// Simulates the closed loop from `reference(0, 0) + offset` and measures
/// graphical and ρ_𝒜 closeness, with tails on `t_grid`.
pub fn track<S: Scalar>(
    params: &ExampleParams<S>,
    reference: &HybridArc<S>,
    offset: &[S],
    config: &IntegratorConfig<S>,
    t_grid: &[S],
) -> Result<TrackingRun<S>, TrackingError<S>> {
    params.validate()?;
    let x0: Vec<S> = reference
        .initial_state()
        .iter()
        .zip(offset.iter().chain(std::iter::repeat(&S::zero())))
        .map(|(&a, &d)| a + d)
        .collect();
    let closed = build_example(params, Some(Arc::new(reference.clone())));
    let horizon = reference.final_time().min(params.horizon);
    let arc = simulate(&closed, &StateVector::new(x0), &config.clone().with_horizon(horizon))?;
    let plant = build_example(params, None);
    let step = S::lit(DEFAULT_GRID_STEP);
    let graphical_profile = graphical_profile(
        reference,
        &arc,
        &GraphicalOptions {
            grid_step: step,
            search_window: None,
        },
    )?;
    let trace = rho_trace(reference, &arc, &plant, step)?;
    let tails: Vec<S> = t_grid.iter().copied().filter(|&t| t <= trace.profile().horizon()).collect();
    Ok(TrackingRun {
        graphical: graphical_profile.report_with_tails(S::zero(), &tails)?,
        rho: trace.profile().report_with_tails(S::zero(), &tails)?,
        trace,
        arc,
    })
}

/// `{0, H/4, H/2, 3H/4}`.
pub fn quarter_grid<S: Scalar>(horizon: S) -> Vec<S> {
    (0..4).map(|k| horizon * S::from_usize(k) / S::lit(4.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arc::TerminationReason;

    fn sv(x: &[f64]) -> StateVector<f64> {
        StateVector::from_f64(x)
    }

    #[test]
    fn equilibrium_and_jump_set() {
        let sys = build_example(&ExampleParams::<f64>::default(), None);
        assert_eq!(sys.flow(0.0, &[1.0, 0.0]), vec![0.0, 0.0]);
        assert!(sys.in_jump_set(&[0.0, -0.6]));
        let y = sys.jump(&[0.0, -0.6]);
        assert!((y[1] - 0.48).abs() < 1e-15 && y[0] == 0.0);
        assert!(!sys.in_jump_set(&[0.0, -0.4]));
        assert_eq!(sys.in_jump_image(&[0.0, 0.4]), Some(true));
    }

    #[test]
    fn equilibrium_reference_is_constant() {
        let params = ExampleParams::<f64>::default();
        let arc = make_reference(&params, &sv(&[1.0, 0.0]), &IntegratorConfig::default()).unwrap();
        assert_eq!(arc.jump_count(), 0);
        assert!(arc.samples().all(|(_, s)| s.x.as_slice() == [1.0, 0.0]));
    }

    #[test]
    fn unit_amplitude_start_never_impacts() {
        // From (2, 0) the oscillation about x₁ = 1 only grazes the stop.
        let params = ExampleParams::<f64>::default();
        let arc = make_reference(&params, &sv(&[2.0, 0.0]), &IntegratorConfig::default()).unwrap();
        assert_eq!(arc.jump_count(), 0);
        assert!(arc.flags.t_complete_up_to_horizon);
    }

    #[test]
    fn default_reference_impacts_and_is_bounded() {
        let params = ExampleParams::<f64>::default();
        let arc = make_reference(&params, &StateVector::new(params.reference_x0.clone()), &IntegratorConfig::default())
            .unwrap();
        assert!(arc.jump_count() >= 1);
        assert_eq!(arc.flags.terminated_reason, TerminationReason::Horizon);
        assert!(arc.max_norm().0 < 10.0);
    }

    #[test]
    fn zero_horizon_reference_is_a_point() {
        let params = ExampleParams::<f64>::default();
        let config = IntegratorConfig::default().with_horizon(0.0);
        let sys = build_example(&params, None);
        let arc = simulate(&sys, &sv(&[3.0, 0.0]), &config).unwrap();
        assert_eq!(arc.sample_count(), 1);
    }

    #[test]
    fn controller_targets() {
        let params = ExampleParams::<f64>::default();
        let sys = build_example(&params, None);
        let reference = make_reference(&params, &sv(&[3.0, 0.0]), &IntegratorConfig::default()).unwrap();
        let t_jump = reference.jumps[0].t_jump;
        let t = t_jump - 0.01;
        let p = reference.state_at(t, 0).unwrap();
        assert_eq!(feedback_control(t, &p, &reference, (2.0, 2.0), &sys, &params).unwrap(), 0.0);
        assert_eq!(feedback_control(t, &[5.0, 5.0], &reference, (0.0, 0.0), &sys, &params).unwrap(), 0.0);
        // Already bounced while the reference has not: track G(φ⋆).
        let x = sys.jump(&p);
        assert_eq!(feedback_control(t, &x, &reference, (2.0, 2.0), &sys, &params).unwrap(), 0.0);
        assert!(feedback_control(1e3, &p, &reference, (2.0, 2.0), &sys, &params).is_err());
    }

    #[test]
    fn zero_gains_reproduce_reference_exactly() {
        let mut params = ExampleParams::<f64>::default();
        params.feedback_gains = (0.0, 0.0);
        let reference = make_reference(&params, &sv(&[3.0, 0.0]), &IntegratorConfig::default()).unwrap();
        let run = track(&params, &reference, &[0.0, 0.0], &IntegratorConfig::default(), &[]).unwrap();
        assert_eq!(run.arc, reference);
        assert_eq!(run.graphical.epsilon, 0.0);
        assert_eq!(run.rho.epsilon, 0.0);
    }

    #[test]
    fn invalid_params_are_rejected() {
        let mut params = ExampleParams::<f64>::default();
        params.restitution = 1.0;
        assert!(params.validate().is_err());
        params.restitution = 0.8;
        params.jump_threshold = 0.0;
        assert!(params.validate().is_err());
    }
}
