//! Event-driven simulation of hybrid systems.
//!
//! Flows are integrated with an adaptive Dormand–Prince 5(4) scheme while the
//! jump event function is monitored; crossings are refined by bisection on
//! re-integrated sub-steps, and the jump map is applied at admissible
//! crossings.

mod config;
mod events;
mod rk;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::IntegratorConfig;
pub use events::{locate_event, BracketError, EventBracket, EventLocation};

use crate::arc::{ArcFlags, ArcSample, FlowSegment, HybridArc, JumpRecord, TerminationReason};
use crate::scalar::Scalar;
use crate::state::{all_finite, dot, StateVector};
use crate::system::{finite_difference_gradient, SystemError, SystemSpec};
use events::bisect;
use rk::{dopri_step, error_norm};

/// Why a flow interval ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar", rename_all = "snake_case", tag = "kind")]
pub enum FlowStop<S> {
    Event { t_event: S, x_event: StateVector<S> },
    Horizon,
    LeftFlowSet,
    Failure { reason: String },
}

/// Samples of one flow interval and how it ended.
///
/// For reversed flows the samples are in integration order, i.e. with
/// decreasing `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSegmentResult<S> {
    pub samples: Vec<ArcSample<S>>,
    pub stop: FlowStop<S>,
    /// Surface crossings rejected because the predicate failed or contact was tangential.
    pub spurious_crossings: usize,
    pub steps: usize,
}

impl<S: Scalar> FlowSegmentResult<S> {
    pub fn last(&self) -> &ArcSample<S> {
        self.samples.last().expect("flow result holds its initial sample")
    }

    /// Continuous time flowed, in either direction.
    pub fn elapsed(&self) -> S {
        (self.last().t - self.samples[0].t).abs()
    }
}

#[derive(Debug, Error)]
pub enum SimError<S: Scalar> {
    #[error("invalid integrator config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("initial state has non-finite entries")]
    NonFiniteState,
    #[error("initial state is not in the flow set (c(x0) = {c})")]
    NotInFlowSet { c: f64 },
    #[error("initial state is in neither the flow set nor the jump set")]
    NotInStateSpace,
    #[error("system has neither an image surface nor a jump-map preimage; G(D) is unknown")]
    NoImageSurface,
    #[error("simulation failed: {reason}")]
    Failure {
        reason: String,
        partial: Box<HybridArc<S>>,
    },
}

struct Surface<'a, S> {
    event: &'a dyn Fn(&[S]) -> S,
    predicate: &'a dyn Fn(&[S]) -> bool,
    falling_only: bool,
}

struct Engine<'a, S> {
    /// Right-hand side in the integration variable.
    rhs: &'a dyn Fn(S, &[S]) -> Vec<S>,
    /// Continuous time of an integration-variable value.
    time: &'a dyn Fn(S) -> S,
    /// Sign relating the integration-variable derivative to `dx/dt`.
    sign: S,
    surface: Surface<'a, S>,
    flow_set: &'a dyn Fn(&[S]) -> S,
    leave_tol: S,
    config: &'a IntegratorConfig<S>,
}

impl<S: Scalar> Engine<'_, S> {
    fn sample(&self, tau: S, x: &[S], k: &[S]) -> ArcSample<S> {
        ArcSample {
            t: (self.time)(tau),
            x: StateVector::new(x.to_vec()),
            dx: StateVector::new(k.iter().map(|&v| self.sign * v).collect()),
        }
    }

    fn run(&self, x0: &[S], tau0: S, tau_end: S) -> FlowSegmentResult<S> {
        let cfg = self.config;
        let mut tau = tau0;
        let mut x = x0.to_vec();
        let mut k = (self.rhs)(tau, &x);
        let mut samples = vec![self.sample(tau, &x, &k)];
        let mut spurious = 0;
        let mut steps = 0;
        let finish = |samples, stop, spurious, steps| FlowSegmentResult {
            samples,
            stop,
            spurious_crossings: spurious,
            steps,
        };
        if !all_finite(&k) {
            return finish(samples, failure("non-finite derivative"), spurious, steps);
        }
        let mut h = cfg.step_initial.min(cfg.step_max);
        loop {
            let remaining = tau_end - tau;
            if remaining <= S::zero() {
                return finish(samples, FlowStop::Horizon, spurious, steps);
            }
            if steps >= cfg.max_steps {
                return finish(samples, failure("step limit reached"), spurious, steps);
            }
            let last = h >= remaining;
            let h_try = if last { remaining } else { h };
            let step = dopri_step(self.rhs, tau, &x, &k, h_try);
            if !all_finite(&step.x) || !all_finite(&step.dx) {
                if h_try <= cfg.step_min {
                    return finish(samples, failure("non-finite derivative"), spurious, steps);
                }
                h = (h_try * S::lit(0.25)).max(cfg.step_min);
                continue;
            }
            let err = error_norm(&step.error, &x, &step.x, cfg.abs_tol, cfg.rel_tol);
            if err > S::one() {
                let factor = (S::lit(0.9) * err.powf(S::lit(-0.2))).max(S::lit(0.2));
                h = h_try * factor;
                if h < cfg.step_min {
                    return finish(samples, failure("step size underflow"), spurious, steps);
                }
                continue;
            }
            steps += 1;
            let tau_new = if last { tau_end } else { tau + h_try };

            let sub_state = |target: S| dopri_step(self.rhs, tau, &x, &k, target - tau).x;

            let e_lo = (self.surface.event)(&x);
            let e_hi = (self.surface.event)(&step.x);
            let crossed = if self.surface.falling_only {
                e_lo > S::zero() && e_hi <= S::zero()
            } else {
                e_lo * e_hi < S::zero() || (e_hi == S::zero() && e_lo != S::zero())
            };
            if crossed {
                let root = bisect(
                    (tau, x.clone(), e_lo),
                    (tau_new, step.x.clone(), e_hi),
                    cfg.event_tol,
                    &sub_state,
                    self.surface.event,
                );
                let k_root = (self.rhs)(root.t, &root.x);
                let grad = finite_difference_gradient(self.surface.event, &root.x);
                let rate = dot(&grad, &k_root);
                let transversal = if e_lo > S::zero() {
                    rate < -cfg.event_tol
                } else {
                    rate > cfg.event_tol
                };
                if (self.surface.predicate)(&root.x) && transversal {
                    if root.value.abs() > cfg.event_tol {
                        return finish(samples, failure("event location did not converge"), spurious, steps);
                    }
                    if root.t > tau {
                        samples.push(self.sample(root.t, &root.x, &k_root));
                    }
                    let stop = FlowStop::Event {
                        t_event: samples.last().map(|s| s.t).unwrap_or_else(|| (self.time)(root.t)),
                        x_event: samples.last().map(|s| s.x.clone()).expect("non-empty"),
                    };
                    return finish(samples, stop, spurious, steps);
                }
                spurious += 1;
            }

            let c_hi = (self.flow_set)(&step.x);
            if c_hi < -self.leave_tol {
                let c_lo = (self.flow_set)(&x);
                if c_lo > S::zero() {
                    let root = bisect(
                        (tau, x.clone(), c_lo),
                        (tau_new, step.x.clone(), c_hi),
                        cfg.event_tol,
                        &sub_state,
                        self.flow_set,
                    );
                    if root.t > tau {
                        let k_root = (self.rhs)(root.t, &root.x);
                        samples.push(self.sample(root.t, &root.x, &k_root));
                    }
                }
                return finish(samples, FlowStop::LeftFlowSet, spurious, steps);
            }

            tau = tau_new;
            x = step.x;
            k = step.dx;
            samples.push(self.sample(tau, &x, &k));
            if last {
                return finish(samples, FlowStop::Horizon, spurious, steps);
            }
            let factor = if err == S::zero() {
                S::lit(5.0)
            } else {
                (S::lit(0.9) * err.powf(S::lit(-0.2))).max(S::lit(0.2)).min(S::lit(5.0))
            };
            h = (h_try * factor).min(cfg.step_max).max(cfg.step_min);
        }
    }
}

fn failure<S>(reason: &str) -> FlowStop<S> {
    FlowStop::Failure {
        reason: reason.to_string(),
    }
}

fn check_start<S: Scalar>(
    system: &SystemSpec<S>,
    x0: &[S],
    config: &IntegratorConfig<S>,
) -> Result<(), SimError<S>> {
    config.validate().map_err(SimError::InvalidConfig)?;
    system.check_dimensions(x0)?;
    if !all_finite(x0) {
        return Err(SimError::NonFiniteState);
    }
    Ok(())
}

/// Integrates `ẋ = F(t, x)` from `(t0, x0)` until an admissible crossing of the
/// jump surface, the horizon, or departure from the flow set.
pub fn flow_until_event<S: Scalar>(
    system: &SystemSpec<S>,
    x0: &StateVector<S>,
    t0: S,
    config: &IntegratorConfig<S>,
) -> Result<FlowSegmentResult<S>, SimError<S>> {
    check_start(system, x0, config)?;
    if !system.in_flow_set(x0) {
        return Err(SimError::NotInFlowSet {
            c: system.flow_set_value(x0).as_f64(),
        });
    }
    Ok(flow_forward(system, x0, t0, config))
}

fn flow_forward<S: Scalar>(
    system: &SystemSpec<S>,
    x0: &[S],
    t0: S,
    config: &IntegratorConfig<S>,
) -> FlowSegmentResult<S> {
    let rhs = |t: S, x: &[S]| system.flow(t, x);
    let time = |t: S| t;
    let event = |x: &[S]| system.jump_event(x);
    let predicate = |x: &[S]| system.jump_predicate(x);
    let flow_set = |x: &[S]| system.flow_set_value(x);
    let engine = Engine {
        rhs: &rhs,
        time: &time,
        sign: S::one(),
        surface: Surface {
            event: &event,
            predicate: &predicate,
            falling_only: true,
        },
        flow_set: &flow_set,
        leave_tol: config.event_tol,
        config,
    };
    engine.run(x0, t0, config.horizon.max(t0))
}

/// Integrates `ẋ = −F(t, x)` backwards in time from `(t0, x0)` until the flow
/// crosses the image surface `G(D)`, leaves `C`, or `config.horizon` units of
/// time have elapsed.
pub fn simulate_reversed<S: Scalar>(
    system: &SystemSpec<S>,
    x0: &StateVector<S>,
    t0: S,
    config: &IntegratorConfig<S>,
) -> Result<FlowSegmentResult<S>, SimError<S>> {
    check_start(system, x0, config)?;
    if !system.has_image_surface() {
        return Err(SimError::NoImageSurface);
    }
    if !system.in_flow_set(x0) {
        return Err(SimError::NotInFlowSet {
            c: system.flow_set_value(x0).as_f64(),
        });
    }
    let rhs = |s: S, x: &[S]| system.flow(t0 - s, x).into_iter().map(|v| -v).collect();
    let time = |s: S| t0 - s;
    let event = |x: &[S]| system.image_event(x).expect("image surface checked above");
    let predicate = |x: &[S]| system.image_predicate(x).expect("image surface checked above");
    let flow_set = |x: &[S]| system.flow_set_value(x);
    let engine = Engine {
        rhs: &rhs,
        time: &time,
        sign: -S::one(),
        surface: Surface {
            event: &event,
            predicate: &predicate,
            falling_only: false,
        },
        flow_set: &flow_set,
        leave_tol: config.event_tol,
        config,
    };
    Ok(engine.run(x0, S::zero(), config.horizon))
}

/// Simulates a maximal solution from `x0` up to `config.horizon`.
///
/// Alternates flow intervals and jumps `x⁺ = G(x⁻)`. A state in `D` at the
/// start of an interval jumps before flowing. On solver failure the partial
/// arc is returned inside the error.
pub fn simulate<S: Scalar>(
    system: &SystemSpec<S>,
    x0: &StateVector<S>,
    config: &IntegratorConfig<S>,
) -> Result<HybridArc<S>, SimError<S>> {
    check_start(system, x0, config)?;
    if !system.in_flow_set(x0) && !system.in_jump_set(x0) {
        return Err(SimError::NotInStateSpace);
    }
    let mut segments: Vec<FlowSegment<S>> = Vec::new();
    let mut jumps: Vec<JumpRecord<S>> = Vec::new();
    let mut t = S::zero();
    let mut x = x0.to_vec();
    let reason = loop {
        let j = segments.len();
        let (samples, stop) = if system.in_jump_set(&x) {
            let first = ArcSample {
                t,
                x: StateVector::new(x.clone()),
                dx: StateVector::new(system.flow(t, &x)),
            };
            if j > 0 {
                // Entered D by a jump: a second jump without flow is refused.
                segments.push(FlowSegment { j, samples: vec![first] });
                break TerminationReason::JumpCap;
            }
            (
                vec![first],
                FlowStop::Event {
                    t_event: t,
                    x_event: StateVector::new(x.clone()),
                },
            )
        } else if !system.in_flow_set(&x) {
            let first = ArcSample {
                t,
                x: StateVector::new(x.clone()),
                dx: StateVector::new(system.flow(t, &x)),
            };
            (vec![first], FlowStop::LeftFlowSet)
        } else {
            let res = flow_forward(system, &x, t, config);
            (res.samples, res.stop)
        };
        segments.push(FlowSegment { j, samples });
        match stop {
            FlowStop::Horizon => break TerminationReason::Horizon,
            FlowStop::LeftFlowSet => break TerminationReason::LeftFlowSet,
            FlowStop::Failure { reason } => {
                let arc = HybridArc::from_parts(
                    segments,
                    jumps,
                    ArcFlags {
                        t_complete_up_to_horizon: false,
                        terminated_reason: TerminationReason::SolverFailure,
                    },
                )
                .expect("simulator builds consistent arcs");
                return Err(SimError::Failure {
                    reason,
                    partial: Box::new(arc),
                });
            }
            FlowStop::Event { t_event, x_event } => {
                if jumps.len() >= config.jump_cap {
                    break TerminationReason::JumpCap;
                }
                let window_start = t_event - S::one();
                let recent = jumps.iter().rev().take_while(|r| r.t_jump > window_start).count();
                if recent >= config.max_jumps_per_unit_time {
                    break TerminationReason::JumpCap;
                }
                let x_plus = system.jump(&x_event);
                if x_plus.len() != system.dimension() || !all_finite(&x_plus) {
                    let arc = HybridArc::from_parts(
                        segments,
                        jumps,
                        ArcFlags {
                            t_complete_up_to_horizon: false,
                            terminated_reason: TerminationReason::SolverFailure,
                        },
                    )
                    .expect("simulator builds consistent arcs");
                    return Err(SimError::Failure {
                        reason: "jump map returned an invalid state".into(),
                        partial: Box::new(arc),
                    });
                }
                jumps.push(JumpRecord {
                    t_jump: t_event,
                    j,
                    x_minus: x_event,
                    x_plus: StateVector::new(x_plus.clone()),
                });
                t = t_event;
                x = x_plus;
            }
        }
    };
    // Never leave two consecutive single-instant segments.
    let n = segments.len();
    if n >= 2 && segments[n - 1].samples.len() == 1 && segments[n - 2].samples.len() == 1 {
        segments.pop();
        jumps.pop();
    }
    HybridArc::from_parts(
        segments,
        jumps,
        ArcFlags {
            t_complete_up_to_horizon: reason == TerminationReason::Horizon,
            terminated_reason: reason,
        },
    )
    .map_err(|e| SimError::InvalidConfig(e.to_string()))
}
