//! Zero-crossing location on a single integration step.

use thiserror::Error;

use crate::arc::{hermite, ArcSample};
use crate::scalar::Scalar;
use crate::state::StateVector;
use crate::system::SystemSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BracketError {
    #[error("no sign change of the event function on [{t_lo}, {t_hi}] (e = {e_lo}, {e_hi})")]
    NoSignChange { t_lo: f64, t_hi: f64, e_lo: f64, e_hi: f64 },
    #[error("bracket [{t_lo}, {t_hi}] is empty or reversed")]
    Empty { t_lo: f64, t_hi: f64 },
}

/// Bracketing step `(t_lo, x_lo)` – `(t_hi, x_hi)` for [`locate_event`].
#[derive(Debug, Clone)]
pub struct EventBracket<S> {
    pub t_lo: S,
    pub x_lo: StateVector<S>,
    pub t_hi: S,
    pub x_hi: StateVector<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventLocation<S> {
    /// An admissible jump: predicate holds and the flow crosses transversally.
    Crossing { t: S, x: StateVector<S> },
    /// The surface was crossed outside the jump set or tangentially; flow continues.
    Spurious { t: S, x: StateVector<S> },
}

impl<S: Scalar> EventLocation<S> {
    pub fn time(&self) -> S {
        match self {
            Self::Crossing { t, .. } | Self::Spurious { t, .. } => *t,
        }
    }

    pub fn state(&self) -> &StateVector<S> {
        match self {
            Self::Crossing { x, .. } | Self::Spurious { x, .. } => x,
        }
    }
}

/// Result of bisecting a scalar function of time over a bracket.
pub(crate) struct Root<S> {
    pub t: S,
    pub x: Vec<S>,
    pub value: S,
}

/// Bisects `g(state(τ))` on `[lo, hi]` where `g(lo)` and `g(hi)` differ in sign
/// (`g(hi)` may be zero). Stops once the bracket is narrower than `tol` and the
/// better endpoint has `|g| ≤ tol`, or the bracket cannot shrink further.
pub(crate) fn bisect<S: Scalar>(
    lo: (S, Vec<S>, S),
    hi: (S, Vec<S>, S),
    tol: S,
    state: &dyn Fn(S) -> Vec<S>,
    g: &dyn Fn(&[S]) -> S,
) -> Root<S> {
    let (mut t_lo, mut x_lo, mut g_lo) = lo;
    let (mut t_hi, mut x_hi, mut g_hi) = hi;
    let lo_positive = g_lo > S::zero();
    let half = S::lit(0.5);
    for _ in 0..400 {
        let best = g_lo.abs().min(g_hi.abs());
        if (t_hi - t_lo <= tol && best <= tol) || g_hi == S::zero() && t_hi - t_lo <= tol {
            break;
        }
        let mid = t_lo + (t_hi - t_lo) * half;
        if mid <= t_lo || mid >= t_hi {
            break;
        }
        let x_mid = state(mid);
        let g_mid = g(&x_mid);
        if (g_mid > S::zero()) == lo_positive && g_mid != S::zero() {
            t_lo = mid;
            x_lo = x_mid;
            g_lo = g_mid;
        } else {
            t_hi = mid;
            x_hi = x_mid;
            g_hi = g_mid;
        }
    }
    if g_lo.abs() < g_hi.abs() {
        Root {
            t: t_lo,
            x: x_lo,
            value: g_lo,
        }
    } else {
        Root {
            t: t_hi,
            x: x_hi,
            value: g_hi,
        }
    }
}

/// Refines a jump-surface crossing inside one step using cubic Hermite dense
/// output built from the end points and the flow field there.
pub fn locate_event<S: Scalar>(
    system: &SystemSpec<S>,
    bracket: &EventBracket<S>,
    event_tol: S,
) -> Result<EventLocation<S>, BracketError> {
    let EventBracket {
        t_lo,
        x_lo,
        t_hi,
        x_hi,
    } = bracket;
    if !(t_hi > t_lo) {
        return Err(BracketError::Empty {
            t_lo: t_lo.as_f64(),
            t_hi: t_hi.as_f64(),
        });
    }
    let e_lo = system.jump_event(x_lo);
    let e_hi = system.jump_event(x_hi);
    if !(e_lo * e_hi < S::zero() || (e_hi == S::zero() && e_lo != S::zero())) {
        return Err(BracketError::NoSignChange {
            t_lo: t_lo.as_f64(),
            t_hi: t_hi.as_f64(),
            e_lo: e_lo.as_f64(),
            e_hi: e_hi.as_f64(),
        });
    }
    let a = ArcSample {
        t: *t_lo,
        x: x_lo.clone(),
        dx: StateVector::new(system.flow(*t_lo, x_lo)),
    };
    let b = ArcSample {
        t: *t_hi,
        x: x_hi.clone(),
        dx: StateVector::new(system.flow(*t_hi, x_hi)),
    };
    let interp = |t: S| hermite(&a, &b, t);
    let event = |x: &[S]| system.jump_event(x);
    let root = bisect(
        (*t_lo, x_lo.to_vec(), e_lo),
        (*t_hi, x_hi.to_vec(), e_hi),
        event_tol,
        &interp,
        &event,
    );
    Ok(classify(system, root.t, root.x, e_lo, event_tol))
}

/// Decides whether a located crossing is an admissible jump.
pub(crate) fn classify<S: Scalar>(
    system: &SystemSpec<S>,
    t: S,
    x: Vec<S>,
    e_before: S,
    event_tol: S,
) -> EventLocation<S> {
    let rate = system.jump_event_rate(t, &x);
    // Crossing must move e towards the side opposite to where it started.
    let transversal = if e_before > S::zero() {
        rate < -event_tol
    } else {
        rate > event_tol
    };
    let x = StateVector::new(x);
    if system.jump_predicate(&x) && transversal {
        EventLocation::Crossing { t, x }
    } else {
        EventLocation::Spurious { t, x }
    }
}
