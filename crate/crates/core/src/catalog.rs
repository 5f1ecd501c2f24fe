//! Small reference systems with closed-form behaviour.

use crate::scalar::Scalar;
use crate::system::{JumpSetChart, SetBound, SystemSpec};

/// A ball under unit gravity bouncing on `x₁ = 0`:
/// `ẋ = (x₂, −1)` on `x₁ ≥ 0`, jumping by `x⁺ = (x₁, −λ x₂)` when `x₁ = 0`
/// and `x₂ ≤ −threshold`.
pub fn bouncing_ball<S: Scalar>(restitution: S, threshold: S) -> SystemSpec<S> {
    SystemSpec::builder(2)
        .name("bouncing_ball")
        .flow(|_, x| vec![x[1], -S::one()])
        .flow_set(|x| x[0])
        .flow_set_gradient(|_| vec![S::one(), S::zero()])
        .jump_event(|x| x[0])
        .jump_predicate(move |x| x[1] <= -threshold)
        .jump_map(move |x| vec![x[0], -restitution * x[1]])
        .jump_map_preimage(move |y| vec![y[0], -y[1] / restitution])
        .jump_chart(
            JumpSetChart::new(vec![(S::neg_infinity(), -threshold)], |s| vec![S::zero(), s[0]])
                .expect("valid chart"),
        )
        .jump_set_bound(SetBound::Unbounded)
        .build()
        .expect("bouncing ball is well formed")
}

/// `ẋ = rate` on the whole line with an empty jump set.
pub fn constant_drift<S: Scalar>(rate: S) -> SystemSpec<S> {
    SystemSpec::builder(1)
        .name("constant_drift")
        .flow(move |_, _| vec![rate])
        .flow_set(|_| S::one())
        .jump_event(|_| S::one())
        .jump_predicate(|_| false)
        .jump_map(|x| x.to_vec())
        .jump_set_bound(SetBound::Bounded { radius: S::zero() })
        .build()
        .expect("drift is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{simulate, IntegratorConfig};
    use crate::state::StateVector;

    #[test]
    fn drift_is_linear() {
        let arc = simulate(
            &constant_drift(1.0f64),
            &StateVector::from_f64(&[0.0]),
            &IntegratorConfig::default().with_horizon(1.0),
        )
        .unwrap();
        let x = arc.state_at(0.5, 0).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-12);
        assert!(arc.state_at(5.0, 0).is_err());
    }

    #[test]
    fn ball_jump_set_matches_predicate() {
        let ball = bouncing_ball(0.5f64, 0.0);
        assert!(ball.in_jump_set(&[0.0, -1.0]));
        assert!(!ball.in_jump_set(&[0.0, 1.0]));
        assert_eq!(ball.jump(&[0.0, -2.0]), vec![0.0, 1.0]);
    }
}
