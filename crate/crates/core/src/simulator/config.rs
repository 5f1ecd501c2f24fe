use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Step-size, tolerance and termination settings for hybrid simulation.
///
/// JSON keys mirror the field names; omitted keys take the defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar", default)]
pub struct IntegratorConfig<S> {
    pub step_initial: S,
    pub step_min: S,
    pub step_max: S,
    pub rel_tol: S,
    pub abs_tol: S,
    /// Bracket width and residual bound for located events.
    pub event_tol: S,
    pub jump_cap: usize,
    pub horizon: S,
    /// Zeno guard: most jumps allowed within any unit of continuous time.
    pub max_jumps_per_unit_time: usize,
    pub max_steps: usize,
}

impl<S: Scalar> Default for IntegratorConfig<S> {
    fn default() -> Self {
        Self {
            step_initial: S::lit(1e-3),
            step_min: S::lit(1e-12),
            step_max: S::lit(0.05),
            rel_tol: S::lit(1e-9),
            abs_tol: S::lit(1e-12),
            event_tol: S::lit(1e-10),
            jump_cap: 100_000,
            horizon: S::lit(20.0),
            max_jumps_per_unit_time: 1000,
            max_steps: 10_000_000,
        }
    }
}

impl<S: Scalar> IntegratorConfig<S> {
    pub fn with_horizon(mut self, horizon: S) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_jump_cap(mut self, cap: usize) -> Self {
        self.jump_cap = cap;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        let pos = |name: &str, v: S| {
            if v > S::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(format!("{name} must be positive and finite, got {v}"))
            }
        };
        pos("step_min", self.step_min)?;
        pos("step_initial", self.step_initial)?;
        pos("step_max", self.step_max)?;
        pos("rel_tol", self.rel_tol)?;
        pos("abs_tol", self.abs_tol)?;
        pos("event_tol", self.event_tol)?;
        if !(self.step_min <= self.step_initial && self.step_initial <= self.step_max) {
            return Err("need step_min <= step_initial <= step_max".into());
        }
        if !(self.horizon >= S::zero()) || !self.horizon.is_finite() {
            return Err(format!("horizon must be finite and non-negative, got {}", self.horizon));
        }
        if self.max_jumps_per_unit_time == 0 {
            return Err("max_jumps_per_unit_time must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = IntegratorConfig::<f64>::default();
        assert!(c.validate().is_ok());
        assert_eq!(c.rel_tol, 1e-9);
        assert_eq!(c.abs_tol, 1e-12);
        assert_eq!(c.event_tol, 1e-10);
    }

    #[test]
    fn partial_json_uses_defaults() {
        let c: IntegratorConfig<f64> = serde_json::from_str(r#"{"horizon": 3.5, "jump_cap": 2}"#).unwrap();
        assert_eq!(c.horizon, 3.5);
        assert_eq!(c.jump_cap, 2);
        assert_eq!(c.step_max, 0.05);
    }

    #[test]
    fn rejects_inconsistent_steps() {
        let mut c = IntegratorConfig::<f64>::default();
        c.step_min = 1.0;
        assert!(c.validate().is_err());
        c = IntegratorConfig::default();
        c.event_tol = 0.0;
        assert!(c.validate().is_err());
    }
}
