//! Hybrid system data `(C, F, D, G)`.
//!
//! The flow set is the superlevel set `C = {x : c(x) ≥ 0}` of a scalar
//! function, the jump set is `D = {x : e(x) = 0 ∧ p(x)}` for an event
//! function `e` and a membership predicate `p`. Flow and jump maps are
//! single-valued.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::scalar::Scalar;
use crate::state::{dot, norm};

pub type FlowFn<S> = Arc<dyn Fn(S, &[S]) -> Vec<S> + Send + Sync>;
pub type ScalarFn<S> = Arc<dyn Fn(&[S]) -> S + Send + Sync>;
pub type VectorFn<S> = Arc<dyn Fn(&[S]) -> Vec<S> + Send + Sync>;
pub type PredicateFn<S> = Arc<dyn Fn(&[S]) -> bool + Send + Sync>;
pub type ChartFn<S> = Arc<dyn Fn(&[S]) -> Vec<S> + Send + Sync>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error("system is missing its {0}")]
    Missing(&'static str),
    #[error("{what} returned a vector of length {found}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("system dimension must be positive")]
    ZeroDimension,
    #[error("jump set chart: {0}")]
    InvalidChart(String),
}

/// Declared extent of the jump set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SetBound<S> {
    /// `D ⊆ {‖x‖ ≤ radius}`.
    Bounded { radius: S },
    Unbounded,
}

/// Explicit parameterization `σ ↦ z(σ) ∈ D` over a box of parameters.
///
/// Bounds may be infinite. Used for exact minimization over `D` and for
/// sampling points of `D`.
#[derive(Clone)]
pub struct JumpSetChart<S> {
    bounds: Vec<(S, S)>,
    point: ChartFn<S>,
}

impl<S: Scalar> JumpSetChart<S> {
    pub fn new(
        bounds: Vec<(S, S)>,
        point: impl Fn(&[S]) -> Vec<S> + Send + Sync + 'static,
    ) -> Result<Self, SystemError> {
        if bounds.is_empty() {
            return Err(SystemError::InvalidChart("no parameters".into()));
        }
        for &(lo, hi) in &bounds {
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err(SystemError::InvalidChart(format!(
                    "parameter bounds [{lo}, {hi}] are empty"
                )));
            }
        }
        Ok(Self {
            bounds,
            point: Arc::new(point),
        })
    }

    pub fn param_dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(S, S)] {
        &self.bounds
    }

    pub fn point(&self, params: &[S]) -> Vec<S> {
        (self.point)(params)
    }

    pub fn clamp(&self, params: &mut [S]) {
        for (p, &(lo, hi)) in params.iter_mut().zip(&self.bounds) {
            *p = p.max(lo).min(hi);
        }
    }
}

impl<S: Scalar> fmt::Debug for JumpSetChart<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JumpSetChart")
            .field("bounds", &self.bounds)
            .finish_non_exhaustive()
    }
}

/// Level-set description of the image `G(D)`.
#[derive(Clone)]
pub struct ImageSurface<S> {
    pub event: ScalarFn<S>,
    pub predicate: PredicateFn<S>,
}

/// The hybrid system `ẋ = F(t, x), x ∈ C;  x⁺ = G(x), x ∈ D`.
///
/// Cheap to clone: every map is reference counted.
#[derive(Clone)]
pub struct SystemSpec<S> {
    name: String,
    dimension: usize,
    flow_field: FlowFn<S>,
    flow_set_fn: ScalarFn<S>,
    flow_set_gradient: Option<VectorFn<S>>,
    jump_event_fn: ScalarFn<S>,
    jump_predicate: PredicateFn<S>,
    jump_map: VectorFn<S>,
    jump_map_preimage: Option<VectorFn<S>>,
    image_surface: Option<ImageSurface<S>>,
    jump_chart: Option<JumpSetChart<S>>,
    jump_set_bound: SetBound<S>,
    membership_tol: S,
}

impl<S: Scalar> fmt::Debug for SystemSpec<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemSpec")
            .field("name", &self.name)
            .field("dimension", &self.dimension)
            .field("jump_set_bound", &self.jump_set_bound)
            .field("chart", &self.jump_chart)
            .finish_non_exhaustive()
    }
}

impl<S: Scalar> SystemSpec<S> {
    pub fn builder(dimension: usize) -> SystemBuilder<S> {
        SystemBuilder::new(dimension)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn membership_tol(&self) -> S {
        self.membership_tol
    }

    pub fn jump_set_bound(&self) -> SetBound<S> {
        self.jump_set_bound
    }

    pub fn jump_chart(&self) -> Option<&JumpSetChart<S>> {
        self.jump_chart.as_ref()
    }

    pub fn flow(&self, t: S, x: &[S]) -> Vec<S> {
        (self.flow_field)(t, x)
    }

    /// `c(x)`; the flow set is `c ≥ 0`.
    pub fn flow_set_value(&self, x: &[S]) -> S {
        (self.flow_set_fn)(x)
    }

    pub fn flow_set_gradient(&self, x: &[S]) -> Vec<S> {
        match &self.flow_set_gradient {
            Some(g) => g(x),
            None => finite_difference_gradient(&*self.flow_set_fn, x),
        }
    }

    /// `e(x)`; the jump surface is `e = 0`.
    pub fn jump_event(&self, x: &[S]) -> S {
        (self.jump_event_fn)(x)
    }

    pub fn jump_event_gradient(&self, x: &[S]) -> Vec<S> {
        finite_difference_gradient(&*self.jump_event_fn, x)
    }

    pub fn jump_predicate(&self, x: &[S]) -> bool {
        (self.jump_predicate)(x)
    }

    pub fn jump(&self, x: &[S]) -> Vec<S> {
        (self.jump_map)(x)
    }

    pub fn jump_preimage(&self, y: &[S]) -> Option<Vec<S>> {
        self.jump_map_preimage.as_ref().map(|g| g(y))
    }

    pub fn has_image_surface(&self) -> bool {
        self.image_surface.is_some() || self.jump_map_preimage.is_some()
    }

    pub fn in_flow_set(&self, x: &[S]) -> bool {
        self.flow_set_value(x) >= -self.membership_tol
    }

    pub fn in_jump_set(&self, x: &[S]) -> bool {
        self.jump_event(x).abs() <= self.membership_tol && self.jump_predicate(x)
    }

    /// Level function of `G(D)`: the explicit image surface when supplied,
    /// else `e(G⁻¹(y))` when a preimage map is known.
    pub fn image_event(&self, y: &[S]) -> Option<S> {
        if let Some(surface) = &self.image_surface {
            return Some((surface.event)(y));
        }
        self.jump_preimage(y).map(|z| self.jump_event(&z))
    }

    pub fn image_predicate(&self, y: &[S]) -> Option<bool> {
        if let Some(surface) = &self.image_surface {
            return Some((surface.predicate)(y));
        }
        self.jump_preimage(y).map(|z| self.jump_predicate(&z))
    }

    /// Membership in `G(D)`, when it can be decided.
    pub fn in_jump_image(&self, y: &[S]) -> Option<bool> {
        let e = self.image_event(y)?;
        let p = self.image_predicate(y)?;
        Some(e.abs() <= self.membership_tol && p)
    }

    /// Membership in `C ∪ D ∪ G(D)`.
    pub fn in_state_space(&self, x: &[S]) -> bool {
        self.in_flow_set(x) || self.in_jump_set(x) || self.in_jump_image(x) == Some(true)
    }

    /// Evaluates the flow and jump maps at `x` and checks their output length.
    pub fn check_dimensions(&self, x: &[S]) -> Result<(), SystemError> {
        let n = self.dimension;
        if x.len() != n {
            return Err(SystemError::DimensionMismatch {
                what: "state",
                expected: n,
                found: x.len(),
            });
        }
        let f = self.flow(S::zero(), x);
        if f.len() != n {
            return Err(SystemError::DimensionMismatch {
                what: "flow field",
                expected: n,
                found: f.len(),
            });
        }
        let g = self.jump(x);
        if g.len() != n {
            return Err(SystemError::DimensionMismatch {
                what: "jump map",
                expected: n,
                found: g.len(),
            });
        }
        Ok(())
    }

    /// Replaces the flow field, keeping all set data. Used to attach inputs.
    pub fn with_flow_field(
        &self,
        flow: impl Fn(S, &[S]) -> Vec<S> + Send + Sync + 'static,
    ) -> Self {
        let mut out = self.clone();
        out.flow_field = Arc::new(flow);
        out
    }

    pub fn with_jump_map(&self, jump: impl Fn(&[S]) -> Vec<S> + Send + Sync + 'static) -> Self {
        let mut out = self.clone();
        out.jump_map = Arc::new(jump);
        out.jump_map_preimage = None;
        out.image_surface = None;
        out
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Signed distance estimate `e(x)/‖∇e(x)‖` to the jump surface.
    pub fn jump_surface_distance(&self, x: &[S]) -> S {
        let g = self.jump_event_gradient(x);
        let n = norm(&g);
        if n > S::zero() {
            self.jump_event(x) / n
        } else {
            self.jump_event(x)
        }
    }

    /// Rate of change of `e` along the flow.
    pub fn jump_event_rate(&self, t: S, x: &[S]) -> S {
        dot(&self.jump_event_gradient(x), &self.flow(t, x))
    }
}

/// Central-difference gradient of a scalar field.
pub fn finite_difference_gradient<S: Scalar>(f: &dyn Fn(&[S]) -> S, x: &[S]) -> Vec<S> {
    let base_step = S::epsilon().cbrt();
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = base_step * x[i].abs().max(S::one());
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (h + h)
        })
        .collect()
}

pub struct SystemBuilder<S> {
    name: String,
    dimension: usize,
    flow_field: Option<FlowFn<S>>,
    flow_set_fn: Option<ScalarFn<S>>,
    flow_set_gradient: Option<VectorFn<S>>,
    jump_event_fn: Option<ScalarFn<S>>,
    jump_predicate: Option<PredicateFn<S>>,
    jump_map: Option<VectorFn<S>>,
    jump_map_preimage: Option<VectorFn<S>>,
    image_surface: Option<ImageSurface<S>>,
    jump_chart: Option<JumpSetChart<S>>,
    jump_set_bound: SetBound<S>,
    membership_tol: S,
}

impl<S: Scalar> SystemBuilder<S> {
    fn new(dimension: usize) -> Self {
        Self {
            name: String::from("system"),
            dimension,
            flow_field: None,
            flow_set_fn: None,
            flow_set_gradient: None,
            jump_event_fn: None,
            jump_predicate: None,
            jump_map: None,
            jump_map_preimage: None,
            image_surface: None,
            jump_chart: None,
            jump_set_bound: SetBound::Unbounded,
            membership_tol: S::lit(1e-9),
        }
    }

    pub fn name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn flow(mut self, f: impl Fn(S, &[S]) -> Vec<S> + Send + Sync + 'static) -> Self {
        self.flow_field = Some(Arc::new(f));
        self
    }

    pub fn flow_set(mut self, c: impl Fn(&[S]) -> S + Send + Sync + 'static) -> Self {
        self.flow_set_fn = Some(Arc::new(c));
        self
    }

    pub fn flow_set_gradient(mut self, g: impl Fn(&[S]) -> Vec<S> + Send + Sync + 'static) -> Self {
        self.flow_set_gradient = Some(Arc::new(g));
        self
    }

    pub fn jump_event(mut self, e: impl Fn(&[S]) -> S + Send + Sync + 'static) -> Self {
        self.jump_event_fn = Some(Arc::new(e));
        self
    }

    pub fn jump_predicate(mut self, p: impl Fn(&[S]) -> bool + Send + Sync + 'static) -> Self {
        self.jump_predicate = Some(Arc::new(p));
        self
    }

    pub fn jump_map(mut self, g: impl Fn(&[S]) -> Vec<S> + Send + Sync + 'static) -> Self {
        self.jump_map = Some(Arc::new(g));
        self
    }

    /// Inverse of the jump map on `G(D)`; enables the derived `G(D)` surface.
    pub fn jump_map_preimage(mut self, g: impl Fn(&[S]) -> Vec<S> + Send + Sync + 'static) -> Self {
        self.jump_map_preimage = Some(Arc::new(g));
        self
    }

    pub fn image_surface(
        mut self,
        event: impl Fn(&[S]) -> S + Send + Sync + 'static,
        predicate: impl Fn(&[S]) -> bool + Send + Sync + 'static,
    ) -> Self {
        self.image_surface = Some(ImageSurface {
            event: Arc::new(event),
            predicate: Arc::new(predicate),
        });
        self
    }

    pub fn jump_chart(mut self, chart: JumpSetChart<S>) -> Self {
        self.jump_chart = Some(chart);
        self
    }

    pub fn jump_set_bound(mut self, bound: SetBound<S>) -> Self {
        self.jump_set_bound = bound;
        self
    }

    pub fn membership_tol(mut self, tol: S) -> Self {
        self.membership_tol = tol;
        self
    }

    pub fn build(self) -> Result<SystemSpec<S>, SystemError> {
        if self.dimension == 0 {
            return Err(SystemError::ZeroDimension);
        }
        Ok(SystemSpec {
            name: self.name,
            dimension: self.dimension,
            flow_field: self.flow_field.ok_or(SystemError::Missing("flow field"))?,
            flow_set_fn: self.flow_set_fn.ok_or(SystemError::Missing("flow set function"))?,
            flow_set_gradient: self.flow_set_gradient,
            jump_event_fn: self.jump_event_fn.ok_or(SystemError::Missing("jump event function"))?,
            jump_predicate: self.jump_predicate.unwrap_or_else(|| Arc::new(|_: &[S]| true)),
            jump_map: self.jump_map.ok_or(SystemError::Missing("jump map"))?,
            jump_map_preimage: self.jump_map_preimage,
            image_surface: self.image_surface,
            jump_chart: self.jump_chart,
            jump_set_bound: self.jump_set_bound,
            membership_tol: self.membership_tol,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wall() -> SystemSpec<f64> {
        SystemSpec::builder(2)
            .flow(|_, x| vec![x[1], -1.0])
            .flow_set(|x| x[0])
            .jump_event(|x| x[0])
            .jump_predicate(|x| x[1] <= 0.0)
            .jump_map(|x| vec![x[0], -0.5 * x[1]])
            .jump_map_preimage(|y| vec![y[0], -2.0 * y[1]])
            .build()
            .unwrap()
    }

    #[test]
    fn memberships() {
        let s = wall();
        assert!(s.in_flow_set(&[0.2, 3.0]));
        assert!(!s.in_flow_set(&[-0.2, 3.0]));
        assert!(s.in_jump_set(&[0.0, -1.0]));
        assert!(!s.in_jump_set(&[0.0, 1.0]));
        assert_eq!(s.in_jump_image(&[0.0, 1.0]), Some(true));
        assert_eq!(s.in_jump_image(&[0.0, -1.0]), Some(false));
        assert!(s.in_state_space(&[0.0, -4.0]));
    }

    #[test]
    fn finite_difference_gradient_matches_linear_field() {
        let s = wall();
        let g = s.flow_set_gradient(&[0.3, -2.0]);
        assert!((g[0] - 1.0).abs() < 1e-9 && g[1].abs() < 1e-9);
        assert!((s.jump_event_rate(0.0, &[0.0, -2.0]) + 2.0).abs() < 1e-8);
    }

    #[test]
    fn missing_pieces_are_reported() {
        let err = SystemSpec::<f64>::builder(1)
            .flow(|_, _| vec![1.0])
            .build()
            .unwrap_err();
        assert_eq!(err, SystemError::Missing("flow set function"));
        assert_eq!(
            SystemSpec::<f64>::builder(0).build().unwrap_err(),
            SystemError::ZeroDimension
        );
    }

    #[test]
    fn dimension_check() {
        let bad = wall().with_jump_map(|x| vec![x[0]]);
        assert!(matches!(
            bad.check_dimensions(&[1.0, 0.0]),
            Err(SystemError::DimensionMismatch { what: "jump map", .. })
        ));
    }

    #[test]
    fn chart_rejects_empty_bounds() {
        assert!(JumpSetChart::<f64>::new(vec![(1.0, 0.0)], |p| vec![p[0]]).is_err());
        let c = JumpSetChart::new(vec![(f64::NEG_INFINITY, -0.5)], |p| vec![0.0, p[0]]).unwrap();
        let mut p = [3.0];
        c.clamp(&mut p);
        assert_eq!(p, [-0.5]);
    }
}
