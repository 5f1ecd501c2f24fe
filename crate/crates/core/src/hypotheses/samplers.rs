//! Point samplers for the jump set `D` and its image `G(D)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::metrics::optimize::project_to_surface;
use crate::scalar::Scalar;
use crate::state::norm;
use crate::system::SystemSpec;

/// Draws points of a surface of `system`. Deterministic for a given seed.
pub trait SurfaceSampler<S: Scalar>: Sync {
    /// Up to `n` points of the surface.
    fn sample(&self, system: &SystemSpec<S>, n: usize, seed: u64) -> Vec<Vec<S>>;

    /// Up to `n` points of the surface with norm in `[r_lo, r_hi)`.
    fn sample_shell(&self, system: &SystemSpec<S>, r_lo: S, r_hi: S, n: usize, seed: u64) -> Vec<Vec<S>>;

    fn describe(&self) -> String;
}

fn uniform<S: Scalar>(rng: &mut ChaCha8Rng, lo: S, hi: S) -> S {
    if lo == hi {
        return lo;
    }
    lo + (hi - lo) * S::lit(rng.gen::<f64>())
}

/// Samples `D` through the system's chart. Infinite parameter bounds are cut
/// to a window of width `span` next to the finite end (or around 0).
#[derive(Debug, Clone, Copy)]
pub struct ChartSampler<S> {
    pub span: S,
}

impl<S: Scalar> Default for ChartSampler<S> {
    fn default() -> Self {
        Self { span: S::lit(4.0) }
    }
}

fn window<S: Scalar>(lo: S, hi: S, span: S) -> (S, S) {
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => (lo, hi),
        (true, false) => (lo, lo + span),
        (false, true) => (hi - span, hi),
        (false, false) => (-span, span),
    }
}

impl<S: Scalar> SurfaceSampler<S> for ChartSampler<S> {
    fn sample(&self, system: &SystemSpec<S>, n: usize, seed: u64) -> Vec<Vec<S>> {
        let Some(chart) = system.jump_chart() else {
            return Vec::new();
        };
        let boxes: Vec<(S, S)> = chart.bounds().iter().map(|&(lo, hi)| window(lo, hi, self.span)).collect();
        let mut out = Vec::with_capacity(n);
        // Finite corners first: boundary cases such as tangential contact
        // sit there.
        let corners: Vec<Vec<S>> = (0..(1usize << boxes.len()))
            .map(|mask| {
                chart
                    .bounds()
                    .iter()
                    .enumerate()
                    .map(|(i, &(lo, hi))| if (mask >> i) & 1 == 0 { lo } else { hi })
                    .collect::<Vec<S>>()
            })
            .filter(|p| p.iter().all(|v| v.is_finite()))
            .collect();
        for p in corners.into_iter().take(n) {
            out.push(chart.point(&p));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        while out.len() < n {
            let p: Vec<S> = boxes.iter().map(|&(lo, hi)| uniform(&mut rng, lo, hi)).collect();
            out.push(chart.point(&p));
        }
        out
    }

    fn sample_shell(&self, system: &SystemSpec<S>, r_lo: S, r_hi: S, n: usize, seed: u64) -> Vec<Vec<S>> {
        let Some(chart) = system.jump_chart() else {
            return Vec::new();
        };
        let reach = S::lit(2.0) * r_hi + S::one();
        let boxes: Vec<(S, S)> = chart
            .bounds()
            .iter()
            .map(|&(lo, hi)| (lo.max(-reach), hi.min(reach)))
            .collect();
        if boxes.iter().any(|(lo, hi)| lo > hi) {
            return Vec::new();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n * 200 {
            if out.len() >= n {
                break;
            }
            let p: Vec<S> = boxes.iter().map(|&(lo, hi)| uniform(&mut rng, lo, hi)).collect();
            let z = chart.point(&p);
            let r = norm(&z);
            if r >= r_lo && r < r_hi {
                out.push(z);
            }
        }
        out
    }

    fn describe(&self) -> String {
        format!("chart sampler (window {})", self.span)
    }
}

/// Uniform points of a box projected onto `e = 0`, kept when the predicate holds.
#[derive(Debug, Clone)]
pub struct RejectionSampler<S> {
    pub lo: Vec<S>,
    pub hi: Vec<S>,
}

impl<S: Scalar> RejectionSampler<S> {
    fn accept(&self, system: &SystemSpec<S>, p: &[S]) -> Option<Vec<S>> {
        let e = |z: &[S]| system.jump_event(z);
        let z = project_to_surface(&e, p, system.membership_tol())?;
        system.jump_predicate(&z).then_some(z)
    }
}

impl<S: Scalar> SurfaceSampler<S> for RejectionSampler<S> {
    fn sample(&self, system: &SystemSpec<S>, n: usize, seed: u64) -> Vec<Vec<S>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n * 50 {
            if out.len() >= n {
                break;
            }
            let p: Vec<S> = self.lo.iter().zip(&self.hi).map(|(&a, &b)| uniform(&mut rng, a, b)).collect();
            if let Some(z) = self.accept(system, &p) {
                let inside = z.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| v >= a && v <= b);
                if inside {
                    out.push(z);
                }
            }
        }
        out
    }

    fn sample_shell(&self, system: &SystemSpec<S>, r_lo: S, r_hi: S, n: usize, seed: u64) -> Vec<Vec<S>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = system.dimension();
        let mut out = Vec::with_capacity(n);
        for _ in 0..n * 200 {
            if out.len() >= n {
                break;
            }
            let p: Vec<S> = (0..dim).map(|_| uniform(&mut rng, -r_hi, r_hi)).collect();
            if let Some(z) = self.accept(system, &p) {
                let r = norm(&z);
                if r >= r_lo && r < r_hi {
                    out.push(z);
                }
            }
        }
        out
    }

    fn describe(&self) -> String {
        "rejection sampler".into()
    }
}

/// Images `G(z)` of another sampler's points of `D`.
pub struct ImageSampler<'a, S> {
    pub inner: &'a dyn SurfaceSampler<S>,
}

impl<S: Scalar> SurfaceSampler<S> for ImageSampler<'_, S> {
    fn sample(&self, system: &SystemSpec<S>, n: usize, seed: u64) -> Vec<Vec<S>> {
        self.inner.sample(system, n, seed).iter().map(|z| system.jump(z)).collect()
    }

    fn sample_shell(&self, system: &SystemSpec<S>, r_lo: S, r_hi: S, n: usize, seed: u64) -> Vec<Vec<S>> {
        self.inner
            .sample_shell(system, r_lo, r_hi, n, seed)
            .iter()
            .map(|z| system.jump(z))
            .collect()
    }

    fn describe(&self) -> String {
        format!("image of {}", self.inner.describe())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::JumpSetChart;

    fn half_line() -> SystemSpec<f64> {
        SystemSpec::builder(2)
            .flow(|_, x| vec![x[1], 0.0])
            .flow_set(|x| x[0])
            .jump_event(|x| x[0])
            .jump_predicate(|x| x[1] <= -0.5)
            .jump_map(|x| vec![0.0, -0.8 * x[1]])
            .jump_chart(JumpSetChart::new(vec![(f64::NEG_INFINITY, -0.5)], |p| vec![0.0, p[0]]).unwrap())
            .build()
            .unwrap()
    }

    #[test]
    fn chart_sampler_hits_the_finite_end_first() {
        let pts = ChartSampler::default().sample(&half_line(), 50, 1);
        assert_eq!(pts.len(), 50);
        assert_eq!(pts[0], vec![0.0, -0.5]);
        assert!(pts.iter().all(|p| half_line().in_jump_set(p)));
        assert_eq!(pts, ChartSampler::default().sample(&half_line(), 50, 1));
    }

    #[test]
    fn chart_shells_respect_radii() {
        let pts = ChartSampler::default().sample_shell(&half_line(), 8.0, 16.0, 20, 3);
        assert_eq!(pts.len(), 20);
        assert!(pts.iter().all(|p| norm(p) >= 8.0 && norm(p) < 16.0));
    }

    #[test]
    fn rejection_sampler_lands_on_the_surface() {
        let s = RejectionSampler {
            lo: vec![-1.0, -3.0],
            hi: vec![1.0, 3.0],
        };
        let pts = s.sample(&half_line(), 30, 5);
        assert_eq!(pts.len(), 30);
        assert!(pts.iter().all(|p| half_line().in_jump_set(p)));
    }

    #[test]
    fn image_sampler_maps_through_g() {
        let inner = ChartSampler::default();
        let img = ImageSampler { inner: &inner };
        let pts = img.sample(&half_line(), 5, 2);
        assert_eq!(pts[0], vec![0.0, 0.4]);
    }
}
