//! Small derivative-free minimizers used by the distance computations.

use crate::scalar::Scalar;
use crate::state::{dot, squared_distance};
use crate::system::finite_difference_gradient;

const GOLDEN: f64 = 0.381_966_011_250_105_1;

/// Golden-section search for a unimodal `f` on `[a, b]`.
pub(crate) fn golden_section<S: Scalar>(f: &dyn Fn(S) -> S, mut a: S, mut b: S, tol: S) -> (S, S) {
    let g = S::lit(GOLDEN);
    let mut c = a + g * (b - a);
    let mut d = b - g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= tol * (S::one() + c.abs()) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = a + g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = b - g * (b - a);
            fd = f(d);
        }
    }
    let (fa, fb) = (f(a), f(b));
    [(c, fc), (d, fd), (a, fa), (b, fb)]
        .into_iter()
        .fold((c, fc), |best, cand| if cand.1 < best.1 { cand } else { best })
}

/// Global minimization of `f` over an interval whose ends may be infinite:
/// a coarse scan, widened while the minimum sits on an open side, then
/// golden-section refinement around the best scan point.
pub(crate) fn minimize_interval<S: Scalar>(f: &dyn Fn(S) -> S, lo: S, hi: S, scale: S) -> (S, S) {
    const SCAN: usize = 48;
    let mut width = scale.max(S::one());
    for _ in 0..64 {
        let a = if lo.is_finite() {
            lo
        } else if hi.is_finite() {
            hi - width
        } else {
            -width
        };
        let b = if hi.is_finite() {
            hi
        } else if lo.is_finite() {
            lo + width
        } else {
            width
        };
        let step = (b - a) / S::from_usize(SCAN);
        let mut best = (0, f(a));
        for i in 1..=SCAN {
            let v = f(a + step * S::from_usize(i));
            if v < best.1 {
                best = (i, v);
            }
        }
        let open_low = !lo.is_finite() && best.0 == 0;
        let open_high = !hi.is_finite() && best.0 == SCAN;
        if (open_low || open_high) && width < S::max_value().sqrt() {
            width = width * S::lit(4.0);
            continue;
        }
        let left = a + step * S::from_usize(best.0.saturating_sub(1));
        let right = a + step * S::from_usize((best.0 + 1).min(SCAN));
        let refined = golden_section(f, left, right, S::epsilon().sqrt() * S::lit(1e-2));
        let scan_point = (a + step * S::from_usize(best.0), best.1);
        return if refined.1 <= scan_point.1 { refined } else { scan_point };
    }
    (S::nan(), S::infinity())
}

/// Cyclic coordinate descent with golden-section line searches inside a box.
pub(crate) fn coordinate_descent<S: Scalar>(
    f: &dyn Fn(&[S]) -> S,
    start: &[S],
    bounds: &[(S, S)],
    radius: S,
) -> (Vec<S>, S) {
    let mut p = start.to_vec();
    let mut value = f(&p);
    let mut span = radius.max(S::one());
    for _ in 0..40 {
        let before = value;
        for i in 0..p.len() {
            let lo = bounds[i].0.max(p[i] - span);
            let hi = bounds[i].1.min(p[i] + span);
            let line = |s: S| {
                let mut q = p.clone();
                q[i] = s;
                f(&q)
            };
            let (s, v) = golden_section(&line, lo, hi, S::epsilon().sqrt() * S::lit(1e-2));
            if v < value {
                p[i] = s;
                value = v;
            }
        }
        if before - value <= S::epsilon() * (S::one() + value.abs()) {
            break;
        }
        span = span * S::lit(0.5);
    }
    (p, value)
}

/// Newton projection onto the zero set of `e`. `None` when it fails to reach
/// `|e| ≤ tol` or the gradient degenerates.
pub(crate) fn project_to_surface<S: Scalar>(e: &dyn Fn(&[S]) -> S, z0: &[S], tol: S) -> Option<Vec<S>> {
    let mut z = z0.to_vec();
    for _ in 0..60 {
        let v = e(&z);
        if !v.is_finite() {
            return None;
        }
        if v.abs() <= tol {
            return Some(z);
        }
        let g = finite_difference_gradient(e, &z);
        let gg = dot(&g, &g);
        if !(gg > S::zero()) {
            return None;
        }
        let s = v / gg;
        for (zi, gi) in z.iter_mut().zip(&g) {
            *zi -= s * *gi;
        }
    }
    (e(&z).abs() <= tol).then_some(z)
}

/// Local minimization of `f` on `{e = 0} ∩ feasible` by tangential gradient
/// steps followed by re-projection; trial points failing `feasible` are
/// treated as uphill. Returns the final point, its value, and whether the
/// iteration converged. `None` when the projected start is infeasible.
pub(crate) fn surface_descent<S: Scalar>(
    f: &dyn Fn(&[S]) -> S,
    e: &dyn Fn(&[S]) -> S,
    feasible: &dyn Fn(&[S]) -> bool,
    z0: &[S],
    tol: S,
) -> Option<(Vec<S>, S, bool)> {
    let mut z = project_to_surface(e, z0, tol)?;
    if !feasible(&z) {
        return None;
    }
    let mut value = f(&z);
    let mut alpha = S::lit(0.5);
    for _ in 0..500 {
        let g = finite_difference_gradient(f, &z);
        let n = finite_difference_gradient(e, &z);
        let nn = dot(&n, &n);
        let gn = if nn > S::zero() { dot(&g, &n) / nn } else { S::zero() };
        let tangent: Vec<S> = g.iter().zip(&n).map(|(&gi, &ni)| gi - gn * ni).collect();
        let size = dot(&tangent, &tangent).sqrt();
        if size <= S::epsilon().sqrt() * (S::one() + value.abs()) {
            return Some((z, value, true));
        }
        let mut improved = false;
        while alpha * size > S::epsilon() * (S::one() + dot(&z, &z).sqrt()) {
            let trial: Vec<S> = z.iter().zip(&tangent).map(|(&zi, &ti)| zi - alpha * ti).collect();
            if let Some(p) = project_to_surface(e, &trial, tol).filter(|p| feasible(p)) {
                let v = f(&p);
                if v < value {
                    let moved = squared_distance(&p, &z).sqrt();
                    z = p;
                    value = v;
                    alpha = alpha * S::lit(2.0);
                    improved = true;
                    if moved <= S::epsilon().sqrt() * S::lit(1e-3) {
                        return Some((z, value, true));
                    }
                    break;
                }
            }
            alpha = alpha * S::lit(0.5);
        }
        if !improved {
            return Some((z, value, true));
        }
    }
    Some((z, value, false))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_vertex() {
        let (x, v) = golden_section(&|x: f64| (x - 0.3).powi(2) + 1.0, -2.0, 5.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-7);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interval_search_expands_open_side() {
        let (x, _) = minimize_interval(&|x: f64| (x + 37.0).powi(2), f64::NEG_INFINITY, -0.5, 1.0);
        assert!((x + 37.0).abs() < 1e-6, "{x}");
        let (x, v) = minimize_interval(&|x: f64| (x - 2.0).powi(2), f64::NEG_INFINITY, -0.5, 1.0);
        assert_eq!(x, -0.5);
        assert_eq!(v, 6.25);
    }

    #[test]
    fn surface_descent_on_circle() {
        let e = |z: &[f64]| z[0] * z[0] + z[1] * z[1] - 1.0;
        let f = |z: &[f64]| (z[0] - 3.0).powi(2) + (z[1] - 4.0).powi(2);
        let (z, v, ok) = surface_descent(&f, &e, &|_| true, &[1.0, 0.0], 1e-12).unwrap();
        assert!(ok);
        assert!((z[0] - 0.6).abs() < 1e-5 && (z[1] - 0.8).abs() < 1e-5, "{z:?}");
        assert!((v - 16.0).abs() < 1e-8);
        // Restricted to the lower half circle the optimum moves to (1, 0).
        let (z, _, _) = surface_descent(&f, &e, &|z| z[1] <= 0.0, &[0.0, -1.0], 1e-12).unwrap();
        assert!((z[0] - 1.0).abs() < 1e-5 && z[1].abs() < 1e-5, "{z:?}");
    }

    #[test]
    fn projection_fails_on_flat_function() {
        assert!(project_to_surface(&|_: &[f64]| 1.0, &[0.0, 0.0], 1e-9).is_none());
    }
}
