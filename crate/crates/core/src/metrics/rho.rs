//! The distance `ρ_𝒜(x, y)` from a state pair to the set `𝒜` of equivalent
//! pairs: equal states, or one state being the jump image of the other.

use serde::{Deserialize, Serialize};

use super::optimize::{coordinate_descent, minimize_interval, surface_descent};
use super::MetricsError;
use crate::scalar::Scalar;
use crate::state::{all_finite, distance, midpoint, norm, squared_distance, StateVector};
use crate::system::{finite_difference_gradient, SystemSpec};

/// The three pieces of `𝒜`: `x = y`, `x = G(z), y = z`, and `x = z, y = G(z)` with `z ∈ D`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    A00,
    A01,
    A10,
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Branch::A00 => "A00",
            Branch::A01 => "A01",
            Branch::A10 => "A10",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct BranchValues<S> {
    #[serde(rename = "A00")]
    pub a00: S,
    #[serde(rename = "A01")]
    pub a01: S,
    #[serde(rename = "A10")]
    pub a10: S,
}

impl<S: Scalar> BranchValues<S> {
    pub fn get(&self, branch: Branch) -> S {
        match branch {
            Branch::A00 => self.a00,
            Branch::A01 => self.a01,
            Branch::A10 => self.a10,
        }
    }

    /// Smallest value; ties resolve in the order A00, A01, A10.
    pub fn argmin(&self) -> (Branch, S) {
        [(Branch::A01, self.a01), (Branch::A10, self.a10)]
            .into_iter()
            .fold((Branch::A00, self.a00), |best, c| if c.1 < best.1 { c } else { best })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct DistanceReport<S> {
    pub value: S,
    pub branch: Branch,
    /// Common point for A00; the minimizing `z ∈ D` for A01/A10.
    pub witness: StateVector<S>,
    pub branch_values: BranchValues<S>,
    /// Set when a search over `D` found no admissible point: `value` is then
    /// only an upper bound.
    pub unknown: bool,
}

const MULTI_STARTS: usize = 8;

pub(crate) struct Candidate<S> {
    pub value: S,
    pub z: Vec<S>,
}

/// Minimizes `h` over `D`. Uses the chart when the system has one, else a
/// multi-start projected descent on `e = 0` filtered by the predicate.
pub(crate) fn minimize_over_jump_set<S: Scalar>(
    system: &SystemSpec<S>,
    h: &dyn Fn(&[S]) -> S,
    hints: &[&[S]],
) -> Option<Candidate<S>> {
    let scale = hints.iter().map(|p| norm(p)).fold(S::one(), S::max);
    if let Some(chart) = system.jump_chart() {
        if chart.param_dim() == 1 {
            let (lo, hi) = chart.bounds()[0];
            let f = |s: S| h(&chart.point(&[s]));
            let (s, value) = minimize_interval(&f, lo, hi, scale);
            if !value.is_finite() {
                return None;
            }
            return Some(Candidate {
                value,
                z: chart.point(&[s]),
            });
        }
        let bounds = chart.bounds();
        let f = |p: &[S]| h(&chart.point(p));
        let mut best: Option<Candidate<S>> = None;
        for k in 0..8 {
            let spread = scale * S::from_usize(k) / S::lit(4.0);
            let mut start: Vec<S> = bounds
                .iter()
                .enumerate()
                .map(|(i, _)| if (i + k) % 2 == 0 { spread } else { -spread })
                .collect();
            chart.clamp(&mut start);
            let (p, value) = coordinate_descent(&f, &start, bounds, scale);
            if value.is_finite() && best.as_ref().map_or(true, |b| value < b.value) {
                best = Some(Candidate {
                    value,
                    z: chart.point(&p),
                });
            }
        }
        return best;
    }

    let e = |z: &[S]| system.jump_event(z);
    let feasible = |z: &[S]| system.jump_predicate(z);
    let tol = system.membership_tol();
    let n = system.dimension();
    // Feasible starts: each hint and axis offsets of it, projected onto e = 0.
    let mut starts: Vec<(S, Vec<S>)> = Vec::new();
    for hint in hints {
        let mut trials = vec![hint.to_vec()];
        for axis in 0..n {
            for mult in [0.25, 1.0, 4.0] {
                for sign in [S::one(), -S::one()] {
                    let mut p = hint.to_vec();
                    p[axis] += sign * S::lit(mult) * scale;
                    trials.push(p);
                }
            }
        }
        for p in trials {
            if let Some(z) = super::optimize::project_to_surface(&e, &p, tol).filter(|z| feasible(z)) {
                let v = h(&z);
                if v.is_finite() && !starts.iter().any(|(_, q)| *q == z) {
                    starts.push((v, z));
                }
            }
        }
    }
    starts.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
    starts.truncate(MULTI_STARTS);
    let mut best: Option<Candidate<S>> = None;
    for (_, start) in starts {
        let Some((z, value, converged)) = surface_descent(h, &e, &feasible, &start, tol) else {
            continue;
        };
        if converged && value.is_finite() && best.as_ref().map_or(true, |b| value < b.value) {
            best = Some(Candidate { value, z });
        }
    }
    best
}

/// Nearest point of `G(D)` to `m`.
fn nearest_in_jump_image<S: Scalar>(system: &SystemSpec<S>, m: &[S]) -> Option<Candidate<S>> {
    if system.jump_chart().is_some() {
        let h = |z: &[S]| squared_distance(m, &system.jump(z));
        return minimize_over_jump_set(system, &h, &[m]).map(|c| Candidate {
            value: c.value,
            z: system.jump(&c.z),
        });
    }
    if !system.has_image_surface() {
        return None;
    }
    let e = |y: &[S]| system.image_event(y).expect("image surface present");
    let h = |y: &[S]| squared_distance(m, y);
    let feasible = |y: &[S]| system.image_predicate(y) == Some(true);
    let (y, value, converged) = surface_descent(&h, &e, &feasible, m, system.membership_tol())?;
    converged.then_some(Candidate { value, z: y })
}

/// Squared distance from `m` to `C ∪ D ∪ G(D)` with the nearest point found.
fn nearest_in_state_space<S: Scalar>(system: &SystemSpec<S>, m: &[S]) -> (S, Vec<S>, bool) {
    if system.in_flow_set(m) {
        return (S::zero(), m.to_vec(), true);
    }
    let mut best = Candidate {
        value: S::infinity(),
        z: m.to_vec(),
    };
    let mut consider = |c: Option<Candidate<S>>| {
        if let Some(c) = c {
            if c.value < best.value {
                best = c;
            }
        }
    };
    let c = |z: &[S]| system.flow_set_value(z);
    let h = |z: &[S]| squared_distance(m, z);
    consider(
        surface_descent(&h, &c, &|_| true, m, system.membership_tol())
            .filter(|(_, _, ok)| *ok)
            .map(|(z, value, _)| Candidate { value, z }),
    );
    consider(minimize_over_jump_set(system, &h, &[m]));
    consider(nearest_in_jump_image(system, m));
    let found = best.value.is_finite();
    (best.value, best.z, found)
}

/// `min_{z∈D} ‖(a − G(z), b − z)‖`.
fn jump_branch<S: Scalar>(system: &SystemSpec<S>, a: &[S], b: &[S]) -> Option<Candidate<S>> {
    let h = |z: &[S]| squared_distance(a, &system.jump(z)) + squared_distance(b, z);
    let pre = system.jump_preimage(a);
    let mut hints: Vec<&[S]> = vec![b, a];
    if let Some(p) = pre.as_deref() {
        hints.push(p);
    }
    minimize_over_jump_set(system, &h, &hints).map(|c| Candidate {
        value: c.value.sqrt(),
        z: c.z,
    })
}

/// Computes `ρ_𝒜(x1, x2)` with its branch decomposition.
pub fn rho_a<S: Scalar>(
    system: &SystemSpec<S>,
    x1: &[S],
    x2: &[S],
) -> Result<DistanceReport<S>, MetricsError> {
    let n = system.dimension();
    for x in [x1, x2] {
        if x.len() != n {
            return Err(MetricsError::Dimension {
                expected: n,
                found: x.len(),
            });
        }
        if !all_finite(x) {
            return Err(MetricsError::NonFinite);
        }
    }

    let gap = distance(x1, x2);
    let half = gap / S::SQRT_2();
    let m = midpoint(x1, x2);
    let (d2, z, found) = nearest_in_state_space(system, &m);
    let mut a00 = Candidate {
        value: (S::SQRT_2() * d2.sqrt()).hypot(half),
        z,
    };
    for x in [x1, x2] {
        if gap < a00.value && system.in_state_space(x) {
            a00 = Candidate { value: gap, z: x.to_vec() };
        }
    }
    a00.value = a00.value.max(half);

    let a01 = jump_branch(system, x1, x2);
    let a10 = jump_branch(system, x2, x1);
    let unknown = (!found && !system.in_state_space(x1) && !system.in_state_space(x2))
        || a01.is_none()
        || a10.is_none();
    let values = BranchValues {
        a00: a00.value,
        a01: a01.as_ref().map_or(S::infinity(), |c| c.value),
        a10: a10.as_ref().map_or(S::infinity(), |c| c.value),
    };
    let (branch, value) = values.argmin();
    let witness = match branch {
        Branch::A00 => a00.z,
        Branch::A01 => a01.expect("finite branch value").z,
        Branch::A10 => a10.expect("finite branch value").z,
    };
    Ok(DistanceReport {
        value,
        branch,
        witness: StateVector::new(witness),
        branch_values: values,
        unknown,
    })
}

/// Axis-aligned grid for [`rho_a_oracle`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct OracleGrid<S> {
    pub lo: Vec<S>,
    pub hi: Vec<S>,
    pub step: S,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleValue<S> {
    pub value: S,
    pub branch_values: BranchValues<S>,
}

/// Discretized `C ∪ D ∪ G(D)` and `D`, precomputed once for repeated oracle
/// queries.
///
/// The state-space mask is stored per grid row (all axes but the first
/// fixed) as runs of consecutive member indices along the first axis.
#[derive(Debug, Clone)]
pub struct OracleTable<S> {
    grid: OracleGrid<S>,
    counts: Vec<usize>,
    rows: Vec<(Vec<S>, Vec<(usize, usize)>)>,
    jump_points: Vec<Vec<S>>,
    jump_images: Vec<Vec<S>>,
}

fn near_level_set<S: Scalar>(f: &dyn Fn(&[S]) -> S, z: &[S], step: S) -> bool {
    let v = f(z);
    if v == S::zero() {
        return true;
    }
    // A grid cell of width `step` around `z` can reach the zero set only if
    // |f| is within the first-order change across the half-diagonal.
    let reach = step * S::lit(0.5) * S::from_usize(z.len()).sqrt();
    let g = finite_difference_gradient(f, z);
    v.abs() <= reach * norm(&g)
}

impl<S: Scalar> OracleTable<S> {
    pub fn build(system: &SystemSpec<S>, grid: OracleGrid<S>) -> Result<Self, MetricsError> {
        let n = system.dimension();
        if grid.lo.len() != n || grid.hi.len() != n {
            return Err(MetricsError::Dimension {
                expected: n,
                found: grid.lo.len().min(grid.hi.len()),
            });
        }
        if !(grid.step > S::zero()) || grid.lo.iter().zip(&grid.hi).any(|(a, b)| !(a <= b)) {
            return Err(MetricsError::InvalidGrid);
        }
        let counts: Vec<usize> = grid
            .lo
            .iter()
            .zip(&grid.hi)
            .map(|(&a, &b)| ((b - a) / grid.step + S::lit(1e-9)).floor().as_f64() as usize + 1)
            .collect();
        let coord = |axis: usize, k: usize| grid.lo[axis] + S::from_usize(k) * grid.step;
        let e = |z: &[S]| system.jump_event(z);
        let image_e = |y: &[S]| system.image_event(y).unwrap_or(S::infinity());
        let has_image = system.has_image_surface();

        let mut rows = Vec::new();
        let mut jump_points = Vec::new();
        let mut jump_images = Vec::new();
        let row_count: usize = counts[1..].iter().product();
        let mut index = vec![0usize; n];
        let mut z = vec![S::zero(); n];
        for r in 0..row_count {
            let mut rem = r;
            for axis in 1..n {
                index[axis] = rem % counts[axis];
                rem /= counts[axis];
                z[axis] = coord(axis, index[axis]);
            }
            let mut runs = Vec::new();
            let mut open: Option<usize> = None;
            for k in 0..counts[0] {
                z[0] = coord(0, k);
                let in_d = near_level_set(&e, &z, grid.step) && system.jump_predicate(&z);
                if in_d {
                    jump_points.push(z.clone());
                }
                let in_image = has_image
                    && near_level_set(&image_e, &z, grid.step)
                    && system.image_predicate(&z) == Some(true);
                if in_image {
                    jump_images.push(z.clone());
                }
                let member = system.in_flow_set(&z) || in_d || in_image;
                match (member, open) {
                    (true, None) => open = Some(k),
                    (false, Some(s)) => {
                        runs.push((s, k - 1));
                        open = None;
                    }
                    _ => {}
                }
            }
            if let Some(s) = open {
                runs.push((s, counts[0] - 1));
            }
            if !runs.is_empty() {
                rows.push((z[1..].to_vec(), runs));
            }
        }
        if rows.is_empty() {
            return Err(MetricsError::EmptyGrid);
        }
        Ok(Self {
            grid,
            counts,
            rows,
            jump_points,
            jump_images,
        })
    }

    pub fn jump_point_count(&self) -> usize {
        self.jump_points.len()
    }

    /// Number of grid points inside the discretized `G(D)`.
    pub fn jump_image_count(&self) -> usize {
        self.jump_images.len()
    }

    /// Brute-force minimum of each branch objective over the grid.
    pub fn evaluate(&self, system: &SystemSpec<S>, x1: &[S], x2: &[S]) -> OracleValue<S> {
        let step = self.grid.step;
        let lo0 = self.grid.lo[0];
        let m0 = (x1[0] + x2[0]) * S::lit(0.5);
        let centre = ((m0 - lo0) / step).round().max(S::zero()).as_f64() as usize;
        let mut z = vec![S::zero(); x1.len()];
        let mut a00 = S::infinity();
        for (tail, runs) in &self.rows {
            z[1..].copy_from_slice(tail);
            for &(s, e) in runs {
                // The objective is a convex quadratic along the row with its
                // minimum at m0, so the nearest grid indices suffice.
                let k = centre.clamp(s, e);
                for kk in [k.saturating_sub(1), k, (k + 1).min(self.counts[0] - 1)] {
                    if kk < s || kk > e {
                        continue;
                    }
                    z[0] = lo0 + S::from_usize(kk) * step;
                    let v = squared_distance(x1, &z) + squared_distance(x2, &z);
                    if v < a00 {
                        a00 = v;
                    }
                }
            }
        }
        let mut a01 = S::infinity();
        let mut a10 = S::infinity();
        for zd in &self.jump_points {
            let g = system.jump(zd);
            let v01 = squared_distance(x1, &g) + squared_distance(x2, zd);
            let v10 = squared_distance(x1, zd) + squared_distance(x2, &g);
            a01 = a01.min(v01);
            a10 = a10.min(v10);
        }
        let values = BranchValues {
            a00: a00.sqrt(),
            a01: a01.sqrt(),
            a10: a10.sqrt(),
        };
        OracleValue {
            value: values.argmin().1,
            branch_values: values,
        }
    }
}

/// Independent brute-force evaluation of `ρ_𝒜` on a grid.
pub fn rho_a_oracle<S: Scalar>(
    system: &SystemSpec<S>,
    x1: &[S],
    x2: &[S],
    grid: OracleGrid<S>,
) -> Result<OracleValue<S>, MetricsError> {
    let table = OracleTable::build(system, grid)?;
    Ok(table.evaluate(system, x1, x2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::JumpSetChart;

    fn impact(restitution: f64, r: f64, chart: bool) -> SystemSpec<f64> {
        let mut b = SystemSpec::<f64>::builder(2)
            .flow(|_, x| vec![x[1], -x[0] - 0.02 * x[1] + 1.0])
            .flow_set(|x| x[0])
            .jump_event(|x| x[0])
            .jump_predicate(move |x| x[1] <= -r)
            .jump_map(move |x| vec![-restitution * x[0], -restitution * x[1]])
            .jump_map_preimage(move |y| vec![-y[0] / restitution, -y[1] / restitution]);
        if chart {
            b = b.jump_chart(
                JumpSetChart::new(vec![(f64::NEG_INFINITY, -r)], |p| vec![0.0, p[0]]).unwrap(),
            );
        }
        b.build().unwrap()
    }

    #[test]
    fn identity_pair_is_zero() {
        let rep = rho_a(&impact(0.8, 0.5, true), &[1.0, 0.0], &[1.0, 0.0]).unwrap();
        assert_eq!(rep.value, 0.0);
        assert_eq!(rep.branch, Branch::A00);
    }

    #[test]
    fn jump_pair_is_zero_on_a10() {
        let rep = rho_a(&impact(0.8, 0.5, true), &[0.0, -1.0], &[0.0, 0.8]).unwrap();
        assert!(rep.value < 1e-9, "{rep:?}");
        assert_eq!(rep.branch, Branch::A10);
        assert!((rep.witness[1] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn vertical_offset_in_flow_set() {
        let rep = rho_a(&impact(0.8, 0.5, true), &[1.0, 0.0], &[1.0, 0.1]).unwrap();
        assert!((rep.value - 0.1 / 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(rep.branch, Branch::A00);
        assert_eq!(rep.witness.as_slice(), &[1.0, 0.05]);
    }

    #[test]
    fn midpoint_outside_flow_set_projects_to_boundary() {
        // m = (-1, 0): nearest point of C is (0, 0).
        let rep = rho_a(&impact(0.8, 0.5, true), &[-1.0, 1.0], &[-1.0, -1.0]).unwrap();
        let expect = (2.0f64 * 1.0 + 4.0 / 2.0).sqrt();
        assert!((rep.branch_values.a00 - expect).abs() < 1e-9, "{rep:?}");
    }

    #[test]
    fn chart_and_generic_search_agree() {
        let with = impact(0.8, 0.5, true);
        let without = impact(0.8, 0.5, false);
        for (x, y) in [
            ([0.01, -1.0], [0.005, 0.81]),
            ([2.0, 1.0], [0.3, -2.0]),
            ([-0.3, 2.5], [0.2, -2.9]),
        ] {
            let a = rho_a(&with, &x, &y).unwrap();
            let b = rho_a(&without, &x, &y).unwrap();
            assert!(!b.unknown);
            for br in [Branch::A00, Branch::A01, Branch::A10] {
                let (u, v) = (a.branch_values.get(br), b.branch_values.get(br));
                assert!((u - v).abs() < 1e-6, "{br}: {u} vs {v}");
            }
        }
    }

    #[test]
    fn forced_upper_bound_example() {
        let rep = rho_a(&impact(0.8, 0.5, true), &[0.01, -1.0], &[0.005, 0.81]).unwrap();
        assert!(rep.value <= 0.015 + 1e-12);
        let grid = OracleGrid {
            lo: vec![-0.05, -1.5],
            hi: vec![0.05, 1.5],
            step: 1e-3,
        };
        let oracle = rho_a_oracle(&impact(0.8, 0.5, true), &[0.01, -1.0], &[0.005, 0.81], grid).unwrap();
        assert!(oracle.value <= 0.015 + 1e-12);
        assert!((oracle.value - rep.value).abs() <= 5e-3);
    }

    #[test]
    fn oracle_on_vertical_offset() {
        let grid = OracleGrid {
            lo: vec![0.5, -0.5],
            hi: vec![1.5, 0.5],
            step: 1e-3,
        };
        let sys = impact(0.8, 0.5, true);
        let o = rho_a_oracle(&sys, &[1.0, 0.0], &[1.0, 0.1], grid).unwrap();
        assert!((o.value - 0.1 / 2f64.sqrt()).abs() < 5e-3);
    }

    #[test]
    fn oracle_rejects_empty_grid() {
        let grid = OracleGrid {
            lo: vec![-2.0, 5.0],
            hi: vec![-1.0, 6.0],
            step: 0.1,
        };
        assert!(matches!(
            rho_a_oracle(&impact(0.8, 0.5, true), &[1.0, 0.0], &[1.0, 0.0], grid),
            Err(MetricsError::EmptyGrid)
        ));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        assert!(rho_a(&impact(0.8, 0.5, true), &[1.0], &[1.0, 0.0]).is_err());
    }
}
