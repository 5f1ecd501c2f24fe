//! Closeness of two hybrid arcs: graphical ε (time shifts allowed) and the
//! equal-time ρ_𝒜 closeness, with their tail variants.

use serde::{Deserialize, Serialize};

use super::rho::{rho_a, Branch};
use super::MetricsError;
use crate::arc::{ArcPoint, HybridArc};
use crate::scalar::Scalar;
use crate::state::distance;
use crate::system::SystemSpec;

/// Time grid step for the dense discretization of arcs.
pub const DEFAULT_GRID_STEP: f64 = 1e-3;

/// A worst-case pair: `(t, j)` on the first arc of the direction and the
/// best matching `(t_other, j_other)` on the other arc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Witness<S> {
    pub t: S,
    pub j: usize,
    pub t_other: S,
    pub j_other: usize,
    pub value: S,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct TailPoint<S> {
    pub t_start: S,
    pub epsilon: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct ClosenessReport<S> {
    pub epsilon: S,
    pub direction_forward: S,
    pub direction_backward: S,
    pub worst_witness: Option<Witness<S>>,
    pub tail_start: S,
    pub tail_profile: Vec<TailPoint<S>>,
    /// Set when the arcs end at different times and the comparison was
    /// restricted to the common range.
    pub truncated: bool,
}

/// Suffix maxima over time-ordered witnesses.
#[derive(Debug, Clone)]
struct Tail<S> {
    times: Vec<S>,
    witnesses: Vec<Witness<S>>,
    suffix: Vec<usize>,
}

impl<S: Scalar> Tail<S> {
    fn new(mut witnesses: Vec<Witness<S>>) -> Self {
        witnesses.sort_by(|a, b| a.t.partial_cmp(&b.t).expect("finite times"));
        let mut suffix = vec![0; witnesses.len()];
        for i in (0..witnesses.len()).rev() {
            suffix[i] = match suffix.get(i + 1) {
                Some(&k) if i + 1 < witnesses.len() && witnesses[k].value > witnesses[i].value => k,
                _ => i,
            };
        }
        Self {
            times: witnesses.iter().map(|w| w.t).collect(),
            witnesses,
            suffix,
        }
    }

    fn sup_from(&self, t_start: S) -> Option<Witness<S>> {
        let i = self.times.partition_point(|&t| t < t_start);
        self.suffix.get(i).map(|&k| self.witnesses[k])
    }
}

/// Pointwise matching distances of both directions, from which plain and
/// tail closeness values are read off.
#[derive(Debug, Clone)]
pub struct ClosenessProfile<S> {
    forward: Tail<S>,
    backward: Tail<S>,
    horizon: S,
    truncated: bool,
}

impl<S: Scalar> ClosenessProfile<S> {
    /// Latest admissible tail start.
    pub fn horizon(&self) -> S {
        self.horizon
    }

    /// `sup` over both directions of the pointwise values at times `t ≥ t_start`.
    pub fn tail(&self, t_start: S) -> Result<S, MetricsError> {
        Ok(self.report(t_start)?.epsilon)
    }

    pub fn report(&self, t_start: S) -> Result<ClosenessReport<S>, MetricsError> {
        if !(t_start <= self.horizon) {
            return Err(MetricsError::TailBeyondHorizon {
                t_start: t_start.as_f64(),
                horizon: self.horizon.as_f64(),
            });
        }
        let f = self.forward.sup_from(t_start);
        let b = self.backward.sup_from(t_start);
        let fv = f.map_or(S::zero(), |w| w.value);
        let bv = b.map_or(S::zero(), |w| w.value);
        let worst = if bv > fv { b } else { f.or(b) };
        Ok(ClosenessReport {
            epsilon: fv.max(bv),
            direction_forward: fv,
            direction_backward: bv,
            worst_witness: worst,
            tail_start: t_start,
            tail_profile: Vec::new(),
            truncated: self.truncated,
        })
    }

    /// Tail suprema on an increasing grid of start times.
    pub fn tail_profile(&self, t_grid: &[S]) -> Result<Vec<TailPoint<S>>, MetricsError> {
        if t_grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(MetricsError::InvalidParameter("T grid must be strictly increasing".into()));
        }
        t_grid
            .iter()
            .map(|&t| {
                Ok(TailPoint {
                    t_start: t,
                    epsilon: self.tail(t)?,
                })
            })
            .collect()
    }

    /// Report at `t_start` carrying the tail profile on `t_grid`.
    pub fn report_with_tails(&self, t_start: S, t_grid: &[S]) -> Result<ClosenessReport<S>, MetricsError> {
        let mut rep = self.report(t_start)?;
        rep.tail_profile = self.tail_profile(t_grid)?;
        Ok(rep)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct GraphicalOptions<S> {
    pub grid_step: S,
    /// Bound on explored time shifts; derived from the jump-time mismatch when absent.
    pub search_window: Option<S>,
}

impl<S: Scalar> Default for GraphicalOptions<S> {
    fn default() -> Self {
        Self {
            grid_step: S::lit(DEFAULT_GRID_STEP),
            search_window: None,
        }
    }
}

fn check_pair<S: Scalar>(a: &HybridArc<S>, b: &HybridArc<S>) -> Result<(), MetricsError> {
    if a.dimension() != b.dimension() {
        return Err(MetricsError::Dimension {
            expected: a.dimension(),
            found: b.dimension(),
        });
    }
    let (a0, a1) = (a.segments[0].first().t, a.final_time());
    let (b0, b1) = (b.segments[0].first().t, b.final_time());
    if a1 < b0 || b1 < a0 {
        return Err(MetricsError::DisjointTimeRanges);
    }
    Ok(())
}

/// Ten times the largest mismatch between corresponding jump times, at least 1.
pub fn default_search_window<S: Scalar>(a: &HybridArc<S>, b: &HybridArc<S>) -> S {
    let mismatch = a
        .jumps
        .iter()
        .zip(&b.jumps)
        .map(|(x, y)| (x.t_jump - y.t_jump).abs())
        .fold(S::lit(0.1), S::max);
    S::lit(10.0) * mismatch
}

fn match_direction<S: Scalar>(from: &[ArcPoint<S>], to: &[ArcPoint<S>], window: S) -> Vec<Witness<S>> {
    let score = |p: &ArcPoint<S>, q: &ArcPoint<S>| (p.t - q.t).abs().max(distance(&p.x, &q.x));
    from.iter()
        .map(|p| {
            let idx = to.partition_point(|q| q.t < p.t);
            let mut best = (S::infinity(), usize::MAX);
            for (k, q) in to.iter().enumerate().skip(idx) {
                let dt = q.t - p.t;
                if dt > window || dt >= best.0 {
                    break;
                }
                let v = score(p, q);
                if v < best.0 {
                    best = (v, k);
                }
            }
            for k in (0..idx).rev() {
                let dt = p.t - to[k].t;
                if dt > window || dt >= best.0 {
                    break;
                }
                let v = score(p, &to[k]);
                if v < best.0 {
                    best = (v, k);
                }
            }
            if best.1 == usize::MAX {
                // Nothing inside the window: fall back to the nearest times.
                for k in [Some(idx), idx.checked_sub(1)].into_iter().flatten() {
                    if let Some(q) = to.get(k) {
                        let v = score(p, q);
                        if v < best.0 {
                            best = (v, k);
                        }
                    }
                }
            }
            let q = &to[best.1];
            Witness {
                t: p.t,
                j: p.j,
                t_other: q.t,
                j_other: q.j,
                value: best.0,
            }
        })
        .collect()
}

/// Pointwise graphical matching of two arcs on a dense grid: each graph
/// point of one arc is matched to the point of the other minimizing
/// `max(|t − t′|, ‖x − x′‖)`.
pub fn graphical_profile<S: Scalar>(
    a: &HybridArc<S>,
    b: &HybridArc<S>,
    options: &GraphicalOptions<S>,
) -> Result<ClosenessProfile<S>, MetricsError> {
    check_pair(a, b)?;
    if !(options.grid_step > S::zero()) {
        return Err(MetricsError::InvalidParameter("grid step must be positive".into()));
    }
    let window = options.search_window.unwrap_or_else(|| default_search_window(a, b));
    if !(window > S::zero()) {
        return Err(MetricsError::InvalidParameter("search window must be positive".into()));
    }
    let pa = a.dense_points(options.grid_step);
    let pb = b.dense_points(options.grid_step);
    Ok(ClosenessProfile {
        forward: Tail::new(match_direction(&pa, &pb, window)),
        backward: Tail::new(match_direction(&pb, &pa, window)),
        horizon: a.final_time().min(b.final_time()),
        truncated: false,
    })
}

/// Graphical closeness ε of `b` to `a` from time `t_start` on.
pub fn graphical_eps<S: Scalar>(
    a: &HybridArc<S>,
    b: &HybridArc<S>,
    t_start: S,
    options: &GraphicalOptions<S>,
) -> Result<ClosenessReport<S>, MetricsError> {
    graphical_profile(a, b, options)?.report(t_start)
}

/// ρ_𝒜 and Euclidean mismatch at one time instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct TracePoint<S> {
    pub t: S,
    /// `max(sup_j min_j′, sup_j′ min_j)` of `ρ_𝒜(a(t,j), b(t,j′))`.
    pub rho: S,
    /// The same combination of Euclidean distances.
    pub euclid: S,
    pub branch: Branch,
}

/// Equal-time comparison of two arcs on the union of a dense grid, all
/// sample times and all jump instants inside the common time range.
#[derive(Debug, Clone)]
pub struct RhoTrace<S> {
    pub points: Vec<TracePoint<S>>,
    profile: ClosenessProfile<S>,
}

impl<S: Scalar> RhoTrace<S> {
    pub fn profile(&self) -> &ClosenessProfile<S> {
        &self.profile
    }

    pub fn truncated(&self) -> bool {
        self.profile.truncated
    }

    /// Largest Euclidean equal-time mismatch for `t` in `[t0, t1]`.
    pub fn euclid_sup(&self, t0: S, t1: S) -> S {
        self.points
            .iter()
            .filter(|p| p.t >= t0 && p.t <= t1)
            .fold(S::zero(), |m, p| m.max(p.euclid))
    }

    /// Largest ρ_𝒜 value for `t` in `[t0, t1]`.
    pub fn rho_sup(&self, t0: S, t1: S) -> S {
        self.points
            .iter()
            .filter(|p| p.t >= t0 && p.t <= t1)
            .fold(S::zero(), |m, p| m.max(p.rho))
    }

    /// Value at the last trace instant.
    pub fn terminal(&self) -> S {
        self.points.last().map_or(S::zero(), |p| p.rho)
    }

    /// CSV with header `t,rho,euclid,branch`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,rho,euclid,branch\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{}\n",
                crate::scalar::format_round_trip(p.t),
                crate::scalar::format_round_trip(p.rho),
                crate::scalar::format_round_trip(p.euclid),
                p.branch
            ));
        }
        out
    }
}

fn trace_times<S: Scalar>(a: &HybridArc<S>, b: &HybridArc<S>, step: S, t_end: S) -> Vec<S> {
    let mut times = Vec::new();
    let mut k = 0usize;
    loop {
        let t = S::from_usize(k) * step;
        if t > t_end {
            break;
        }
        times.push(t);
        k += 1;
    }
    for arc in [a, b] {
        times.extend(arc.samples().map(|(_, s)| s.t).filter(|&t| t <= t_end));
        times.extend(arc.jump_times().into_iter().filter(|&t| t <= t_end));
    }
    times.push(t_end);
    times.sort_by(|x, y| x.partial_cmp(y).expect("finite times"));
    times.dedup();
    times
}

/// Builds the equal-time ρ_𝒜 trace of `b` against `a`.
pub fn rho_trace<S: Scalar>(
    a: &HybridArc<S>,
    b: &HybridArc<S>,
    system: &SystemSpec<S>,
    grid_step: S,
) -> Result<RhoTrace<S>, MetricsError> {
    check_pair(a, b)?;
    if !(grid_step > S::zero()) {
        return Err(MetricsError::InvalidParameter("grid step must be positive".into()));
    }
    let t_end = a.final_time().min(b.final_time());
    let truncated = a.final_time() != b.final_time();
    let mut points = Vec::new();
    let mut forward = Vec::new();
    let mut backward = Vec::new();
    for t in trace_times(a, b, grid_step, t_end) {
        let sa = a.slice_at_time(t);
        let sb = b.slice_at_time(t);
        let mut rho = vec![vec![S::zero(); sb.len()]; sa.len()];
        let mut euclid = vec![vec![S::zero(); sb.len()]; sa.len()];
        let mut branch = vec![vec![Branch::A00; sb.len()]; sa.len()];
        for (i, (_, xa)) in sa.iter().enumerate() {
            for (k, (_, xb)) in sb.iter().enumerate() {
                let rep = rho_a(system, xa, xb)?;
                rho[i][k] = rep.value;
                branch[i][k] = rep.branch;
                euclid[i][k] = distance(xa, xb);
            }
        }
        let mut point = TracePoint {
            t,
            rho: S::zero(),
            euclid: S::zero(),
            branch: Branch::A00,
        };
        for (i, &(ja, _)) in sa.iter().enumerate() {
            let k = (0..sb.len())
                .min_by(|&p, &q| rho[i][p].partial_cmp(&rho[i][q]).expect("finite"))
                .expect("slice non-empty");
            forward.push(Witness {
                t,
                j: ja,
                t_other: t,
                j_other: sb[k].0,
                value: rho[i][k],
            });
            if rho[i][k] >= point.rho {
                point.rho = rho[i][k];
                point.branch = branch[i][k];
            }
            let e = (0..sb.len()).map(|k| euclid[i][k]).fold(S::infinity(), S::min);
            point.euclid = point.euclid.max(e);
        }
        for (k, &(jb, _)) in sb.iter().enumerate() {
            let i = (0..sa.len())
                .min_by(|&p, &q| rho[p][k].partial_cmp(&rho[q][k]).expect("finite"))
                .expect("slice non-empty");
            backward.push(Witness {
                t,
                j: jb,
                t_other: t,
                j_other: sa[i].0,
                value: rho[i][k],
            });
            if rho[i][k] > point.rho {
                point.rho = rho[i][k];
                point.branch = branch[i][k];
            }
            let e = (0..sa.len()).map(|i| euclid[i][k]).fold(S::infinity(), S::min);
            point.euclid = point.euclid.max(e);
        }
        points.push(point);
    }
    Ok(RhoTrace {
        points,
        profile: ClosenessProfile {
            forward: Tail::new(forward),
            backward: Tail::new(backward),
            horizon: t_end,
            truncated,
        },
    })
}

/// ρ_𝒜 closeness of `b` to `a` at equal times from `t_start` on.
pub fn rho_eps<S: Scalar>(
    a: &HybridArc<S>,
    b: &HybridArc<S>,
    system: &SystemSpec<S>,
    t_start: S,
) -> Result<ClosenessReport<S>, MetricsError> {
    rho_trace(a, b, system, S::lit(DEFAULT_GRID_STEP))?.profile.report(t_start)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{simulate, IntegratorConfig};
    use crate::state::StateVector;

    fn drift() -> SystemSpec<f64> {
        SystemSpec::builder(1)
            .flow(|_, _| vec![1.0])
            .flow_set(|_| 1.0)
            .jump_event(|_| 1.0)
            .jump_predicate(|_| false)
            .jump_map(|x| x.to_vec())
            .build()
            .unwrap()
    }

    fn gravity() -> SystemSpec<f64> {
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

    fn run(sys: &SystemSpec<f64>, x0: &[f64], horizon: f64) -> HybridArc<f64> {
        simulate(sys, &StateVector::from_f64(x0), &IntegratorConfig::default().with_horizon(horizon)).unwrap()
    }

    #[test]
    fn self_distance_is_zero() {
        let a = run(&gravity(), &[1.0, 0.0], 3.0);
        let g = graphical_eps(&a, &a, 0.0, &GraphicalOptions::default()).unwrap();
        assert_eq!(g.epsilon, 0.0);
        let r = rho_eps(&a, &a, &gravity(), 0.0).unwrap();
        assert_eq!(r.epsilon, 0.0);
        assert!(!r.truncated);
    }

    #[test]
    fn drift_shift_gives_the_offset() {
        let a = run(&drift(), &[0.0], 1.0);
        let b = run(&drift(), &[0.05], 1.0);
        let g = graphical_eps(&a, &b, 0.0, &GraphicalOptions::default()).unwrap();
        assert!((g.epsilon - 0.05).abs() <= 1e-3, "{g:?}");
        let g2 = graphical_eps(&b, &a, 0.0, &GraphicalOptions::default()).unwrap();
        assert_eq!(g.epsilon, g2.epsilon);
    }

    #[test]
    fn bounce_pair_avoids_peaking() {
        let sys = gravity();
        let a = run(&sys, &[1.0, 0.0], 2.5);
        let b = run(&sys, &[1.02, 0.0], 2.5);
        let g = graphical_eps(&a, &b, 0.0, &GraphicalOptions::default()).unwrap();
        let trace = rho_trace(&a, &b, &sys, 1e-3).unwrap();
        let euclid = trace.euclid_sup(1.3, 1.5);
        let rho = trace.rho_sup(0.0, 2.5);
        assert!(euclid > 5.0 * g.epsilon, "euclid {euclid} graphical {}", g.epsilon);
        assert!(euclid > rho, "euclid {euclid} rho {rho}");
    }

    #[test]
    fn tail_beyond_horizon_is_an_error() {
        let sys = gravity();
        let a = run(&sys, &[1.0, 0.0], 1.0);
        let b = run(&sys, &[1.0, 0.0], 2.0);
        assert!(matches!(
            rho_eps(&a, &b, &sys, 1.5),
            Err(MetricsError::TailBeyondHorizon { .. })
        ));
        let r = rho_eps(&a, &b, &sys, 0.5).unwrap();
        assert!(r.truncated);
        assert!(graphical_eps(&a, &b, 1.5, &GraphicalOptions::default()).is_err());
    }

    #[test]
    fn tail_profile_is_non_increasing() {
        let sys = gravity();
        let a = run(&sys, &[1.0, 0.0], 4.0);
        let b = run(&sys, &[1.1, 0.0], 4.0);
        let prof = graphical_profile(&a, &b, &GraphicalOptions::default()).unwrap();
        let tails = prof.tail_profile(&[0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        for w in tails.windows(2) {
            assert!(w[1].epsilon <= w[0].epsilon);
        }
        assert!(prof.tail_profile(&[1.0, 1.0]).is_err());
    }
}
