//! Monte-Carlo stability sweeps: perturb the reference initial state within
//! balls of decreasing radius and measure both closeness notions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::closeness::{graphical_profile, rho_trace, GraphicalOptions, DEFAULT_GRID_STEP};
use super::MetricsError;
use crate::arc::HybridArc;
use crate::scalar::{format_round_trip, Scalar};
use crate::simulator::{simulate, IntegratorConfig};
use crate::state::{norm, StateVector};
use crate::system::SystemSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct SweepParams<S> {
    pub radii: Vec<S>,
    pub samples_per_radius: usize,
    pub t_grid: Vec<S>,
    pub seed: u64,
    #[serde(default = "default_step")]
    pub grid_step: S,
    #[serde(default)]
    pub search_window: Option<S>,
    #[serde(default)]
    pub config: IntegratorConfig<S>,
}

fn default_step<S: Scalar>() -> S {
    S::lit(DEFAULT_GRID_STEP)
}

impl<S: Scalar> SweepParams<S> {
    pub fn new(radii: Vec<S>, samples_per_radius: usize, t_grid: Vec<S>, config: IntegratorConfig<S>) -> Self {
        Self {
            radii,
            samples_per_radius,
            t_grid,
            seed: 0,
            grid_step: default_step(),
            search_window: None,
            config,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct TailRow<S> {
    pub t_start: S,
    pub graphical: Option<S>,
    pub rho: Option<S>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct RadiusSummary<S> {
    pub radius: S,
    pub samples: usize,
    /// Simulations that failed; excluded from the aggregates.
    pub failures: usize,
    /// Successful simulations that stopped before the horizon.
    pub incomplete: usize,
    pub graphical_eps: Option<S>,
    pub rho_eps: Option<S>,
    pub tail: Vec<TailRow<S>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdicts {
    /// Graphical ε does not increase as the radius decreases.
    pub monotone_in_delta: bool,
    /// For every radius the graphical tail at the last grid time is at most
    /// a fifth of the tail at the first.
    pub decaying_tail: bool,
    /// ρ-ε never exceeded graphical ε at any radius.
    pub rho_below_graphical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct StabilityReport<S> {
    pub t_grid: Vec<S>,
    pub radii: Vec<RadiusSummary<S>>,
    pub verdicts: Verdicts,
}

const DECAY_RATIO: f64 = 0.2;

fn verdicts<S: Scalar>(radii: &[RadiusSummary<S>]) -> Verdicts {
    let mut order: Vec<&RadiusSummary<S>> = radii.iter().collect();
    order.sort_by(|a, b| b.radius.partial_cmp(&a.radius).expect("finite radii"));
    let eps: Vec<S> = order.iter().filter_map(|r| r.graphical_eps).collect();
    let monotone_in_delta = eps.windows(2).all(|w| w[1] <= w[0]);
    let decaying_tail = radii.iter().all(|r| {
        let tails: Vec<S> = r.tail.iter().filter_map(|row| row.graphical).collect();
        match (tails.first(), tails.last()) {
            (Some(&first), Some(&last)) => {
                tails.windows(2).all(|w| w[1] <= w[0]) && last <= S::lit(DECAY_RATIO) * first
            }
            _ => true,
        }
    });
    let rho_below_graphical = radii.iter().all(|r| match (r.rho_eps, r.graphical_eps) {
        (Some(rho), Some(g)) => rho <= g,
        _ => true,
    });
    Verdicts {
        monotone_in_delta,
        decaying_tail,
        rho_below_graphical,
    }
}

struct SampleOutcome<S> {
    graphical: S,
    rho: S,
    graphical_tail: Vec<Option<S>>,
    rho_tail: Vec<Option<S>>,
    complete: bool,
}

fn perturb<S: Scalar>(system: &SystemSpec<S>, centre: &[S], radius: S, rng: &mut ChaCha8Rng) -> Option<Vec<S>> {
    if radius == S::zero() {
        return Some(centre.to_vec());
    }
    for _ in 0..100_000 {
        let v: Vec<S> = centre
            .iter()
            .map(|_| S::lit(rng.gen_range(-1.0..1.0)) * radius)
            .collect();
        if !(norm(&v) < radius) {
            continue;
        }
        let x: Vec<S> = centre.iter().zip(&v).map(|(&c, &d)| c + d).collect();
        if system.in_flow_set(&x) || system.in_jump_set(&x) {
            return Some(x);
        }
    }
    None
}

fn run_sample<S: Scalar>(
    system: &SystemSpec<S>,
    reference: &HybridArc<S>,
    params: &SweepParams<S>,
    radius: S,
    stream: u64,
) -> Option<SampleOutcome<S>> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(stream);
    let x0 = perturb(system, reference.initial_state(), radius, &mut rng)?;
    let arc = simulate(system, &StateVector::new(x0), &params.config).ok()?;
    let options = GraphicalOptions {
        grid_step: params.grid_step,
        search_window: params.search_window,
    };
    let graphical = graphical_profile(reference, &arc, &options).ok()?;
    let trace = rho_trace(reference, &arc, system, params.grid_step).ok()?;
    Some(SampleOutcome {
        graphical: graphical.tail(S::zero()).ok()?,
        rho: trace.profile().tail(S::zero()).ok()?,
        graphical_tail: params.t_grid.iter().map(|&t| graphical.tail(t).ok()).collect(),
        rho_tail: params.t_grid.iter().map(|&t| trace.profile().tail(t).ok()).collect(),
        complete: arc.flags.t_complete_up_to_horizon,
    })
}

fn max_opt<S: Scalar>(a: Option<S>, b: Option<S>) -> Option<S> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

/// Simulates `samples_per_radius` perturbations of the reference initial
/// state for every radius and aggregates graphical ε, ρ-ε and their tails.
///
/// Each sample draws from its own ChaCha8 stream derived from the seed, so
/// results do not depend on thread scheduling.
pub fn stability_sweep<S: Scalar>(
    system: &SystemSpec<S>,
    reference: &HybridArc<S>,
    params: &SweepParams<S>,
) -> Result<StabilityReport<S>, MetricsError> {
    if params.radii.iter().any(|r| !(*r >= S::zero()) || !r.is_finite()) {
        return Err(MetricsError::InvalidParameter("radii must be finite and non-negative".into()));
    }
    if params.t_grid.is_empty() || params.t_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(MetricsError::InvalidParameter("T grid must be non-empty and strictly increasing".into()));
    }
    params.config.validate().map_err(MetricsError::InvalidParameter)?;
    let mut radii = Vec::with_capacity(params.radii.len());
    for (ri, &radius) in params.radii.iter().enumerate() {
        let outcomes: Vec<Option<SampleOutcome<S>>> = (0..params.samples_per_radius)
            .into_par_iter()
            .map(|i| run_sample(system, reference, params, radius, ((ri as u64) << 32) | i as u64))
            .collect();
        let mut summary = RadiusSummary {
            radius,
            samples: params.samples_per_radius,
            failures: 0,
            incomplete: 0,
            graphical_eps: None,
            rho_eps: None,
            tail: params
                .t_grid
                .iter()
                .map(|&t| TailRow {
                    t_start: t,
                    graphical: None,
                    rho: None,
                })
                .collect(),
        };
        for outcome in outcomes {
            let Some(o) = outcome else {
                summary.failures += 1;
                continue;
            };
            if !o.complete {
                summary.incomplete += 1;
            }
            summary.graphical_eps = max_opt(summary.graphical_eps, Some(o.graphical));
            summary.rho_eps = max_opt(summary.rho_eps, Some(o.rho));
            for (row, (g, r)) in summary.tail.iter_mut().zip(o.graphical_tail.into_iter().zip(o.rho_tail)) {
                row.graphical = max_opt(row.graphical, g);
                row.rho = max_opt(row.rho, r);
            }
        }
        radii.push(summary);
    }
    Ok(StabilityReport {
        t_grid: params.t_grid.clone(),
        verdicts: verdicts(&radii),
        radii,
    })
}

const CSV_HEADER: &str = "radius,t_start,samples,failures,incomplete,graphical_eps,rho_eps,graphical_tail,rho_tail";

fn opt_field<S: Scalar>(v: Option<S>) -> String {
    v.map(format_round_trip).unwrap_or_default()
}

fn parse_scalar<S: Scalar>(field: &str) -> Result<S, MetricsError> {
    field
        .trim()
        .parse::<f64>()
        .map(S::lit)
        .map_err(|e| MetricsError::Table(format!("bad number {field:?}: {e}")))
}

fn parse_opt<S: Scalar>(field: &str) -> Result<Option<S>, MetricsError> {
    if field.trim().is_empty() {
        Ok(None)
    } else {
        parse_scalar(field).map(Some)
    }
}

fn parse_count(field: &str) -> Result<usize, MetricsError> {
    field
        .trim()
        .parse()
        .map_err(|e| MetricsError::Table(format!("bad count {field:?}: {e}")))
}

impl<S: Scalar> StabilityReport<S> {
    /// One row per radius × tail start; empty fields mark radii without
    /// successful samples.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.radii {
            for row in &r.tail {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    format_round_trip(r.radius),
                    format_round_trip(row.t_start),
                    r.samples,
                    r.failures,
                    r.incomplete,
                    opt_field(r.graphical_eps),
                    opt_field(r.rho_eps),
                    opt_field(row.graphical),
                    opt_field(row.rho),
                ));
            }
        }
        out
    }

    /// Inverse of [`to_csv`](Self::to_csv); verdicts are recomputed.
    pub fn from_csv(text: &str) -> Result<Self, MetricsError> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(CSV_HEADER) {
            return Err(MetricsError::Table("missing header".into()));
        }
        let mut radii: Vec<RadiusSummary<S>> = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 9 {
                return Err(MetricsError::Table(format!("expected 9 fields: {line:?}")));
            }
            let radius: S = parse_scalar(f[0])?;
            let row = TailRow {
                t_start: parse_scalar(f[1])?,
                graphical: parse_opt(f[7])?,
                rho: parse_opt(f[8])?,
            };
            let new_block = radii.last().map_or(true, |r| {
                r.radius != radius || r.tail.last().map_or(false, |last| row.t_start <= last.t_start)
            });
            if new_block {
                radii.push(RadiusSummary {
                    radius,
                    samples: parse_count(f[2])?,
                    failures: parse_count(f[3])?,
                    incomplete: parse_count(f[4])?,
                    graphical_eps: parse_opt(f[5])?,
                    rho_eps: parse_opt(f[6])?,
                    tail: Vec::new(),
                });
            }
            let current = radii.last_mut().expect("block pushed");
            current.tail.push(row);
        }
        let t_grid: Vec<S> = radii
            .first()
            .map(|r| r.tail.iter().map(|row| row.t_start).collect())
            .unwrap_or_default();
        if radii
            .iter()
            .any(|r| r.tail.len() != t_grid.len() || r.tail.iter().zip(&t_grid).any(|(a, b)| a.t_start != *b))
        {
            return Err(MetricsError::Table("radii disagree on the T grid".into()));
        }
        Ok(Self {
            t_grid,
            verdicts: verdicts(&radii),
            radii,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

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

    fn setup() -> (SystemSpec<f64>, HybridArc<f64>, SweepParams<f64>) {
        let sys = gravity();
        let config = IntegratorConfig::default().with_horizon(2.0);
        let reference = simulate(&sys, &StateVector::from_f64(&[1.0, 0.0]), &config).unwrap();
        let params = SweepParams::new(vec![0.05, 0.01], 3, vec![0.0, 1.0, 2.0], config)
            .with_seed(7);
        (sys, reference, params)
    }

    #[test]
    fn zero_radius_measures_zero() {
        let (sys, reference, mut params) = setup();
        params.radii = vec![0.0];
        let rep = stability_sweep(&sys, &reference, &params).unwrap();
        assert_eq!(rep.radii[0].graphical_eps, Some(0.0));
        assert_eq!(rep.radii[0].rho_eps, Some(0.0));
        assert_eq!(rep.radii[0].failures, 0);
    }

    #[test]
    fn csv_round_trip_and_determinism() {
        let (sys, reference, params) = setup();
        let a = stability_sweep(&sys, &reference, &params).unwrap();
        let b = stability_sweep(&sys, &reference, &params).unwrap();
        assert_eq!(a, b);
        let parsed = StabilityReport::<f64>::from_csv(&a.to_csv()).unwrap();
        assert_eq!(parsed, a);
        assert!(a.verdicts.monotone_in_delta);
    }

    #[test]
    fn rejects_bad_parameters() {
        let (sys, reference, mut params) = setup();
        params.t_grid = vec![1.0, 0.5];
        assert!(stability_sweep(&sys, &reference, &params).is_err());
        params.t_grid = vec![0.0];
        params.radii = vec![-1.0];
        assert!(stability_sweep(&sys, &reference, &params).is_err());
    }

    #[test]
    fn malformed_csv_is_rejected() {
        assert!(StabilityReport::<f64>::from_csv("nope\n").is_err());
        let bad = format!("{CSV_HEADER}\n0.1,0,1,0,0,x,,,\n");
        assert!(StabilityReport::<f64>::from_csv(&bad).is_err());
    }
}
