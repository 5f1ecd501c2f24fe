use std::sync::Arc;

use graphstab::catalog::{bouncing_ball, constant_drift};
use graphstab::example::{build_example, make_reference, quarter_grid, ExampleParams};
use graphstab::hypotheses::{check_boundedness, Condition, Verdict};
use graphstab::metrics::{graphical_eps, rho_a, rho_a_oracle, rho_eps, rho_trace, stability_sweep, Branch, GraphicalOptions, OracleGrid, SweepParams};
use graphstab::simulator::FlowStop;
use graphstab::{flow_until_event, simulate, simulate_reversed, Config64, SimError, State64, System64};

fn sv(x: &[f64]) -> State64 {
    State64::from_f64(x)
}

fn gravity() -> System64 {
    bouncing_ball(0.5, 0.0)
}

fn plant() -> System64 {
    build_example(&ExampleParams::default(), None)
}

#[test]
fn gravity_event_and_horizon_stop() {
    let sys = gravity();
    let seg = flow_until_event(&sys, &sv(&[1.0, 0.0]), 0.0, &Config64::default().with_horizon(10.0)).unwrap();
    let FlowStop::Event { t_event, x_event } = &seg.stop else {
        panic!("expected an event, got {:?}", seg.stop);
    };
    assert!((t_event - 2f64.sqrt()).abs() < 1e-8);
    assert!(x_event[0].abs() <= 1e-10);
    assert!((x_event[1] + 2f64.sqrt()).abs() < 1e-8);

    let seg = flow_until_event(&sys, &sv(&[1.0, 0.0]), 0.0, &Config64::default().with_horizon(1.0)).unwrap();
    assert!(matches!(seg.stop, FlowStop::Horizon));
    let last = seg.last();
    assert!((last.x[0] - 0.5).abs() < 1e-10 && (last.x[1] + 1.0).abs() < 1e-10);

    let err = flow_until_event(&sys, &sv(&[-1.0, 0.0]), 0.0, &Config64::default()).unwrap_err();
    assert!(matches!(err, SimError::NotInFlowSet { .. }));
}

#[test]
fn gravity_bounce_and_jump_cap() {
    let sys = gravity();
    let arc = simulate(&sys, &sv(&[1.0, 0.0]), &Config64::default().with_horizon(2.0)).unwrap();
    let jump = &arc.jumps[0];
    assert!((jump.t_jump - 2f64.sqrt()).abs() < 1e-8);
    assert!((jump.x_plus[1] - 2f64.sqrt() / 2.0).abs() < 1e-8);

    let capped = simulate(&sys, &sv(&[1.0, 0.0]), &Config64::default().with_horizon(3.0).with_jump_cap(0)).unwrap();
    assert_eq!(capped.segments.len(), 1);
    assert_eq!(capped.jump_count(), 0);
}

#[test]
fn damped_oscillator_matches_closed_form() {
    // From (2, 0) the mass never reaches the stop; y = x₁ − 1 is a free damped oscillation.
    let arc = simulate(&plant(), &sv(&[2.0, 0.0]), &Config64::default().with_horizon(10.0)).unwrap();
    assert_eq!(arc.jump_count(), 0);
    let w = (1.0f64 - 0.01 * 0.01).sqrt();
    let mut worst = 0.0f64;
    for (_, s) in arc.samples() {
        let y = (-0.01 * s.t).exp() * ((w * s.t).cos() + 0.01 / w * (w * s.t).sin());
        worst = worst.max((s.x[0] - 1.0 - y).abs());
    }
    assert!(worst <= 1e-8, "max deviation {worst:e}");
}

#[test]
fn reversed_flow_reaches_jump_image() {
    let sys = gravity();
    let seg = simulate_reversed(&sys, &sv(&[0.007, 0.7]), 0.0, &Config64::default().with_horizon(1.0)).unwrap();
    let FlowStop::Event { t_event, x_event } = &seg.stop else {
        panic!("expected a crossing, got {:?}", seg.stop);
    };
    assert!((t_event.abs() - 0.01).abs() < 1e-3);
    assert!(x_event[0].abs() <= 1e-10);

    let seg = simulate_reversed(&plant(), &sv(&[1.0, 0.0]), 0.0, &Config64::default().with_horizon(5.0)).unwrap();
    assert!(matches!(seg.stop, FlowStop::Horizon));
    assert!(seg.samples.iter().all(|s| s.x.as_slice() == [1.0, 0.0]));
}

#[test]
fn rho_documented_values() {
    let sys = plant();
    let same = rho_a(&sys, &[1.0, 0.0], &[1.0, 0.0]).unwrap();
    assert_eq!((same.value, same.branch), (0.0, Branch::A00));

    let jump = rho_a(&sys, &[0.0, -1.0], &[0.0, 0.8]).unwrap();
    assert!(jump.value <= 1e-12);
    assert_eq!(jump.branch, Branch::A10);

    let near = rho_a(&sys, &[1.0, 0.0], &[1.0, 0.1]).unwrap();
    assert!((near.value - 0.1 / 2f64.sqrt()).abs() < 1e-12);
    assert_eq!(near.branch, Branch::A00);

    let grid = OracleGrid {
        lo: vec![-0.5, -4.5],
        hi: vec![3.0, 4.5],
        step: 1e-3,
    };
    let oracle = rho_a_oracle(&sys, &[1.0, 0.0], &[1.0, 0.1], grid.clone()).unwrap().value;
    assert!((oracle - near.value).abs() <= 5e-3);
    let forced = rho_a_oracle(&sys, &[0.01, -1.0], &[0.005, 0.81], grid).unwrap().value;
    assert!(forced <= 0.015 + 1e-12);
    assert!(rho_a(&sys, &[0.01, -1.0], &[0.005, 0.81]).unwrap().value <= 0.015);
}

#[test]
fn jump_branches_not_both_zero_for_distinct_states() {
    let sys = plant();
    for v in [-0.5, -1.0, -2.5] {
        let z = [0.0, v];
        let g = sys.jump(&z);
        let r = rho_a(&sys, &z, &g).unwrap();
        assert!(r.branch_values.a10 <= 1e-9, "{:?}", r.branch_values);
        assert!(r.branch_values.a01 > 0.1);
    }
}

#[test]
fn drift_shift_and_self_closeness() {
    let sys = constant_drift(1.0);
    let config = Config64::default().with_horizon(1.0);
    let a = simulate(&sys, &sv(&[0.0]), &config).unwrap();
    let b = simulate(&sys, &sv(&[0.05]), &config).unwrap();
    let opts = GraphicalOptions::default();
    let eps = graphical_eps(&a, &b, 0.0, &opts).unwrap();
    assert!((eps.epsilon - 0.05).abs() <= 1e-3, "{}", eps.epsilon);
    assert!(graphical_eps(&a, &a, 0.0, &opts).unwrap().epsilon <= 1e-3);
    assert_eq!(rho_eps(&a, &a, &sys, 0.0).unwrap().epsilon, 0.0);
    assert!(rho_eps(&a, &b, &sys, 5.0).is_err());
    assert!(graphical_eps(&a, &b, 5.0, &opts).is_err());
}

#[test]
fn bouncing_pair_peaks_only_in_equal_time_distance() {
    let sys = gravity();
    let config = Config64::default().with_horizon(2.0);
    let a = simulate(&sys, &sv(&[1.0, 0.0]), &config).unwrap();
    let b = simulate(&sys, &sv(&[1.02, 0.0]), &config).unwrap();
    let trace = rho_trace(&a, &b, &sys, 1e-3).unwrap();
    let peak = trace.euclid_sup(1.3, 1.5);
    let graphical = graphical_eps(&a, &b, 0.0, &GraphicalOptions::default()).unwrap().epsilon;
    let rho = trace.rho_sup(0.0, f64::INFINITY);
    assert!(peak > 1.0, "{peak}");
    assert!(graphical < 0.05 && rho < 0.05, "{graphical} {rho}");
}

#[test]
fn boundedness_via_reference_arc() {
    let p = ExampleParams::default();
    let reference = make_reference(&p, &sv(&p.reference_x0), &Config64::default()).unwrap();
    let report = check_boundedness(&plant(), Some(&reference), 10.0);
    assert_eq!(report.verdict(Condition::Boundedness), Verdict::Pass);
    let report = check_boundedness(&plant(), Some(&reference), 2.0);
    assert_eq!(report.verdict(Condition::Boundedness), Verdict::Fail);
    assert!(report.get(Condition::Boundedness).unwrap().counterexample.is_some());
    assert_eq!(check_boundedness(&plant(), None, 10.0).verdict(Condition::Boundedness), Verdict::Unknown);
}

#[test]
fn sweep_zero_radius_and_destabilized_feedback() {
    let p = ExampleParams::default();
    let horizon = 8.0;
    let reference = make_reference(&ExampleParams { horizon, ..p.clone() }, &sv(&p.reference_x0), &Config64::default()).unwrap();
    let config = Config64::default().with_horizon(horizon);
    let zero = stability_sweep(&plant(), &reference, &SweepParams::new(vec![0.0], 2, vec![0.0], config)).unwrap();
    assert_eq!(zero.radii[0].graphical_eps, Some(0.0));
    assert_eq!(zero.radii[0].rho_eps, Some(0.0));

    let flipped = ExampleParams {
        feedback_gains: (-2.0, -2.0),
        ..p
    };
    let unstable = build_example(&flipped, Some(Arc::new(reference.clone())));
    // The switching target makes the flipped loop discontinuous; samples that
    // chatter on the switching surface hit the step limit and count as failures.
    let capped = Config64 {
        max_steps: 200_000,
        ..config
    };
    let params = SweepParams::new(vec![0.05], 4, quarter_grid(horizon), capped).with_seed(3);
    let report = stability_sweep(&unstable, &reference, &params).unwrap();
    assert!(!report.verdicts.decaying_tail);
}
