use std::sync::OnceLock;

use graphstab::catalog::bouncing_ball;
use graphstab::example::{build_example, ExampleParams};
use graphstab::metrics::{graphical_eps, rho_a, GraphicalOptions, OracleGrid, OracleTable};
use graphstab::state::distance;
use graphstab::{simulate, Config64, State64, System64};
use proptest::prelude::*;

fn plant() -> System64 {
    build_example(&ExampleParams::default(), None)
}

fn table() -> &'static OracleTable<f64> {
    static TABLE: OnceLock<OracleTable<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        OracleTable::build(
            &plant(),
            OracleGrid {
                lo: vec![-0.5, -4.5],
                hi: vec![3.0, 4.5],
                step: 2e-3,
            },
        )
        .unwrap()
    })
}

fn state() -> impl Strategy<Value = [f64; 2]> {
    (-0.5f64..3.0, -3.0f64..3.0).prop_map(|(a, b)| [a, b])
}

/// Points on the impact surface, where the jump branches matter most.
fn surface_state() -> impl Strategy<Value = [f64; 2]> {
    prop_oneof![state(), (-3.0f64..3.0).prop_map(|v| [0.0, v]), (-0.05f64..0.05, -3.0f64..3.0).prop_map(|(a, b)| [a, b])]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn rho_is_symmetric(x in surface_state(), y in surface_state()) {
        let sys = plant();
        let a = rho_a(&sys, &x, &y).unwrap();
        let b = rho_a(&sys, &y, &x).unwrap();
        prop_assert_eq!(a.value.to_bits(), b.value.to_bits());
        prop_assert_eq!(a.branch_values.a01.to_bits(), b.branch_values.a10.to_bits());
        prop_assert_eq!(a.branch_values.a00.to_bits(), b.branch_values.a00.to_bits());
    }

    #[test]
    fn rho_bounded_by_euclidean_gap(x in surface_state(), y in surface_state()) {
        let sys = plant();
        let r = rho_a(&sys, &x, &y).unwrap();
        let gap = distance(&x, &y);
        prop_assert!(r.branch_values.a00 >= gap / 2f64.sqrt());
        if sys.in_state_space(&x) {
            prop_assert!(r.value <= gap, "rho {} > gap {}", r.value, gap);
        }
        let min = r.branch_values.a00.min(r.branch_values.a01).min(r.branch_values.a10);
        prop_assert_eq!(r.value, min);
    }

    #[test]
    fn rho_vanishes_on_jump_pairs(v in -3.0f64..-0.5) {
        let sys = plant();
        let z = [0.0, v];
        let g = sys.jump(&z);
        prop_assert!(rho_a(&sys, &z, &g).unwrap().value <= 1e-9);
        prop_assert!(rho_a(&sys, &g, &z).unwrap().value <= 1e-9);
    }

    #[test]
    fn rho_agrees_with_grid_oracle(x in surface_state(), y in surface_state()) {
        let sys = plant();
        let r = rho_a(&sys, &x, &y).unwrap();
        let o = table().evaluate(&sys, &x, &y);
        prop_assert!((r.value - o.value).abs() <= 5e-3, "rho {} oracle {}", r.value, o.value);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn simulation_is_deterministic_and_valid(x1 in 0.0f64..3.0, x2 in -2.0f64..2.0, horizon in 0.0f64..8.0) {
        let sys = plant();
        let config = Config64::default().with_horizon(horizon);
        let x0 = State64::from_f64(&[x1, x2]);
        let a = simulate(&sys, &x0, &config).unwrap();
        let b = simulate(&sys, &x0, &config).unwrap();
        prop_assert_eq!(a.to_json(), b.to_json());
        prop_assert!(a.check_against(&sys, config.event_tol).is_ok());
        prop_assert!(a.final_time() <= horizon);
        for jump in &a.jumps {
            prop_assert!(sys.jump_event(&jump.x_minus).abs() <= config.event_tol);
            prop_assert!(sys.jump_predicate(&jump.x_minus));
        }
    }

    #[test]
    fn graphical_eps_is_symmetric(h in 0.5f64..1.5, dh in -0.05f64..0.05) {
        let sys = bouncing_ball(0.5, 0.0);
        let config = Config64::default().with_horizon(3.0);
        let a = simulate(&sys, &State64::from_f64(&[h, 0.0]), &config).unwrap();
        let b = simulate(&sys, &State64::from_f64(&[h + dh, 0.0]), &config).unwrap();
        let opts = GraphicalOptions::default();
        let ab = graphical_eps(&a, &b, 0.0, &opts).unwrap();
        let ba = graphical_eps(&b, &a, 0.0, &opts).unwrap();
        prop_assert_eq!(ab.epsilon, ba.epsilon);
        prop_assert_eq!(ab.direction_forward, ba.direction_backward);
        prop_assert_eq!(ab.epsilon, ab.direction_forward.max(ab.direction_backward));
    }
}
