use memheat_core::pde::{format_number, run, verify_comparison, InitialSpec, Scenario, SolverControls};
use memheat_core::CoefficientSpec as C;
use proptest::prelude::*;

fn small(p: f64, q: f64, c: C, k: C, initial: InitialSpec) -> Scenario {
    Scenario::new(p, q, c, k, initial).with_controls(SolverControls {
        nodes: 21,
        dt_max: 1e-2,
        t_max: 0.5,
        ..SolverControls::default()
    })
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 24,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn ordered_data_give_ordered_solutions(
        p in 0.5f64..2.0,
        q in 0.5f64..2.0,
        amp in 0.05f64..0.8,
        factor in 1.0f64..1.5,
        kc in 0.0f64..1.5,
    ) {
        // Positive bump with flat end intervals so the endpoint slopes vanish.
        let bump: Vec<f64> = (0..21)
            .map(|i: usize| {
                let x = i.clamp(1, 19) as f64 / 20.0;
                amp * (1.0 + 0.2 * (std::f64::consts::PI * x).sin())
            })
            .collect();
        let low = small(p, q, C::constant(1.0), C::constant(kc), InitialSpec::tabulated(bump));
        let high = low.with_initial(InitialSpec::constant(1.2 * amp * factor));
        let report = verify_comparison(&low, &high).unwrap();
        prop_assert!(report.holds, "violation {}", report.max_violation);
    }

    #[test]
    fn symmetric_data_stay_symmetric(
        p in 0.5f64..2.0,
        q in 0.5f64..2.0,
        amp in 0.05f64..1.0,
        kc in 0.0f64..1.0,
    ) {
        let s = small(p, q, C::exp_decay(1.0, 0.5), C::constant(kc), InitialSpec::cos_bump(amp));
        let out = run(&s).unwrap();
        let u = &out.final_state.u;
        let scale = 1.0 + out.final_state.sup_norm();
        for i in 0..u.len() {
            prop_assert!((u[i] - u[u.len() - 1 - i]).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn solutions_stay_nonnegative(
        p in 0.5f64..2.0,
        q in 0.5f64..2.0,
        amp in 0.0f64..1.0,
    ) {
        let s = small(p, q, C::constant(1.0), C::constant(1.0), InitialSpec::cos_bump(amp));
        let out = run(&s).unwrap();
        prop_assert!(out.final_state.min() >= 0.0);
    }

    #[test]
    fn zero_touching_lower_data_are_refused_below_one(p in 0.3f64..0.95, amp in 0.1f64..1.0) {
        let low = small(p, 1.0, C::constant(1.0), C::constant(1.0), InitialSpec::cos_bump(amp));
        let high = low.with_initial(InitialSpec::constant(amp));
        prop_assert!(verify_comparison(&low, &high).is_err());
    }

    #[test]
    fn formatted_numbers_round_trip(x in prop::num::f64::NORMAL | prop::num::f64::ZERO) {
        let text = format_number(x);
        prop_assert_eq!(text.parse::<f64>().unwrap(), x);
    }
}
