//! Fixtures shared by the benchmarks.

use memheat_core::ode_oracle::OdeProblem;
use memheat_core::pde::{InitialSpec, Scenario, State};
use memheat_core::CoefficientSpec;

/// Memory-driven blow-up scenario (`p = 1`, `q = 2`, `k ≡ 1`) on `nodes`
/// grid points.
pub fn memory_scenario(nodes: usize) -> Scenario {
    let mut s = Scenario::new(1.0, 2.0, CoefficientSpec::zero(), CoefficientSpec::constant(1.0), InitialSpec::cos_bump(1.0));
    s.controls.nodes = nodes;
    s
}

/// A state part-way into the memory scenario, with nonzero memory.
pub fn warm_state(scenario: &Scenario) -> State {
    let mut state = scenario.initial_state();
    state.t = 0.5;
    state.m_left = 0.4;
    state.m_right = 0.4;
    state.last_dt = Some(1e-4);
    state
}

/// `(p, q, c, k)` tuples covering every classification rule.
pub fn classification_cases() -> Vec<(f64, f64, CoefficientSpec, CoefficientSpec)> {
    vec![
        (0.5, 1.0, CoefficientSpec::constant(1.0), CoefficientSpec::constant(1.0)),
        (2.0, 2.0, CoefficientSpec::constant(1.0), CoefficientSpec::zero()),
        (1.0, 2.0, CoefficientSpec::zero(), CoefficientSpec::constant(1.0)),
        (2.0, 2.0, CoefficientSpec::power(1.0, 2.0), CoefficientSpec::power(1.0, 3.0)),
        (2.0, 2.0, CoefficientSpec::zero(), CoefficientSpec::power_log(1.0, 2.0, 1, 1.0)),
        (1.0, 2.0, CoefficientSpec::power(1.0, 1.0), CoefficientSpec::power_log(1.0, 3.0, 1, 0.0)),
    ]
}

/// `y'' = y²` with the energy-level data that blows up at `√6`.
pub fn ode_problem() -> OdeProblem {
    OdeProblem { a: 0.0, y_a: 1.0, yp_a: (2.0f64 / 3.0).sqrt(), q: 2.0, b: CoefficientSpec::constant(1.0) }
}
