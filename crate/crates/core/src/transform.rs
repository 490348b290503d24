//! The `p = 1` substitution `u = v e^{C(t)}`, `C(t) = ∫_0^t c`.
//!
//! `v` solves the heat equation without reaction and with the weighted flux
//! `∂v/∂ν = k(t) ∫_0^t e^{qC(τ) - C(t)} v^q dτ = k(t) e^{-C(t)} A(t)`, where
//! `A(t) = ∫_0^t e^{qC(τ)} v^q(x_b, τ) dτ` is accumulated like the plain
//! memory.

use crate::coeffs::CoefficientSpec;
use crate::error::{Error, Result};
use crate::pde::{BoundaryLaw, Problem, RunStatus, Scenario, Simulation};

#[derive(Debug, Clone, PartialEq)]
pub struct TransformedScenario {
    pub base: Scenario,
}

impl TransformedScenario {
    pub fn cumulative(&self, t: f64) -> f64 {
        self.base.c.cumulative(t)
    }

    /// Memory kernel `ρ(t, τ) = e^{qC(τ) - C(t)}`.
    pub fn weight(&self, t: f64, tau: f64) -> f64 {
        (self.base.q * self.cumulative(tau) - self.cumulative(t)).exp()
    }

    /// Reaction-free problem with the weighted accumulator.
    pub fn problem(&self) -> Problem {
        Problem { reaction: false, law: BoundaryLaw::WeightedMemory, ..self.base.problem() }
    }
}

pub fn to_transformed(scenario: &Scenario) -> Result<TransformedScenario> {
    if scenario.p != 1.0 {
        return Err(Error::NotApplicable(format!(
            "the exponential substitution needs p = 1, got p = {}",
            scenario.p
        )));
    }
    Ok(TransformedScenario { base: scenario.clone() })
}

/// `u = v e^{C(t)}`.
pub fn from_transformed(v: &[f64], c: &CoefficientSpec, t: f64) -> Vec<f64> {
    let factor = c.cumulative(t).exp();
    v.iter().map(|x| x * factor).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    /// `max_t ‖u_direct - u_mapped‖_∞ / (1 + ‖u_direct‖_∞)`.
    pub discrepancy: f64,
    pub direct_status: RunStatus,
    pub transformed_status: RunStatus,
    /// Last time both routes were compared.
    pub t_compared: f64,
    pub t_cross_direct: Option<f64>,
    pub t_cross_transformed: Option<f64>,
}

impl EquivalenceReport {
    pub fn statuses_agree(&self) -> bool {
        self.direct_status.label() == self.transformed_status.label()
    }
}

fn crossing(t0: f64, s0: f64, t1: f64, s1: f64, threshold: f64) -> f64 {
    if s1.is_finite() && s0 > 0.0 && s1 > s0 {
        t0 + (t1 - t0) * (threshold.ln() - s0.ln()) / (s1.ln() - s0.ln())
    } else {
        t1
    }
}

/// Solves the original problem and the transformed one on a shared step
/// sequence (the direct route's adaptive steps), maps `v` back after every
/// step and reports the largest relative discrepancy. Each route stops at
/// the horizon `t_end` or when its `u` reaches the blow-up threshold.
pub fn equivalence_check(scenario: &Scenario, t_end: f64) -> Result<EquivalenceReport> {
    scenario.validate()?;
    let transformed = to_transformed(scenario)?;
    let threshold = scenario.controls.blowup_threshold;
    let mut direct_problem = scenario.problem();
    direct_problem.controls.t_max = t_end;
    let mut mapped_problem = transformed.problem();
    mapped_problem.controls.t_max = t_end;
    // the transformed route's blow-up test is applied to the mapped field
    mapped_problem.controls.blowup_threshold = f64::INFINITY;

    let mut direct = Simulation::new(direct_problem, scenario.initial_state());
    let mut mapped = Simulation::new(mapped_problem, scenario.initial_state());
    let c = &scenario.c;
    let mut report = EquivalenceReport {
        discrepancy: 0.0,
        direct_status: RunStatus::GlobalToHorizon,
        transformed_status: RunStatus::GlobalToHorizon,
        t_compared: 0.0,
        t_cross_direct: None,
        t_cross_transformed: None,
    };
    let mut direct_done: Option<RunStatus> = None;
    let mut mapped_done: Option<RunStatus> = None;
    let mut prev_direct = (0.0, direct.state.sup_norm());
    let mut prev_mapped = (0.0, mapped.state.sup_norm());
    while direct_done.is_none() || mapped_done.is_none() {
        let dt = if direct_done.is_none() { direct.proposed_dt() } else { mapped.proposed_dt() };
        if direct_done.is_none() {
            if let Some(s) = direct.check_termination() {
                direct_done = Some(s);
            } else if let crate::pde::Progress::Finished(s) = direct.advance(dt)? {
                direct_done = Some(s);
            }
            let sup = direct.state.sup_norm();
            if direct_done == Some(RunStatus::BlowUp) && report.t_cross_direct.is_none() {
                report.t_cross_direct = Some(crossing(prev_direct.0, prev_direct.1, direct.state.t, sup, threshold));
            }
            prev_direct = (direct.state.t, sup);
        }
        if mapped_done.is_none() {
            if let Some(s) = mapped.check_termination() {
                mapped_done = Some(s);
            } else if let crate::pde::Progress::Finished(s) = mapped.advance(dt)? {
                mapped_done = Some(s);
            }
            let t = mapped.state.t;
            let u = from_transformed(&mapped.state.u, c, t);
            let sup = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if mapped_done.is_none() && sup >= threshold {
                mapped_done = Some(RunStatus::BlowUp);
            }
            if mapped_done == Some(RunStatus::BlowUp) && report.t_cross_transformed.is_none() {
                report.t_cross_transformed = Some(crossing(prev_mapped.0, prev_mapped.1, t, sup, threshold));
            }
            prev_mapped = (t, sup);
            if direct_done.is_none() || direct.state.t == t {
                if direct.state.t == t && direct.state.sup_norm().is_finite() && sup.is_finite() {
                    let scale = 1.0 + direct.state.sup_norm();
                    let diff = direct.state.u.iter().zip(&u).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                    report.discrepancy = report.discrepancy.max(diff / scale);
                    report.t_compared = t;
                }
            }
        }
    }
    report.direct_status = direct_done.unwrap_or(RunStatus::GlobalToHorizon);
    report.transformed_status = mapped_done.unwrap_or(RunStatus::GlobalToHorizon);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::InitialSpec;

    fn scenario(c: CoefficientSpec, k: CoefficientSpec, u0: f64) -> Scenario {
        let mut s = Scenario::new(1.0, 2.0, c, k, InitialSpec::constant(u0));
        s.controls.nodes = 51;
        s
    }

    #[test]
    fn rejects_nonlinear_reaction() {
        let s = Scenario { p: 2.0, ..scenario(CoefficientSpec::zero(), CoefficientSpec::zero(), 1.0) };
        assert!(matches!(to_transformed(&s), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn kernel_and_mapping() {
        let t = to_transformed(&scenario(CoefficientSpec::constant(1.0), CoefficientSpec::zero(), 1.0)).unwrap();
        for (tt, tau) in [(1.0, 0.5), (3.0, 2.0), (2.0, 2.0)] {
            assert!((t.weight(tt, tau) - (2.0 * tau - tt).exp()).abs() < 1e-12 * t.weight(tt, tau));
            assert!(t.weight(tt, tt) <= (t.cumulative(tt)).exp() * (1.0 + 1e-14));
        }
        let v = [1.0, 2.0];
        assert_eq!(from_transformed(&v, &CoefficientSpec::constant(1.0), 0.0), v.to_vec());
        let u = from_transformed(&v, &CoefficientSpec::constant(1.0), 1.0);
        assert!((u[1] - 2.0 * std::f64::consts::E).abs() < 1e-14);
        assert_eq!(from_transformed(&v, &CoefficientSpec::zero(), 7.0), v.to_vec());
    }

    #[test]
    fn zero_c_routes_match() {
        let s = scenario(CoefficientSpec::zero(), CoefficientSpec::power(1.0, 4.0), 0.2);
        let r = equivalence_check(&s, 2.0).unwrap();
        assert!(r.discrepancy <= 1e-10);
        assert!(r.statuses_agree());
    }

    #[test]
    fn no_flux_round_trip_is_scalar_growth() {
        let s = scenario(CoefficientSpec::power(1.0, 2.0), CoefficientSpec::zero(), 0.7);
        let t = to_transformed(&s).unwrap();
        let mut sim = Simulation::new(Problem { controls: crate::pde::SolverControls { t_max: 3.0, ..s.controls.clone() }, ..t.problem() }, s.initial_state());
        while sim.check_termination().is_none() {
            let dt = sim.proposed_dt();
            sim.advance(dt).unwrap();
        }
        let u = from_transformed(&sim.state.u, &s.c, sim.state.t);
        let exact = 0.7 * s.c.cumulative(sim.state.t).exp();
        assert!(u.iter().all(|v| (v - exact).abs() < 1e-12));
    }

    #[test]
    fn blowup_routes_agree() {
        let mut s = scenario(CoefficientSpec::constant(1.0), CoefficientSpec::constant(1.0), 1.0);
        s.controls.t_max = 20.0;
        let r = equivalence_check(&s, 20.0).unwrap();
        assert_eq!(r.direct_status, RunStatus::BlowUp);
        assert!(r.statuses_agree());
        let (a, b) = (r.t_cross_direct.unwrap(), r.t_cross_transformed.unwrap());
        assert!((a - b).abs() <= 0.05 * a);
    }
}
