//! Regime classification of `(p, q, c, k)`.
//!
//! The rules are evaluated in a fixed order and the first certified one
//! determines the verdict:
//!
//! 1. `max(p, q) ≤ 1`: every solution is global.
//! 2. `p > 1` and `∫ c = ∞`: every nontrivial solution blows up.
//! 3. `q > 1`, `∫ t k̲ = ∞`, and either `k̲ ≤ C/t²` or `t^{1-q} k̲`
//!    nonincreasing for large t: every nontrivial solution blows up.
//! 4. `p = 1`, `q > 1`, the exponentially weighted analogue of rule 3.
//! 5. `min(p, q) > 1`, `∫ (c + t k) < ∞` and the sliding-window bound on
//!    `t k(t)`: bounded global solutions for small data.
//! 6. `p = 1`, `q > 1`, the weighted analogues of rule 5: global solutions
//!    for small data, bounded when additionally `∫ c < ∞`.
//!
//! Anything else is reported as indeterminate.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::asymptotic::Asymptotic;
use crate::coeffs::{
    self, CoefficientSpec, EventualCheck, IntegralStatus, IntegralVerdict, QuadraturePolicy,
    WindowCheck, Weight,
};
use crate::error::{Error, Result};
use crate::weights::{Cumulative, EffectiveFlux, ExpWeightIntegral};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    GlobalAll,
    BlowUpAll,
    GlobalSmallData,
    BoundedGlobalSmallData,
    Indeterminate,
}

impl Regime {
    pub fn is_blow_up(self) -> bool {
        self == Regime::BlowUpAll
    }

    pub fn is_small_data(self) -> bool {
        matches!(self, Regime::GlobalSmallData | Regime::BoundedGlobalSmallData)
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Regime::GlobalAll => "GlobalAll",
            Regime::BlowUpAll => "BlowUpAll",
            Regime::GlobalSmallData => "GlobalSmallData",
            Regime::BoundedGlobalSmallData => "BoundedGlobalSmallData",
            Regime::Indeterminate => "Indeterminate",
        };
        f.write_str(s)
    }
}

/// The rule that certified a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    /// `max(p, q) ≤ 1`.
    SublinearGlobal,
    /// `p > 1`, divergent `∫ c`.
    ReactionBlowUp,
    /// `q > 1`, divergent `∫ t k̲` with a tail-shape alternative.
    MemoryBlowUp,
    /// `p = 1`, `q > 1`, weighted memory blow-up.
    LinearReactionBlowUp,
    /// `min(p, q) > 1`, integrable coefficients.
    SmallDataBounded,
    /// `p = 1`, `q > 1`, weighted integrability.
    LinearReactionSmallData,
}

impl Rule {
    pub fn label(self) -> &'static str {
        match self {
            Rule::SublinearGlobal => "sublinear-global",
            Rule::ReactionBlowUp => "reaction-blowup",
            Rule::MemoryBlowUp => "memory-blowup",
            Rule::LinearReactionBlowUp => "linear-reaction-blowup",
            Rule::SmallDataBounded => "small-data-bounded",
            Rule::LinearReactionSmallData => "linear-reaction-small-data",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Outcome of one evaluated condition.
#[derive(Debug, Clone, PartialEq)]
pub enum ConditionResult {
    Integral(IntegralVerdict),
    Flag { holds: bool, evidence: String },
}

impl ConditionResult {
    fn flag(check: &EventualCheck) -> Self {
        ConditionResult::Flag { holds: check.holds, evidence: check.evidence.clone() }
    }

    fn window(check: &WindowCheck) -> Self {
        ConditionResult::Flag {
            holds: check.holds,
            evidence: format!("sup of window integral over probes = {:.6e}", check.k_sup),
        }
    }

    pub fn is_indeterminate(&self) -> bool {
        matches!(self, ConditionResult::Integral(v) if v.status == IntegralStatus::Indeterminate)
    }

    pub fn status_text(&self) -> String {
        match self {
            ConditionResult::Integral(v) => v.status.to_string(),
            ConditionResult::Flag { holds: true, .. } => "holds".into(),
            ConditionResult::Flag { holds: false, .. } => "fails".into(),
        }
    }

    pub fn evidence(&self) -> &str {
        match self {
            ConditionResult::Integral(v) => &v.evidence,
            ConditionResult::Flag { evidence, .. } => evidence,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub id: &'static str,
    pub result: ConditionResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeVerdict {
    pub regime: Regime,
    pub rule: Option<Rule>,
    pub conditions: Vec<Condition>,
    pub small_data_bound: Option<f64>,
    pub note: Option<String>,
}

/// Tunables of the classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyOptions {
    /// Lower bound `k̲ ≤ k` used by the blow-up rules; defaults to `k`.
    pub k_lower: Option<CoefficientSpec>,
    pub policy: QuadraturePolicy,
    /// Window length of the sliding-window bound.
    pub t0: f64,
    /// First probe time of the sliding-window bound (`alpha > t0`).
    pub alpha: f64,
    /// Last probe time of the sliding-window bound.
    pub t_probe: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            k_lower: None,
            policy: QuadraturePolicy::default(),
            t0: 1.0,
            alpha: 2.0,
            t_probe: 1e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedBlowUpConditions {
    /// Divergence of `∫ t^{1-q} e^{-C} (∫_0^t e^{C})^q k̲`.
    pub weighted_integral: IntegralVerdict,
    /// `t^{1-q} e^{-2C} (∫_0^t e^{C})^{q+1} k̲` bounded for large t.
    pub weighted_bounded: EventualCheck,
    /// `t^{1-q} e^{-2C} k̲` nonincreasing for large t.
    pub weighted_nonincreasing: EventualCheck,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSmallDataConditions {
    /// Convergence of `∫ k e^{-C} ∫_0^t e^{qC}`.
    pub flux_integral: IntegralVerdict,
    /// Sliding-window bound on the effective flux.
    pub flux_window: WindowCheck,
    /// Convergence of `∫ c`.
    pub c_integral: IntegralVerdict,
}

fn check_exponents(p: f64, q: f64) -> Result<()> {
    if !(p.is_finite() && p > 0.0) {
        return Err(Error::Config("exponents.p must be > 0".into()));
    }
    if !(q.is_finite() && q > 0.0) {
        return Err(Error::Config("exponents.q must be > 0".into()));
    }
    Ok(())
}

/// Conditions of the weighted memory blow-up rule (`p = 1`, `q > 1`).
pub fn check_weighted_blowup_conditions(
    q: f64,
    c: &CoefficientSpec,
    k_lower: &CoefficientSpec,
    t_large: f64,
    policy: &QuadraturePolicy,
) -> Result<WeightedBlowUpConditions> {
    if !(q > 1.0) {
        return Err(Error::NotApplicable(format!("needs q > 1, got {q}")));
    }
    c.validate()?;
    k_lower.validate()?;
    if c.is_zero() {
        // the exponential weights collapse to 1 and ∫_0^t e^{C} = t
        let weighted_integral = coeffs::integrate_improper(k_lower, Weight::Linear, 0.0, policy)?;
        let (weighted_bounded, weighted_nonincreasing) = memory_tail_alternatives(q, k_lower, t_large);
        return Ok(WeightedBlowUpConditions { weighted_integral, weighted_bounded, weighted_nonincreasing });
    }
    let horizon = policy.t_max * 10.0;
    let cum = Cumulative::new(c, horizon);
    let e1 = ExpWeightIntegral::new(&cum, 1.0, horizon);

    let exp_minus_c = c.exp_cumulative_profile(-1.0);
    let exp_c = c.exp_cumulative_profile(1.0);
    let k_prof = k_lower.profile();
    let base = Asymptotic::power(1.0 - q);
    let int_profile = match (&exp_minus_c, &exp_c, &k_prof) {
        (Some(em), Some(ep), Some(kp)) => {
            Some(base.mul(em).mul(&ep.integral().powf(q)).mul(kp))
        }
        _ => None,
    };
    let log_int_fn = |t: f64| {
        (1.0 - q) * t.ln() - cum.value(t) + q * e1.log_value(t) + k_lower.value(t).ln()
    };
    let int_fn = |t: f64| if t <= 0.0 { 0.0 } else { log_int_fn(t).exp() };
    let weighted_integral = coeffs::improper_with_profile(int_profile.as_ref(), &int_fn, 0.0, policy);

    let bounded_profile = match (&exp_minus_c, &exp_c, &k_prof) {
        (Some(em), Some(ep), Some(kp)) => {
            Some(base.mul(&em.powf(2.0)).mul(&ep.integral().powf(q + 1.0)).mul(kp))
        }
        _ => None,
    };
    let bounded_fn = |t: f64| {
        ((1.0 - q) * t.ln() - 2.0 * cum.value(t) + (q + 1.0) * e1.log_value(t)
            + k_lower.value(t).ln())
        .exp()
    };
    let weighted_bounded = coeffs::eventually_bounded(bounded_profile.as_ref(), &bounded_fn, t_large);

    let mono_profile = match (&exp_minus_c, &k_prof) {
        (Some(em), Some(kp)) => Some(base.mul(&em.powf(2.0)).mul(kp)),
        _ => None,
    };
    let mono_fn = |t: f64| ((1.0 - q) * t.ln() - 2.0 * cum.value(t) + k_lower.value(t).ln()).exp();
    let weighted_nonincreasing = coeffs::eventually_nonincreasing(mono_profile.as_ref(), &mono_fn, t_large);
    Ok(WeightedBlowUpConditions { weighted_integral, weighted_bounded, weighted_nonincreasing })
}

/// Conditions of the weighted small-data rule (`p = 1`, `q > 1`).
pub fn check_weighted_small_data_conditions(
    q: f64,
    c: &CoefficientSpec,
    k: &CoefficientSpec,
    t0: f64,
    alpha: f64,
    t_probe: f64,
    policy: &QuadraturePolicy,
) -> Result<WeightedSmallDataConditions> {
    if !(q > 1.0) {
        return Err(Error::NotApplicable(format!("needs q > 1, got {q}")));
    }
    c.validate()?;
    k.validate()?;
    let c_integral = coeffs::integrate_improper(c, Weight::One, 0.0, policy)?;
    if c.is_zero() {
        let flux_integral = coeffs::integrate_improper(k, Weight::Linear, 0.0, policy)?;
        let flux_window = coeffs::check_linear_flux_window(k, t0, alpha, t_probe)?;
        return Ok(WeightedSmallDataConditions { flux_integral, flux_window, c_integral });
    }
    let horizon = policy.t_max * 10.0;
    let flux = EffectiveFlux::new(q, c, k, horizon);
    let prof = match (c.exp_cumulative_profile(-1.0), c.exp_cumulative_profile(q), k.profile()) {
        (Some(em), Some(eq), Some(kp)) => Some(kp.mul(&em).mul(&eq.integral())),
        _ => None,
    };
    let f = |t: f64| flux.value(t);
    let flux_integral = coeffs::improper_with_profile(prof.as_ref(), &f, 0.0, policy);
    let flux_window = coeffs::check_window_bound(&f, t0, alpha, t_probe)?;
    Ok(WeightedSmallDataConditions { flux_integral, flux_window, c_integral })
}

/// The two tail-shape alternatives of the memory blow-up rule.
fn memory_tail_alternatives(
    q: f64,
    k_lower: &CoefficientSpec,
    t_large: f64,
) -> (EventualCheck, EventualCheck) {
    let prof = k_lower.profile();
    let quadratic_profile = prof.as_ref().map(|p| p.mul(&Asymptotic::power(2.0)));
    let quadratic_fn = |t: f64| t * t * k_lower.value(t);
    let quadratic_bound = coeffs::eventually_bounded(quadratic_profile.as_ref(), &quadratic_fn, t_large);
    let tail_profile = prof.as_ref().map(|p| p.mul(&Asymptotic::power(1.0 - q)));
    let tail_fn = |t: f64| t.powf(1.0 - q) * k_lower.value(t);
    let tail_monotone = coeffs::eventually_nonincreasing(tail_profile.as_ref(), &tail_fn, t_large);
    (quadratic_bound, tail_monotone)
}

/// Every rule's certification status, without short-circuiting.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleScan {
    pub certified: Vec<Rule>,
    pub conditions: Vec<Condition>,
    pub bounded_upgrade: bool,
}

/// Evaluates every rule whose exponent hypotheses hold.
pub fn scan_rules(
    p: f64,
    q: f64,
    c: &CoefficientSpec,
    k: &CoefficientSpec,
    opts: &ClassifyOptions,
) -> Result<RuleScan> {
    check_exponents(p, q)?;
    c.validate()?;
    k.validate()?;
    let k_lower = opts.k_lower.as_ref().unwrap_or(k);
    k_lower.validate()?;
    let policy = &opts.policy;
    let t_large = policy.t_large;
    let mut conditions = Vec::new();
    let mut certified = Vec::new();
    let mut bounded_upgrade = false;

    if p.max(q) <= 1.0 {
        certified.push(Rule::SublinearGlobal);
        conditions.push(Condition {
            id: "max_pq_le_1",
            result: ConditionResult::Flag {
                holds: true,
                evidence: format!("max(p, q) = {} <= 1", p.max(q)),
            },
        });
        return Ok(RuleScan { certified, conditions, bounded_upgrade });
    }

    let int_c = coeffs::integrate_improper(c, Weight::One, 0.0, policy)?;
    if p > 1.0 {
        conditions.push(Condition { id: "int_c", result: ConditionResult::Integral(int_c.clone()) });
        if int_c.diverges() {
            certified.push(Rule::ReactionBlowUp);
        }
    }

    if q > 1.0 {
        let int_tk = coeffs::integrate_improper(k_lower, Weight::Linear, 0.0, policy)?;
        let (quadratic_bound, tail_monotone) = memory_tail_alternatives(q, k_lower, t_large);
        let fires = int_tk.diverges() && (quadratic_bound.holds || tail_monotone.holds);
        conditions.push(Condition { id: "int_t_klow", result: ConditionResult::Integral(int_tk) });
        conditions.push(Condition { id: "klow_le_C_over_t2", result: ConditionResult::flag(&quadratic_bound) });
        conditions.push(Condition {
            id: "t_pow_1mq_klow_nonincreasing",
            result: ConditionResult::flag(&tail_monotone),
        });
        if fires {
            certified.push(Rule::MemoryBlowUp);
        }
    }

    if p == 1.0 && q > 1.0 {
        let th3 = check_weighted_blowup_conditions(q, c, k_lower, t_large, policy)?;
        let fires = th3.weighted_integral.diverges() && (th3.weighted_bounded.holds || th3.weighted_nonincreasing.holds);
        conditions.push(Condition { id: "weighted_int_klow", result: ConditionResult::Integral(th3.weighted_integral) });
        conditions.push(Condition { id: "weighted_klow_bounded", result: ConditionResult::flag(&th3.weighted_bounded) });
        conditions.push(Condition {
            id: "weighted_klow_nonincreasing",
            result: ConditionResult::flag(&th3.weighted_nonincreasing),
        });
        if fires {
            certified.push(Rule::LinearReactionBlowUp);
        }
    }

    if p.min(q) > 1.0 {
        let int_tk = coeffs::integrate_improper(k, Weight::Linear, 0.0, policy)?;
        let window = coeffs::check_linear_flux_window(k, opts.t0, opts.alpha, opts.t_probe)?;
        let fires = int_c.converges() && int_tk.converges() && window.holds;
        conditions.push(Condition { id: "int_c_plus_tk_c", result: ConditionResult::Integral(int_c.clone()) });
        conditions.push(Condition { id: "int_c_plus_tk_tk", result: ConditionResult::Integral(int_tk) });
        conditions.push(Condition { id: "window_tk", result: ConditionResult::window(&window) });
        if fires {
            certified.push(Rule::SmallDataBounded);
        }
    }

    if p == 1.0 && q > 1.0 {
        let th4 = check_weighted_small_data_conditions(q, c, k, opts.t0, opts.alpha, opts.t_probe, policy)?;
        let fires = th4.flux_integral.converges() && th4.flux_window.holds;
        bounded_upgrade = fires && th4.c_integral.converges();
        conditions.push(Condition { id: "weighted_int_k", result: ConditionResult::Integral(th4.flux_integral) });
        conditions.push(Condition { id: "window_weighted_k", result: ConditionResult::window(&th4.flux_window) });
        conditions.push(Condition { id: "int_c_finite", result: ConditionResult::Integral(th4.c_integral) });
        if fires {
            certified.push(Rule::LinearReactionSmallData);
        }
    }

    Ok(RuleScan { certified, conditions, bounded_upgrade })
}

/// Theorem-backed regime of `(p, q, c, k)` with default options.
pub fn classify_regime(
    p: f64,
    q: f64,
    c: &CoefficientSpec,
    k: &CoefficientSpec,
) -> Result<RegimeVerdict> {
    classify_regime_with(p, q, c, k, &ClassifyOptions::default())
}

pub fn classify_regime_with(
    p: f64,
    q: f64,
    c: &CoefficientSpec,
    k: &CoefficientSpec,
    opts: &ClassifyOptions,
) -> Result<RegimeVerdict> {
    let scan = scan_rules(p, q, c, k, opts)?;
    let order = [
        Rule::SublinearGlobal,
        Rule::ReactionBlowUp,
        Rule::MemoryBlowUp,
        Rule::LinearReactionBlowUp,
        Rule::SmallDataBounded,
        Rule::LinearReactionSmallData,
    ];
    let rule = order.into_iter().find(|r| scan.certified.contains(r));
    let regime = match rule {
        Some(Rule::SublinearGlobal) => Regime::GlobalAll,
        Some(Rule::ReactionBlowUp | Rule::MemoryBlowUp | Rule::LinearReactionBlowUp) => {
            Regime::BlowUpAll
        }
        Some(Rule::SmallDataBounded) => Regime::BoundedGlobalSmallData,
        Some(Rule::LinearReactionSmallData) if scan.bounded_upgrade => {
            Regime::BoundedGlobalSmallData
        }
        Some(Rule::LinearReactionSmallData) => Regime::GlobalSmallData,
        None => Regime::Indeterminate,
    };
    let note = if regime.is_small_data() {
        Some("unresolved for large data".to_string())
    } else if regime == Regime::Indeterminate {
        let undecided = scan.conditions.iter().any(|c| c.result.is_indeterminate());
        Some(if undecided {
            "a condition could not be decided numerically".to_string()
        } else {
            format!("(p, q) = ({p}, {q}) with these coefficients is not covered by any rule")
        })
    } else {
        None
    };
    Ok(RegimeVerdict { regime, rule, conditions: scan.conditions, small_data_bound: None, note })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sublinear_is_global() {
        let v = classify_regime(0.5, 1.0, &CoefficientSpec::constant(5.0), &CoefficientSpec::constant(5.0)).unwrap();
        assert_eq!(v.regime, Regime::GlobalAll);
        assert_eq!(v.rule, Some(Rule::SublinearGlobal));
    }

    #[test]
    fn reaction_blow_up() {
        let v = classify_regime(2.0, 2.0, &CoefficientSpec::constant(1.0), &CoefficientSpec::zero()).unwrap();
        assert_eq!(v.regime, Regime::BlowUpAll);
        assert_eq!(v.rule, Some(Rule::ReactionBlowUp));
    }

    #[test]
    fn integrable_coefficients_give_small_data() {
        let v = classify_regime(2.0, 2.0, &CoefficientSpec::power(1.0, 2.0), &CoefficientSpec::power(1.0, 3.0)).unwrap();
        assert_eq!(v.regime, Regime::BoundedGlobalSmallData);
        let c_part = v.conditions.iter().find(|c| c.id == "int_c_plus_tk_c").unwrap();
        let tk_part = v.conditions.iter().find(|c| c.id == "int_c_plus_tk_tk").unwrap();
        match (&c_part.result, &tk_part.result) {
            (ConditionResult::Integral(a), ConditionResult::Integral(b)) => {
                assert!((a.value + b.value - 1.5).abs() < 1e-14);
            }
            _ => panic!("expected integral verdicts"),
        }
        assert_eq!(v.note.as_deref(), Some("unresolved for large data"));
    }

    #[test]
    fn uncovered_region_is_indeterminate() {
        let v = classify_regime(2.0, 0.5, &CoefficientSpec::power(1.0, 2.0), &CoefficientSpec::constant(1.0)).unwrap();
        assert_eq!(v.regime, Regime::Indeterminate);
        assert!(v.note.is_some());
    }

    #[test]
    fn nonpositive_exponent_is_config_error() {
        let err = classify_regime(-1.0, 2.0, &CoefficientSpec::zero(), &CoefficientSpec::zero()).unwrap_err();
        assert_eq!(err.to_string(), "configuration error: exponents.p must be > 0");
    }

    #[test]
    fn exponential_weight_killed_by_fast_decay() {
        let q = 2.0;
        let th3 = check_weighted_blowup_conditions(
            q,
            &CoefficientSpec::constant(1.0),
            &CoefficientSpec::exp_decay(1.0, 2.0 * q),
            1e3,
            &QuadraturePolicy::default(),
        )
        .unwrap();
        assert_eq!(th3.weighted_integral.status, IntegralStatus::Converges);
        assert!(th3.weighted_integral.value.is_finite() && th3.weighted_integral.value > 0.0);
    }

    #[test]
    fn remark_borderline_linear_reaction() {
        let q = 2.0;
        let beta = 1.0;
        let c = CoefficientSpec::power(beta, 1.0);
        let k = CoefficientSpec::power_log(1.0, beta * (q - 1.0) + 2.0, 1, 0.0);
        let th3 = check_weighted_blowup_conditions(q, &c, &k, 1e3, &QuadraturePolicy::default()).unwrap();
        assert_eq!(th3.weighted_integral.status, IntegralStatus::Diverges);
        let k = CoefficientSpec::power_log(1.0, beta * (q - 1.0) + 2.0, 1, 1.0);
        let th4 = check_weighted_small_data_conditions(q, &c, &k, 1.0, 2.0, 1e6, &QuadraturePolicy::default()).unwrap();
        assert_eq!(th4.flux_integral.status, IntegralStatus::Converges);
        assert!(th4.flux_window.holds);
    }

    #[test]
    fn th4_reaction_integral_value() {
        let th4 = check_weighted_small_data_conditions(
            2.0,
            &CoefficientSpec::power(1.0, 2.0),
            &CoefficientSpec::power(1.0, 3.0),
            1.0,
            2.0,
            1e4,
            &QuadraturePolicy::default(),
        )
        .unwrap();
        assert!(th4.c_integral.converges());
        assert!((th4.c_integral.value - 1.0).abs() < 1e-14);
    }
}
