//! Time-dependent coefficient families `c(t)`, `k(t)`, `b(r)` and the
//! improper-integral machinery that decides the convergence conditions of the
//! regime criteria.

use serde::{Deserialize, Serialize};

use crate::asymptotic::Asymptotic;
use crate::error::{Error, Result};
use crate::quad;

/// Largest supported iterated-log depth; the next tower height `e^{T_3}`
/// overflows an `f64`.
pub const MAX_LOG_DEPTH: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Constant,
    Power,
    ExpDecay,
    PowerLog,
    Tabulated,
}

/// Parametric description of a nonnegative continuous function of time.
///
/// * `constant`: `f(t) = c0`
/// * `power`: `f(t) = c0 (1+t)^{-γ}`
/// * `exp_decay`: `f(t) = c0 e^{-λt}`
/// * `power_log`: `f(t) = c0 / (s^γ l_j(s) ln_j^δ(s))` with `s = T_j + t`,
///   `T_0 = 1`, `T_{j+1} = e^{T_j}`, so every iterated log is ≥ 1 from `t = 0`
/// * `tabulated`: piecewise-linear through `(t, value)` pairs, constant
///   beyond the ends
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSpec {
    pub family: Family,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "is_zero_u32")]
    pub log_depth: u32,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub log_power: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<(f64, f64)>>,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

fn is_zero_u32(x: &u32) -> bool {
    *x == 0
}

impl CoefficientSpec {
    fn base(family: Family, amplitude: f64) -> Self {
        CoefficientSpec {
            family,
            amplitude,
            gamma: 0.0,
            lambda: 0.0,
            log_depth: 0,
            log_power: 0.0,
            table: None,
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn constant(amplitude: f64) -> Self {
        Self::base(Family::Constant, amplitude)
    }

    pub fn power(amplitude: f64, gamma: f64) -> Self {
        CoefficientSpec { gamma, ..Self::base(Family::Power, amplitude) }
    }

    pub fn exp_decay(amplitude: f64, lambda: f64) -> Self {
        CoefficientSpec { lambda, ..Self::base(Family::ExpDecay, amplitude) }
    }

    pub fn power_log(amplitude: f64, gamma: f64, log_depth: u32, log_power: f64) -> Self {
        CoefficientSpec {
            gamma,
            log_depth,
            log_power,
            ..Self::base(Family::PowerLog, amplitude)
        }
    }

    pub fn tabulated(table: Vec<(f64, f64)>) -> Self {
        let amplitude = table.iter().map(|p| p.1).fold(0.0, f64::max);
        CoefficientSpec { table: Some(table), ..Self::base(Family::Tabulated, amplitude) }
    }

    /// Same function with the amplitude multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.amplitude *= factor;
        if let Some(table) = out.table.as_mut() {
            for point in table.iter_mut() {
                point.1 *= factor;
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return bad("coefficient amplitude must be finite and >= 0");
        }
        if !self.gamma.is_finite() {
            return bad("coefficient gamma must be finite");
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad("coefficient lambda must be finite and >= 0");
        }
        if !(self.log_power.is_finite() && self.log_power >= 0.0) {
            return bad("coefficient log_power must be finite and >= 0");
        }
        if self.family == Family::PowerLog && self.log_depth > MAX_LOG_DEPTH {
            return bad("coefficient log_depth must be <= 3");
        }
        if self.family == Family::Tabulated {
            let table = match &self.table {
                Some(t) if !t.is_empty() => t,
                _ => return bad("tabulated coefficient needs a nonempty table"),
            };
            if table.iter().any(|&(t, v)| !t.is_finite() || !v.is_finite() || v < 0.0) {
                return bad("tabulated coefficient values must be finite and >= 0");
            }
            if table.windows(2).any(|w| w[1].0 <= w[0].0) {
                return bad("tabulated coefficient times must be strictly increasing");
            }
        }
        Ok(())
    }

    /// `true` when the function vanishes identically.
    pub fn is_zero(&self) -> bool {
        match self.family {
            Family::Tabulated => self
                .table
                .as_ref()
                .is_none_or(|t| t.iter().all(|p| p.1 == 0.0)),
            _ => self.amplitude == 0.0,
        }
    }

    /// Evaluate at `t ≥ 0`. Parameters are assumed valid.
    pub fn value(&self, t: f64) -> f64 {
        let c0 = self.amplitude;
        match self.family {
            Family::Constant => c0,
            Family::Power => c0 * (1.0 + t).powf(-self.gamma),
            Family::ExpDecay => c0 * (-self.lambda * t).exp(),
            Family::PowerLog => {
                let s = tower(self.log_depth) + t;
                let j = self.log_depth;
                let inner = if j == 0 {
                    s.powf(self.log_power)
                } else {
                    log_product_unchecked(j, s) * iterated_log_unchecked(j, s).powf(self.log_power)
                };
                c0 / (s.powf(self.gamma) * inner)
            }
            Family::Tabulated => interpolate(self.table.as_deref().unwrap_or(&[]), t),
        }
    }

    /// `∫_a^b f`, closed form where the family has one.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b <= a || self.is_zero() {
            return 0.0;
        }
        let c0 = self.amplitude;
        match self.family {
            Family::Constant => c0 * (b - a),
            Family::Power => power_integral(c0, self.gamma, a, b),
            Family::ExpDecay => {
                if self.lambda == 0.0 {
                    c0 * (b - a)
                } else {
                    c0 * ((-self.lambda * a).exp() - (-self.lambda * b).exp()) / self.lambda
                }
            }
            Family::PowerLog => {
                let j = self.log_depth;
                if j == 0 {
                    return power_integral(c0, self.gamma + self.log_power, a, b);
                }
                let tj = tower(j);
                let (sa, sb) = (tj + a, tj + b);
                if self.gamma == 1.0 {
                    let (la, lb) = (iterated_log_unchecked(j, sa), iterated_log_unchecked(j, sb));
                    if self.log_power == 0.0 {
                        c0 * (lb.ln() - la.ln())
                    } else {
                        c0 * (la.powf(-self.log_power) - lb.powf(-self.log_power)) / self.log_power
                    }
                } else {
                    smooth_integral(&|t| self.value(t), a, b)
                }
            }
            Family::Tabulated => tabulated_integral(self.table.as_deref().unwrap_or(&[]), a, b),
        }
    }

    /// Cumulative integral `C(t) = ∫_0^t f`.
    pub fn cumulative(&self, t: f64) -> f64 {
        self.integral(0.0, t)
    }

    /// `true` when `cumulative` has a closed form (no quadrature).
    pub fn has_closed_form_cumulative(&self) -> bool {
        match self.family {
            Family::PowerLog => self.log_depth == 0 || self.gamma == 1.0,
            _ => true,
        }
    }

    /// Leading-order tail profile; `None` for tabulated data, which is
    /// decided numerically.
    pub fn profile(&self) -> Option<Asymptotic> {
        if self.is_zero() {
            return Some(Asymptotic::zero());
        }
        match self.family {
            Family::Constant => Some(Asymptotic::constant()),
            Family::Power => Some(Asymptotic::power(-self.gamma)),
            Family::ExpDecay => Some(Asymptotic::exponential(-self.lambda)),
            Family::PowerLog => {
                let j = self.log_depth as usize;
                if j == 0 {
                    return Some(Asymptotic::power(-self.gamma - self.log_power));
                }
                let mut logs = vec![-1.0; j];
                logs[j - 1] -= self.log_power;
                Some(Asymptotic::power(-self.gamma).with_logs(logs))
            }
            Family::Tabulated => None,
        }
    }

    /// Tail profile of `exp(s·C(t))` for `s ≠ 0`, when it is of the
    /// `t^a e^{μt} Π ln_i^{e_i}` form; `None` for stretched exponentials.
    pub fn exp_cumulative_profile(&self, s: f64) -> Option<Asymptotic> {
        if self.is_zero() {
            return Some(Asymptotic::constant());
        }
        let c0 = self.amplitude;
        match self.family {
            Family::Constant => Some(Asymptotic::exponential(s * c0)),
            Family::Power => growth_profile(c0, self.gamma, s, &[]),
            Family::ExpDecay => {
                if self.lambda > 0.0 {
                    Some(Asymptotic::constant())
                } else {
                    Some(Asymptotic::exponential(s * c0))
                }
            }
            Family::PowerLog => {
                let j = self.log_depth as usize;
                if j == 0 {
                    return growth_profile(c0, self.gamma + self.log_power, s, &[]);
                }
                if self.gamma > 1.0 || (self.gamma == 1.0 && self.log_power > 0.0) {
                    return Some(Asymptotic::constant());
                }
                if self.gamma == 1.0 {
                    // C(t) ~ c0 ln_{j+1} t, so e^{sC} ~ ln_j^{s c0} t
                    let mut logs = vec![0.0; j];
                    logs[j - 1] = s * c0;
                    return Some(Asymptotic::constant().with_logs(logs));
                }
                None
            }
            Family::Tabulated => {
                let last = self.table.as_ref().and_then(|t| t.last()).map_or(0.0, |p| p.1);
                Some(Asymptotic::exponential(s * last))
            }
        }
    }
}

fn growth_profile(c0: f64, gamma: f64, s: f64, _logs: &[f64]) -> Option<Asymptotic> {
    if gamma > 1.0 {
        Some(Asymptotic::constant())
    } else if gamma == 1.0 {
        Some(Asymptotic::power(s * c0))
    } else if gamma == 0.0 {
        Some(Asymptotic::exponential(s * c0))
    } else {
        None
    }
}

fn power_integral(c0: f64, gamma: f64, a: f64, b: f64) -> f64 {
    if gamma == 1.0 {
        c0 * ((1.0 + b) / (1.0 + a)).ln()
    } else {
        c0 * ((1.0 + b).powf(1.0 - gamma) - (1.0 + a).powf(1.0 - gamma)) / (1.0 - gamma)
    }
}

/// Quadrature for smooth integrands on `[a, b] ⊂ [0, ∞)`, with panels
/// geometric in `1 + t`.
fn smooth_integral<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (sa, sb) = (1.0 + a, 1.0 + b);
    let decades = (sb / sa).log10().ceil().max(1.0) as usize;
    let shifted = |s: f64| f(s - 1.0);
    let coarse = quad::gauss8_geometric(&shifted, sa, sb, 4 * decades);
    let fine = quad::gauss8_geometric(&shifted, sa, sb, 8 * decades);
    if (fine - coarse).abs() <= 1e-13 * fine.abs() {
        fine
    } else {
        quad::gauss8_geometric(&shifted, sa, sb, 32 * decades)
    }
}

fn interpolate(table: &[(f64, f64)], t: f64) -> f64 {
    let Some(first) = table.first() else { return 0.0 };
    if t <= first.0 {
        return first.1;
    }
    let last = table[table.len() - 1];
    if t >= last.0 {
        return last.1;
    }
    let i = table.partition_point(|p| p.0 <= t);
    let (t0, v0) = table[i - 1];
    let (t1, v1) = table[i];
    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
}

fn tabulated_integral(table: &[(f64, f64)], a: f64, b: f64) -> f64 {
    let mut knots: Vec<f64> = vec![a];
    knots.extend(table.iter().map(|p| p.0).filter(|&t| t > a && t < b));
    knots.push(b);
    knots
        .windows(2)
        .map(|w| 0.5 * (w[1] - w[0]) * (interpolate(table, w[0]) + interpolate(table, w[1])))
        .sum()
}

/// Tower of exponentials: `T_0 = 1`, `T_{j+1} = e^{T_j}`.
pub fn tower(j: u32) -> f64 {
    (0..j).fold(1.0, |acc, _| f64::exp(acc))
}

fn iterated_log_unchecked(j: u32, t: f64) -> f64 {
    (0..j).fold(t, |acc, _| acc.ln())
}

fn log_product_unchecked(j: u32, t: f64) -> f64 {
    let mut acc = t;
    let mut prod = 1.0;
    for _ in 0..j {
        acc = acc.ln();
        prod *= acc;
    }
    prod
}

fn check_log_domain(j: u32, t: f64) -> Result<()> {
    if j == 0 {
        return Err(Error::Domain("iterated log depth must be >= 1".into()));
    }
    let threshold = tower(j - 1);
    if !(t > threshold) {
        return Err(Error::Domain(format!(
            "ln_{j} requires t > {threshold}, got {t}"
        )));
    }
    Ok(())
}

/// `ln_j t`: `ln_1 t = ln t`, `ln_{j+1} t = ln(ln_j t)`.
pub fn iterated_log(j: u32, t: f64) -> Result<f64> {
    check_log_domain(j, t)?;
    Ok(iterated_log_unchecked(j, t))
}

/// `l_j(t) = Π_{i=1}^{j} ln_i t`.
pub fn log_product(j: u32, t: f64) -> Result<f64> {
    check_log_domain(j, t)?;
    Ok(log_product_unchecked(j, t))
}

/// `l_{j,γ}(t) = l_j(t) · ln_j^γ t`.
pub fn log_product_power(j: u32, gamma: f64, t: f64) -> Result<f64> {
    check_log_domain(j, t)?;
    Ok(log_product_unchecked(j, t) * iterated_log_unchecked(j, t).powf(gamma))
}

/// Checked evaluation of a coefficient.
pub fn eval_coeff(spec: &CoefficientSpec, t: f64) -> Result<f64> {
    spec.validate()?;
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("coefficients are defined for t >= 0, got {t}")));
    }
    Ok(spec.value(t))
}

// ---------------------------------------------------------------------------
// Improper integrals
// ---------------------------------------------------------------------------

/// Polynomial weight multiplying a coefficient under an improper integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    One,
    Linear,
    Power(f64),
}

impl Weight {
    pub fn exponent(self) -> f64 {
        match self {
            Weight::One => 0.0,
            Weight::Linear => 1.0,
            Weight::Power(m) => m,
        }
    }

    pub fn value(self, t: f64) -> f64 {
        match self {
            Weight::One => 1.0,
            Weight::Linear => t,
            Weight::Power(m) => t.powf(m),
        }
    }
}

impl std::fmt::Display for Weight {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Weight::One => write!(f, "1"),
            Weight::Linear => write!(f, "t"),
            Weight::Power(m) => write!(f, "t^{m}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraturePolicy {
    /// Upper end of the numerical exploration.
    pub t_max: f64,
    /// Relative increment per decade below which partial sums count as flat.
    pub eps_flat: f64,
    /// Decade-to-decade increment ratio at or below which the tail is
    /// treated as geometrically convergent.
    pub converge_ratio: f64,
    /// Ratio at or above which the partial sums are treated as unbounded.
    pub diverge_ratio: f64,
    /// Onset of "large t" for sampled eventual-behaviour checks.
    pub t_large: f64,
}

impl Default for QuadraturePolicy {
    fn default() -> Self {
        QuadraturePolicy {
            t_max: 1e9,
            eps_flat: 1e-6,
            converge_ratio: 0.5,
            diverge_ratio: 0.9,
            t_large: 1e3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntegralStatus {
    Converges,
    Diverges,
    Indeterminate,
}

impl std::fmt::Display for IntegralStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            IntegralStatus::Converges => "Converges",
            IntegralStatus::Diverges => "Diverges",
            IntegralStatus::Indeterminate => "Indeterminate",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegralVerdict {
    pub status: IntegralStatus,
    /// Value when convergent; `+∞` when divergent; last partial sum otherwise.
    pub value: f64,
    pub evidence: String,
}

impl IntegralVerdict {
    pub fn converges(&self) -> bool {
        self.status == IntegralStatus::Converges
    }

    pub fn diverges(&self) -> bool {
        self.status == IntegralStatus::Diverges
    }
}

/// Numerical exploration of `∫_{t_lower}^∞ f` over decades up to
/// `policy.t_max`.
pub fn improper_numeric<F: Fn(f64) -> f64>(
    f: &F,
    t_lower: f64,
    policy: &QuadraturePolicy,
) -> IntegralVerdict {
    let a0 = t_lower.max(0.0);
    let mut edges = vec![a0, a0 + 1.0];
    while *edges.last().unwrap() < policy.t_max {
        let next = (edges.last().unwrap() * 10.0).min(policy.t_max);
        edges.push(next);
    }
    let mut total = 0.0;
    let mut increments: Vec<f64> = Vec::new();
    for (i, w) in edges.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let inc = if i == 0 {
            quad::gauss8_doubling(f, a, b, 8, 1e-12, 6)
        } else {
            let coarse = quad::gauss8_geometric(f, a, b, 16);
            let fine = quad::gauss8_geometric(f, a, b, 64);
            if (fine - coarse).abs() > 1e-8 * fine.abs() {
                quad::gauss8_geometric(f, a, b, 256)
            } else {
                fine
            }
        };
        if inc.is_nan() {
            return IntegralVerdict {
                status: IntegralStatus::Indeterminate,
                value: total,
                evidence: format!("numeric: integrand not finite on [{a:e}, {b:e}]"),
            };
        }
        if inc.is_infinite() {
            return IntegralVerdict {
                status: IntegralStatus::Diverges,
                value: f64::INFINITY,
                evidence: format!("numeric: integrand overflows on [{a:e}, {b:e}]"),
            };
        }
        total += inc;
        increments.push(inc);
        let n = increments.len();
        if n >= 3 {
            let prev = increments[n - 2];
            let ratio = if prev > 0.0 { inc / prev } else if inc > 0.0 { f64::INFINITY } else { 0.0 };
            if inc <= policy.eps_flat * total.abs() && ratio < 1.0 {
                let tail = if ratio < 1.0 { inc * ratio / (1.0 - ratio) } else { 0.0 };
                return IntegralVerdict {
                    status: IntegralStatus::Converges,
                    value: total + tail,
                    evidence: format!(
                        "numeric: partial sums flat at t = {b:e} (decade increment {inc:.3e})"
                    ),
                };
            }
        }
    }
    let n = increments.len();
    if n < 4 {
        return IntegralVerdict {
            status: IntegralStatus::Indeterminate,
            value: total,
            evidence: "numeric: too few decades below t_max".into(),
        };
    }
    let ratios: Vec<f64> = (n - 3..n)
        .map(|i| {
            let (prev, cur) = (increments[i - 1], increments[i]);
            if prev > 0.0 {
                cur / prev
            } else if cur > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .collect();
    let last_ratio = ratios[2];
    let last_inc = increments[n - 1];
    if ratios.iter().all(|&r| r <= policy.converge_ratio) {
        let tail = last_inc * last_ratio / (1.0 - last_ratio);
        IntegralVerdict {
            status: IntegralStatus::Converges,
            value: total + tail,
            evidence: format!(
                "numeric: geometric decade decay (ratio {last_ratio:.3}) up to t = {:e}",
                policy.t_max
            ),
        }
    } else if ratios.iter().all(|&r| r >= policy.diverge_ratio)
        && last_inc > policy.eps_flat * total.abs()
    {
        IntegralVerdict {
            status: IntegralStatus::Diverges,
            value: f64::INFINITY,
            evidence: format!(
                "numeric: partial sums keep growing (decade ratio {last_ratio:.3}) up to t = {:e}",
                policy.t_max
            ),
        }
    } else {
        IntegralVerdict {
            status: IntegralStatus::Indeterminate,
            value: total,
            evidence: format!(
                "numeric: undecided decade ratio {last_ratio:.3} at t = {:e}",
                policy.t_max
            ),
        }
    }
}

/// Decides `∫_{t_lower}^∞ f` from a tail profile when one is known, using the
/// numeric exploration only for the value estimate; falls back to the numeric
/// verdict when no profile is available.
pub fn improper_with_profile<F: Fn(f64) -> f64>(
    profile: Option<&Asymptotic>,
    f: &F,
    t_lower: f64,
    policy: &QuadraturePolicy,
) -> IntegralVerdict {
    match profile {
        None => improper_numeric(f, t_lower, policy),
        Some(prof) if prof.zero => IntegralVerdict {
            status: IntegralStatus::Converges,
            value: 0.0,
            evidence: "closed form: integrand vanishes".into(),
        },
        Some(prof) if prof.is_integrable() => {
            let numeric = improper_numeric(f, t_lower, policy);
            IntegralVerdict {
                status: IntegralStatus::Converges,
                value: numeric.value.max(0.0),
                evidence: format!("closed form: integrable tail {}", describe(prof)),
            }
        }
        Some(prof) => IntegralVerdict {
            status: IntegralStatus::Diverges,
            value: f64::INFINITY,
            evidence: format!("closed form: non-integrable tail {}", describe(prof)),
        },
    }
}

pub(crate) fn describe(p: &Asymptotic) -> String {
    if p.zero {
        return "0".into();
    }
    let mut s = format!("t^{}", fmt_num(p.power));
    if p.rate != 0.0 {
        s.push_str(&format!("·e^{{{}t}}", fmt_num(p.rate)));
    }
    for (i, e) in p.logs.iter().enumerate() {
        if *e != 0.0 {
            s.push_str(&format!("·ln_{}^{}", i + 1, fmt_num(*e)));
        }
    }
    s
}

fn fmt_num(x: f64) -> String {
    let r = (x * 1e9).round() / 1e9;
    format!("{r}")
}

/// `∫_{t_lower}^∞ w(t) f(t) dt` for a coefficient family.
pub fn integrate_improper(
    spec: &CoefficientSpec,
    weight: Weight,
    t_lower: f64,
    policy: &QuadraturePolicy,
) -> Result<IntegralVerdict> {
    spec.validate()?;
    if !(t_lower >= 0.0) {
        return Err(Error::Domain(format!("t_lower must be >= 0, got {t_lower}")));
    }
    if spec.is_zero() {
        return Ok(IntegralVerdict {
            status: IntegralStatus::Converges,
            value: 0.0,
            evidence: "closed form: coefficient vanishes".into(),
        });
    }
    let integrand = |t: f64| weight.value(t) * spec.value(t);
    let Some(profile) = spec.profile() else {
        return Ok(improper_numeric(&integrand, t_lower, policy));
    };
    let profile = profile.mul(&Asymptotic::power(weight.exponent()));
    let mut verdict = improper_with_profile(Some(&profile), &integrand, t_lower, policy);
    if verdict.converges() {
        if let Some(exact) = closed_form_tail(spec, weight, t_lower) {
            verdict.value = exact;
        }
    }
    Ok(verdict)
}

/// Forces the numerical route regardless of family.
pub fn integrate_improper_numeric(
    spec: &CoefficientSpec,
    weight: Weight,
    t_lower: f64,
    policy: &QuadraturePolicy,
) -> Result<IntegralVerdict> {
    spec.validate()?;
    let integrand = |t: f64| weight.value(t) * spec.value(t);
    Ok(improper_numeric(&integrand, t_lower, policy))
}

fn closed_form_tail(spec: &CoefficientSpec, weight: Weight, a: f64) -> Option<f64> {
    let c0 = spec.amplitude;
    let power_tail = |g: f64| c0 * (1.0 + a).powf(1.0 - g) / (g - 1.0);
    match (spec.family, weight) {
        (Family::Power, Weight::One) => Some(power_tail(spec.gamma)),
        (Family::Power, Weight::Linear) => {
            let g = spec.gamma;
            Some(c0 * ((1.0 + a).powf(2.0 - g) / (g - 2.0) - (1.0 + a).powf(1.0 - g) / (g - 1.0)))
        }
        (Family::ExpDecay, Weight::One) => Some(c0 * (-spec.lambda * a).exp() / spec.lambda),
        (Family::ExpDecay, Weight::Linear) => {
            let l = spec.lambda;
            Some(c0 * (-l * a).exp() * (a / l + 1.0 / (l * l)))
        }
        (Family::PowerLog, Weight::One) if spec.log_depth == 0 => {
            Some(power_tail(spec.gamma + spec.log_power))
        }
        (Family::PowerLog, Weight::One) if spec.gamma == 1.0 && spec.log_power > 0.0 => {
            let lj = iterated_log_unchecked(spec.log_depth, tower(spec.log_depth) + a);
            Some(c0 * lj.powf(-spec.log_power) / spec.log_power)
        }
        _ => None,
    }
}

/// `∫_t^∞ f`, or `None` when the tail diverges (or cannot be certified).
pub fn tail_integral(spec: &CoefficientSpec, t: f64, policy: &QuadraturePolicy) -> Result<Option<f64>> {
    let v = integrate_improper(spec, Weight::One, t, policy)?;
    Ok(v.converges().then_some(v.value))
}

// ---------------------------------------------------------------------------
// Eventual behaviour ("for large values of t")
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct EventualCheck {
    pub holds: bool,
    pub evidence: String,
}

fn samples(t_large: f64) -> impl Iterator<Item = f64> {
    (0..=240).map(move |i| t_large * 10f64.powf(3.0 * i as f64 / 240.0))
}

/// `f` bounded for large t.
pub fn eventually_bounded<F: Fn(f64) -> f64>(
    profile: Option<&Asymptotic>,
    f: &F,
    t_large: f64,
) -> EventualCheck {
    if let Some(p) = profile {
        return EventualCheck {
            holds: p.is_bounded(),
            evidence: format!("closed form: tail {}", describe(p)),
        };
    }
    let values: Vec<f64> = samples(t_large).map(f).collect();
    let head = values[..160].iter().copied().fold(0.0, f64::max);
    let tail = values[160..].iter().copied().fold(0.0, f64::max);
    let holds = tail.is_finite() && tail <= head * (1.0 + 1e-2);
    EventualCheck {
        holds,
        evidence: format!(
            "sampled on [{t_large:e}, {:e}]: max {head:.3e} then {tail:.3e}",
            t_large * 1e3
        ),
    }
}

/// `f` nonincreasing for large t.
pub fn eventually_nonincreasing<F: Fn(f64) -> f64>(
    profile: Option<&Asymptotic>,
    f: &F,
    t_large: f64,
) -> EventualCheck {
    if let Some(decided) = profile.and_then(|p| p.is_eventually_nonincreasing()) {
        return EventualCheck {
            holds: decided,
            evidence: format!("closed form: tail {}", describe(profile.unwrap())),
        };
    }
    let values: Vec<f64> = samples(t_large).map(f).collect();
    let holds = values
        .windows(2)
        .all(|w| w[1] <= w[0] * (1.0 + 1e-12) + f64::MIN_POSITIVE);
    EventualCheck {
        holds,
        evidence: format!("sampled on [{t_large:e}, {:e}]", t_large * 1e3),
    }
}

// ---------------------------------------------------------------------------
// Sliding-window boundedness of the memory flux
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct WindowCheck {
    /// Supremum of `J(t)` over the probes.
    pub k_sup: f64,
    pub holds: bool,
    pub probes: Vec<(f64, f64)>,
}

/// `J(t) = ∫_{t-t0}^{t} κ(τ)/√(t-τ) dτ = 2∫_0^{√t0} κ(t - s²) ds`.
pub fn window_integral<K: Fn(f64) -> f64>(kappa: &K, t0: f64, t: f64) -> f64 {
    let g = |s: f64| kappa(t - s * s);
    let v = 2.0 * quad::gauss8_doubling(&g, 0.0, t0.sqrt(), 16, 1e-12, 6);
    if v.is_nan() { f64::INFINITY } else { v }
}

/// Probes `J(t)` on a log-spaced set in `[alpha, t_probe]` and reports
/// whether its running maximum has stabilised.
pub fn check_window_bound<K: Fn(f64) -> f64>(
    kappa: &K,
    t0: f64,
    alpha: f64,
    t_probe: f64,
) -> Result<WindowCheck> {
    if !(t0 > 0.0 && alpha > t0 && t_probe > alpha) {
        return Err(Error::Precondition(format!(
            "need t_probe > alpha > t0 > 0 (t0 = {t0}, alpha = {alpha}, t_probe = {t_probe})"
        )));
    }
    let decades = (t_probe / alpha).log10();
    let count = ((8.0 * decades).ceil() as usize + 1).max(16);
    let probes: Vec<(f64, f64)> = (0..count)
        .map(|i| {
            let t = alpha * (t_probe / alpha).powf(i as f64 / (count - 1) as f64);
            (t, window_integral(kappa, t0, t))
        })
        .collect();
    let k_sup = probes.iter().map(|p| p.1).fold(0.0, f64::max);
    // running max one decade (or half the range) before the end
    let cut = if decades > 1.0 { t_probe / 10.0 } else { (alpha * t_probe).sqrt() };
    let earlier = probes.iter().filter(|p| p.0 <= cut).map(|p| p.1).fold(0.0, f64::max);
    let holds = k_sup.is_finite() && (k_sup == 0.0 || (k_sup - earlier) <= 1e-2 * k_sup);
    Ok(WindowCheck { k_sup, holds, probes })
}

/// Window check of the flux `τ k(τ)`.
pub fn check_linear_flux_window(
    k: &CoefficientSpec,
    t0: f64,
    alpha: f64,
    t_probe: f64,
) -> Result<WindowCheck> {
    k.validate()?;
    let kappa = |tau: f64| tau * k.value(tau);
    check_window_bound(&kappa, t0, alpha, t_probe)
}
