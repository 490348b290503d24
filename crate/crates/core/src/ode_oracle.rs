//! Blow-up oracle for `y'' = b(r) y^q` on `[a, ∞)`, `q > 1`.
//!
//! The equality is the extremal member of the inequality class
//! `y'' ≥ b y^q`: a blow-up of the equality bounds the existence interval of
//! every solution of the inequality with the same data, while a global
//! equality run is only evidence.

use crate::asymptotic::Asymptotic;
use crate::coeffs::{
    eventually_bounded, eventually_nonincreasing, integrate_improper, CoefficientSpec, EventualCheck,
    IntegralVerdict, QuadraturePolicy, Weight,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct OdeProblem {
    pub a: f64,
    pub y_a: f64,
    pub yp_a: f64,
    pub q: f64,
    pub b: CoefficientSpec,
}

impl OdeProblem {
    pub fn validate(&self) -> Result<()> {
        if !(self.a >= 0.0 && self.y_a >= 0.0 && self.yp_a >= 0.0 && self.y_a + self.yp_a > 0.0) {
            return Err(Error::Config(
                "ODE data must satisfy a >= 0, y(a) >= 0, y'(a) >= 0, y(a) + y'(a) > 0".into(),
            ));
        }
        if !(self.q > 1.0) {
            return Err(Error::Config(format!("ODE exponent q must be > 1, got {}", self.q)));
        }
        self.b.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeControls {
    pub rtol: f64,
    pub atol: f64,
    /// Step cap `θ / (b y^{q-1})^{1/2}`.
    pub theta: f64,
    pub blowup_threshold: f64,
    pub max_steps: usize,
    /// Record `(r, y, y')` after every accepted step.
    pub record: bool,
}

impl Default for OdeControls {
    fn default() -> Self {
        OdeControls { rtol: 1e-8, atol: 1e-12, theta: 0.1, blowup_threshold: 1e10, max_steps: 2_000_000, record: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OdeStatus {
    /// `y` crossed the blow-up threshold at `r_star`.
    BlowUp { r_star: f64 },
    GlobalUpTo { r_max: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeOutcome {
    pub status: OdeStatus,
    /// `|R*(rtol) - R*(rtol/2)| / R*(rtol/2)` for blow-ups.
    pub refinement_stability: Option<f64>,
    pub steps: usize,
    pub trajectory: Vec<(f64, f64, f64)>,
}

impl OdeOutcome {
    pub fn r_star(&self) -> Option<f64> {
        match self.status {
            OdeStatus::BlowUp { r_star } => Some(r_star),
            OdeStatus::GlobalUpTo { .. } => None,
        }
    }
}

// Dormand-Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

type Vec2 = [f64; 2];

fn axpy(y: Vec2, terms: &[(f64, Vec2)], h: f64) -> Vec2 {
    let mut out = y;
    for (c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

struct System<'a> {
    b: &'a CoefficientSpec,
    q: f64,
    a: f64,
}

impl System<'_> {
    fn rhs(&self, r: f64, y: Vec2) -> Vec2 {
        [y[1], self.b.value(r - self.a) * y[0].max(0.0).powf(self.q)]
    }
}

/// One attempt; returns the 5th-order solution, the error estimate and the
/// final stage derivative (first-same-as-last).
fn dopri_step(sys: &System, r: f64, y: Vec2, k1: Vec2, h: f64) -> (Vec2, Vec2, Vec2) {
    let k2 = sys.rhs(r + C2 * h, axpy(y, &[(A21, k1)], h));
    let k3 = sys.rhs(r + C3 * h, axpy(y, &[(A31, k1), (A32, k2)], h));
    let k4 = sys.rhs(r + C4 * h, axpy(y, &[(A41, k1), (A42, k2), (A43, k3)], h));
    let k5 = sys.rhs(r + C5 * h, axpy(y, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)], h));
    let k6 = sys.rhs(r + h, axpy(y, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)], h));
    let y5 = axpy(y, &[(B1, k1), (B3, k3), (B4, k4), (B5, k5), (B6, k6)], h);
    let k7 = sys.rhs(r + h, y5);
    let err = axpy([0.0, 0.0], &[(E1, k1), (E3, k3), (E4, k4), (E5, k5), (E6, k6), (E7, k7)], h);
    (y5, err, k7)
}

fn integrate_once(prob: &OdeProblem, r_max: f64, ctl: &OdeControls) -> Result<(OdeStatus, usize, Vec<(f64, f64, f64)>)> {
    // the coefficient is evaluated at r - a so that families start at their origin
    let sys = System { b: &prob.b, q: prob.q, a: prob.a };
    let mut r = prob.a;
    let mut y = [prob.y_a, prob.yp_a];
    let mut k1 = sys.rhs(r, y);
    let mut h = 1e-3 * (1.0 + r);
    let mut steps = 0;
    let mut trajectory = Vec::new();
    if ctl.record {
        trajectory.push((r, y[0], y[1]));
    }
    let blow = ctl.blowup_threshold;
    let s_exp = 0.5 * (prob.q - 1.0);
    while r < r_max {
        if steps >= ctl.max_steps {
            return Err(Error::Unstable(format!("ODE step budget exhausted at r = {r}")));
        }
        let bv = prob.b.value(r - prob.a);
        if bv > 0.0 && y[0] > 0.0 {
            h = h.min(ctl.theta / (bv * y[0].powf(prob.q - 1.0)).sqrt());
        }
        h = h.min(r_max - r).max(1e-14 * (1.0 + r.abs()));
        let (y_new, err, k7) = dopri_step(&sys, r, y, k1, h);
        let scale0 = ctl.atol + ctl.rtol * y[0].abs().max(y_new[0].abs());
        let scale1 = ctl.atol + ctl.rtol * y[1].abs().max(y_new[1].abs());
        let e = ((err[0] / scale0).powi(2) + (err[1] / scale1).powi(2)).sqrt() / std::f64::consts::SQRT_2;
        if !e.is_finite() {
            h *= 0.2;
            continue;
        }
        if e <= 1.0 {
            if y_new[0] < 0.0 {
                return Err(Error::Unstable(format!("negative solution {} at r = {}", y_new[0], r + h)));
            }
            let r_new = r + h;
            steps += 1;
            if ctl.record {
                trajectory.push((r_new, y_new[0], y_new[1]));
            }
            if y_new[0] >= blow {
                // near blow-up y^{-(q-1)/2} is close to linear in r
                let s0 = y[0].powf(-s_exp);
                let s1 = y_new[0].powf(-s_exp);
                let st = blow.powf(-s_exp);
                let r_star = if s0 > s1 { r + h * (s0 - st) / (s0 - s1) } else { r_new };
                return Ok((OdeStatus::BlowUp { r_star }, steps, trajectory));
            }
            r = r_new;
            y = y_new;
            k1 = k7;
            h *= (0.9 * e.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
        } else {
            h *= (0.9 * e.powf(-0.2)).clamp(0.2, 1.0);
        }
    }
    Ok((OdeStatus::GlobalUpTo { r_max }, steps, trajectory))
}

/// Integrates the equality case to the blow-up threshold or `r_max`; a
/// blow-up run is repeated with halved tolerances to report the stability
/// of `R*`.
pub fn integrate_ode(prob: &OdeProblem, r_max: f64, controls: &OdeControls) -> Result<OdeOutcome> {
    prob.validate()?;
    let (status, steps, trajectory) = integrate_once(prob, r_max, controls)?;
    let refinement_stability = match status {
        OdeStatus::BlowUp { r_star } => {
            let fine = OdeControls {
                rtol: controls.rtol / 2.0,
                atol: controls.atol / 2.0,
                theta: controls.theta / 2.0,
                record: false,
                ..controls.clone()
            };
            match integrate_once(prob, r_max, &fine)?.0 {
                OdeStatus::BlowUp { r_star: fine_r } => Some((r_star - fine_r).abs() / fine_r),
                OdeStatus::GlobalUpTo { .. } => Some(f64::INFINITY),
            }
        }
        OdeStatus::GlobalUpTo { .. } => None,
    };
    Ok(OdeOutcome { status, refinement_stability, steps, trajectory })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlowupCriterion {
    /// `∫_a^∞ r^q b(r) dr`.
    pub divergence: IntegralVerdict,
    /// `r^{q+1} b(r)` bounded for large `r`.
    pub alt_bounded: EventualCheck,
    /// `b` nonincreasing for large `r`.
    pub alt_monotone: EventualCheck,
    pub applies: bool,
}

/// Divergence of `∫ r^q b` together with either tail alternative forces
/// every nontrivial solution of `y'' ≥ b y^q` to blow up.
pub fn check_blowup_criterion(b: &CoefficientSpec, q: f64, a: f64, t_large: f64) -> Result<BlowupCriterion> {
    if !(q > 1.0) {
        return Err(Error::NotApplicable(format!("needs q > 1, got {q}")));
    }
    b.validate()?;
    let policy = QuadraturePolicy { t_large, ..QuadraturePolicy::default() };
    let divergence = integrate_improper(b, Weight::Power(q), a, &policy)?;
    let profile = b.profile();
    let weighted = profile.as_ref().map(|p| p.mul(&Asymptotic::power(q + 1.0)));
    let weighted_fn = |r: f64| r.powf(q + 1.0) * b.value(r);
    let alt_bounded = eventually_bounded(weighted.as_ref(), &weighted_fn, t_large);
    let b_fn = |r: f64| b.value(r);
    let alt_monotone = eventually_nonincreasing(profile.as_ref(), &b_fn, t_large);
    let applies = divergence.diverges() && (alt_bounded.holds || alt_monotone.holds);
    Ok(BlowupCriterion { divergence, alt_bounded, alt_monotone, applies })
}
