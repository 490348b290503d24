//! Explicit supersolutions and their discrete verification.
//!
//! Three constructions are provided:
//!
//! * [`Supersolution::Eigenfunction`]: `d e^{bt} (2 - φ(x))` with `φ` the first
//!   Dirichlet eigenfunction, for `max(p, q) ≤ 1`;
//! * [`Supersolution::ReactionScaled`]: `α z(t) y(x, t)` with `y` solving the
//!   heat equation with boundary flux `t k(t)` and `z` the scalar reaction
//!   profile, for `min(p, q) > 1`;
//! * [`Supersolution::ExpWeighted`]: `α e^{C(t)} h(x, t)` with `h` solving the
//!   heat equation with the weighted flux `k e^{-C} ∫_0^t e^{qC}`, for `p = 1`.
//!
//! Bounds `Y`, `H` of the auxiliary fields are observed suprema of long
//! auxiliary runs.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::coeffs::{integrate_improper, tail_integral, CoefficientSpec, QuadraturePolicy, Weight};
use crate::error::{Error, Result};
use crate::pde::{BoundaryLaw, Problem, Scenario, SimulationOutcome, SolverControls, State};
use crate::weights::EffectiveFlux;

/// Auxiliary runs extend at least this far so that their suprema settle.
pub const AUX_HORIZON: f64 = 1e5;

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    pub lambda1: f64,
    pub phi: Vec<f64>,
    pub length: f64,
}

impl Eigenpair {
    pub fn grid_spacing(&self) -> f64 {
        self.length / (self.phi.len() - 1) as f64
    }

    /// Inward slope `-∂φ/∂ν` at either endpoint.
    pub fn inward_slope(&self) -> f64 {
        PI / self.length
    }

    /// `max |Δ_h φ + λ₁ φ|` over interior nodes with the 3-point Laplacian.
    pub fn discrete_residual(&self) -> f64 {
        let h = self.grid_spacing();
        self.phi
            .windows(3)
            .map(|w| ((w[0] - 2.0 * w[1] + w[2]) / (h * h) + self.lambda1 * w[1]).abs())
            .fold(0.0, f64::max)
    }
}

/// First Dirichlet eigenpair of `-d²/dx²` on `(0, L)`: `λ₁ = (π/L)²`,
/// `φ = sin(πx/L)` sampled on `nodes` points.
pub fn dirichlet_eigenpair(length: f64, nodes: usize) -> Result<Eigenpair> {
    if nodes < 3 || !(length > 0.0) {
        return Err(Error::Precondition("eigenpair needs L > 0 and at least 3 nodes".into()));
    }
    let h = length / (nodes - 1) as f64;
    let mut phi: Vec<f64> = (0..nodes).map(|i| (PI * i as f64 * h / length).sin()).collect();
    phi[0] = 0.0;
    phi[nodes - 1] = 0.0;
    Ok(Eigenpair { lambda1: (PI / length).powi(2), phi, length })
}

/// Maximum of `max(c, k)` over `[0, t_end]` from 10⁴ + 1 uniform samples.
pub fn coefficient_max(c: &CoefficientSpec, k: &CoefficientSpec, t_end: f64) -> f64 {
    let n = 10_000;
    (0..=n)
        .map(|i| {
            let t = t_end * i as f64 / n as f64;
            c.value(t).max(k.value(t))
        })
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Auxiliary linear problems
// ---------------------------------------------------------------------------

pub type FluxFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Trajectory of the heat equation with a prescribed Neumann flux and
/// initial value 1.
#[derive(Debug, Clone)]
pub struct AuxiliaryRun {
    pub times: Vec<f64>,
    pub length: f64,
    /// `values[j][i]` at time `times[j]`, node `i`.
    pub values: Vec<Vec<f64>>,
    /// Running supremum over the whole run.
    pub bound: f64,
    /// The running supremum changed by less than 10⁻⁴ (relative) over the
    /// final half of the run.
    pub stabilized: bool,
}

impl AuxiliaryRun {
    pub fn nodes(&self) -> usize {
        self.values[0].len()
    }

    /// Linear interpolation in time at node `i`.
    pub fn at(&self, i: usize, t: f64) -> f64 {
        let j = self.times.partition_point(|&s| s <= t);
        if j == 0 {
            return self.values[0][i];
        }
        if j >= self.times.len() {
            return self.values[self.times.len() - 1][i];
        }
        let (t0, t1) = (self.times[j - 1], self.times[j]);
        let w = (t - t0) / (t1 - t0);
        self.values[j - 1][i] * (1.0 - w) + self.values[j][i] * w
    }
}

/// Integrates `y_t = y_xx` on `(0, L)`, `∂y/∂ν = flux(t)` at both ends,
/// `y(x, 0) = 1`, by backward Euler with step `dt · max(1, t)`.
pub fn solve_auxiliary_linear(flux: FluxFn, length: f64, nodes: usize, dt: f64, t_max: f64) -> Result<AuxiliaryRun> {
    if nodes < 3 || !(length > 0.0) || !(dt > 0.0) || !(t_max > 0.0) {
        return Err(Error::Precondition("auxiliary run needs L, dt, t_max > 0 and 3+ nodes".into()));
    }
    let problem = Problem {
        length,
        p: 1.0,
        q: 1.0,
        c: CoefficientSpec::zero(),
        k: CoefficientSpec::zero(),
        reaction: false,
        law: BoundaryLaw::Prescribed(flux.clone()),
        controls: SolverControls { nodes, t_max, ..SolverControls::default() },
    };
    let mut state = State::new(vec![1.0; nodes]);
    let mut times = vec![0.0];
    let mut values = vec![state.u.clone()];
    let mut sups = vec![1.0f64];
    while state.t < t_max * (1.0 - 1e-14) {
        if flux(state.t) < 0.0 {
            return Err(Error::Precondition(format!("negative auxiliary flux at t = {}", state.t)));
        }
        let step = (dt * state.t.max(1.0)).min(t_max - state.t);
        state = problem.step(&state, step)?;
        let sup = state.sup_norm();
        if !sup.is_finite() {
            return Err(Error::Unstable("auxiliary run produced a non-finite value".into()));
        }
        times.push(state.t);
        sups.push(sups.last().copied().unwrap_or(1.0).max(sup));
        values.push(state.u.clone());
    }
    let bound = *sups.last().unwrap();
    let half = times.partition_point(|&s| s < 0.5 * t_max);
    let stabilized = (bound - sups[half]) <= 1e-4 * bound;
    Ok(AuxiliaryRun { times, length, values, bound, stabilized })
}

// ---------------------------------------------------------------------------
// Reaction profile
// ---------------------------------------------------------------------------

/// `z(t) = (1 + (p-1)(αY)^{p-1} ∫_t^∞ c)^{-1/(p-1)}`, the solution of
/// `z' = (αY)^{p-1} c z^p` with `z(∞) = 1`.
pub fn z_profile(p: f64, alpha: f64, y_bound: f64, c: &CoefficientSpec, t: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::Precondition(format!("reaction profile needs p > 1, got {p}")));
    }
    let tail = tail_integral(c, t, &QuadraturePolicy::default())?
        .ok_or_else(|| Error::NotApplicable("∫_t^∞ c diverges".into()))?;
    Ok((1.0 + (p - 1.0) * (alpha * y_bound).powf(p - 1.0) * tail).powf(-1.0 / (p - 1.0)))
}

/// `|z'(t) - (αY)^{p-1} c(t) z(t)^p|` with `z'` from a 5-point difference.
pub fn z_residual(p: f64, alpha: f64, y_bound: f64, c: &CoefficientSpec, t: f64) -> Result<f64> {
    let e = 1e-3 * (1.0 + t);
    let z = |s: f64| z_profile(p, alpha, y_bound, c, s);
    let derivative = if t >= 2.0 * e {
        (z(t - 2.0 * e)? - 8.0 * z(t - e)? + 8.0 * z(t + e)? - z(t + 2.0 * e)?) / (12.0 * e)
    } else {
        (-25.0 * z(t)? + 48.0 * z(t + e)? - 36.0 * z(t + 2.0 * e)? + 16.0 * z(t + 3.0 * e)?
            - 3.0 * z(t + 4.0 * e)?)
            / (12.0 * e)
    };
    let rhs = (alpha * y_bound).powf(p - 1.0) * c.value(t) * z(t)?.powf(p);
    Ok((derivative - rhs).abs())
}

/// Largest constant initial level covered by the reaction-scaled
/// supersolution: `α z(0)`.
pub fn small_data_threshold(p: f64, alpha: f64, y_bound: f64, c: &CoefficientSpec) -> Result<f64> {
    Ok(alpha * z_profile(p, alpha, y_bound, c, 0.0)?)
}

// ---------------------------------------------------------------------------
// Supersolutions
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub enum Supersolution {
    /// `d e^{bt} (2 - sin(πx/L))`.
    Eigenfunction { d: f64, b: f64, lambda1: f64, length: f64, coefficient_max: f64 },
    /// `α z(t) y(x, t)`; `z ≡ 1` when `c ≡ 0`.
    ReactionScaled { alpha: f64, y_bound: f64, p: f64, c: CoefficientSpec, aux: AuxiliaryRun },
    /// `α e^{C(t)} h(x, t)`; `bounded` when `∫_0^∞ c < ∞`.
    ExpWeighted { alpha: f64, h_bound: f64, c: CoefficientSpec, aux: AuxiliaryRun, bounded: bool },
}

impl Supersolution {
    pub fn kind(&self) -> &'static str {
        match self {
            Supersolution::Eigenfunction { .. } => "eigenfunction",
            Supersolution::ReactionScaled { .. } => "reaction-scaled",
            Supersolution::ExpWeighted { .. } => "exp-weighted",
        }
    }

    /// Values at time `t` on the uniform grid of `nodes` points.
    pub fn sample(&self, t: f64, nodes: usize) -> Result<Vec<f64>> {
        match self {
            Supersolution::Eigenfunction { d, b, length, .. } => {
                let h = length / (nodes - 1) as f64;
                let scale = d * (b * t).exp();
                Ok((0..nodes)
                    .map(|i| {
                        let phi = if i == 0 || i == nodes - 1 { 0.0 } else { (PI * i as f64 * h / length).sin() };
                        scale * (2.0 - phi)
                    })
                    .collect())
            }
            Supersolution::ReactionScaled { alpha, y_bound, p, c, aux } => {
                let z = if c.is_zero() { 1.0 } else { z_profile(*p, *alpha, *y_bound, c, t)? };
                Ok(aux_on_grid(aux, t, nodes).into_iter().map(|y| alpha * z * y).collect())
            }
            Supersolution::ExpWeighted { alpha, c, aux, .. } => {
                let scale = alpha * c.cumulative(t).exp();
                Ok(aux_on_grid(aux, t, nodes).into_iter().map(|h| scale * h).collect())
            }
        }
    }

    fn auxiliary(&self) -> Option<&AuxiliaryRun> {
        match self {
            Supersolution::Eigenfunction { .. } => None,
            Supersolution::ReactionScaled { aux, .. } | Supersolution::ExpWeighted { aux, .. } => Some(aux),
        }
    }
}

fn aux_on_grid(aux: &AuxiliaryRun, t: f64, nodes: usize) -> Vec<f64> {
    let m = aux.nodes();
    if m == nodes {
        return (0..m).map(|i| aux.at(i, t)).collect();
    }
    (0..nodes)
        .map(|i| {
            let s = i as f64 / (nodes - 1) as f64 * (m - 1) as f64;
            let j = (s.floor() as usize).min(m - 2);
            let w = s - j as f64;
            aux.at(j, t) * (1.0 - w) + aux.at(j + 1, t) * w
        })
        .collect()
}

/// `d e^{bt}(2 - φ)` with `d = max(sup u₀, 1)`,
/// `b = max(λ₁ + 2M, 2M / (q · π/L))`, `M = max_{[0,T]} max(c, k)`.
pub fn build_eigenfunction_supersolution(scenario: &Scenario, t_end: f64) -> Result<Supersolution> {
    let (p, q) = (scenario.p, scenario.q);
    if p.max(q) > 1.0 {
        return Err(Error::NotApplicable(format!("needs max(p, q) <= 1, got p = {p}, q = {q}")));
    }
    let eig = dirichlet_eigenpair(scenario.length, scenario.controls.nodes)?;
    let m = coefficient_max(&scenario.c, &scenario.k, t_end);
    let b = (eig.lambda1 + 2.0 * m).max(2.0 * m / (q * eig.inward_slope()));
    let d = scenario.initial.sup().max(1.0);
    Ok(Supersolution::Eigenfunction { d, b, lambda1: eig.lambda1, length: scenario.length, coefficient_max: m })
}

/// Window-check parameters shared by the small-data constructions.
const WINDOW: (f64, f64, f64) = (1.0, 2.0, 1e6);

fn aux_horizon(t_end: f64) -> f64 {
    t_end.max(AUX_HORIZON)
}

/// `α z(t) y(x, t)` where `y` solves the heat equation with flux `t k(t)` and
/// `α = min(alpha, Y^{-q/(q-1)})` (all of `Y^{-q/(q-1)}` when `alpha` is unset).
pub fn build_reaction_scaled_supersolution(
    scenario: &Scenario,
    t_end: f64,
    alpha: Option<f64>,
) -> Result<Supersolution> {
    let (p, q) = (scenario.p, scenario.q);
    if p.min(q) <= 1.0 {
        return Err(Error::NotApplicable(format!("needs min(p, q) > 1, got p = {p}, q = {q}")));
    }
    let policy = QuadraturePolicy::default();
    let int_c = integrate_improper(&scenario.c, Weight::One, 0.0, &policy)?;
    let int_tk = integrate_improper(&scenario.k, Weight::Linear, 0.0, &policy)?;
    let window = crate::coeffs::check_linear_flux_window(&scenario.k, WINDOW.0, WINDOW.1, WINDOW.2)?;
    if !(int_c.converges() && int_tk.converges() && window.holds) {
        return Err(Error::NotApplicable(
            "needs ∫c < ∞, ∫t k < ∞ and a bounded flux window".into(),
        ));
    }
    let k = scenario.k.clone();
    let flux: FluxFn = Arc::new(move |t: f64| t * k.value(t));
    let ctl = &scenario.controls;
    let aux = solve_auxiliary_linear(flux, scenario.length, ctl.nodes, ctl.dt_max, aux_horizon(t_end))?;
    if !aux.stabilized {
        return Err(Error::Unstable(format!("auxiliary supremum did not settle (Y >= {})", aux.bound)));
    }
    let y_bound = aux.bound;
    let admissible = y_bound.powf(-q / (q - 1.0));
    let alpha = alpha.map_or(admissible, |a| a.min(admissible));
    Ok(Supersolution::ReactionScaled { alpha, y_bound, p, c: scenario.c.clone(), aux })
}

/// `α e^{C(t)} h(x, t)` for `p = 1 < q`, with `h` driven by the flux
/// `k e^{-C} ∫_0^t e^{qC}` and `α = min(alpha, H^{-q/(q-1)})`.
pub fn build_exp_weighted_supersolution(
    scenario: &Scenario,
    t_end: f64,
    alpha: Option<f64>,
) -> Result<Supersolution> {
    let (p, q) = (scenario.p, scenario.q);
    if p != 1.0 || q <= 1.0 {
        return Err(Error::NotApplicable(format!("needs p = 1 < q, got p = {p}, q = {q}")));
    }
    let policy = QuadraturePolicy::default();
    let conds = crate::criteria::check_weighted_small_data_conditions(
        q, &scenario.c, &scenario.k, WINDOW.0, WINDOW.1, WINDOW.2, &policy,
    )?;
    if !(conds.flux_integral.converges() && conds.flux_window.holds) {
        return Err(Error::NotApplicable(
            "needs a convergent weighted flux integral and a bounded flux window".into(),
        ));
    }
    let horizon = aux_horizon(t_end);
    let effective = EffectiveFlux::new(q, &scenario.c, &scenario.k, horizon);
    let flux: FluxFn = Arc::new(move |t: f64| effective.value(t));
    let ctl = &scenario.controls;
    let aux = solve_auxiliary_linear(flux, scenario.length, ctl.nodes, ctl.dt_max, horizon)?;
    if !aux.stabilized {
        return Err(Error::Unstable(format!("auxiliary supremum did not settle (H >= {})", aux.bound)));
    }
    let h_bound = aux.bound;
    let admissible = h_bound.powf(-q / (q - 1.0));
    let alpha = alpha.map_or(admissible, |a| a.min(admissible));
    Ok(Supersolution::ExpWeighted {
        alpha,
        h_bound,
        c: scenario.c.clone(),
        aux,
        bounded: conds.c_integral.converges(),
    })
}

/// Builds the small-data supersolution matching the exponents
/// (`min(p, q) > 1` or `p = 1 < q`).
pub fn build_small_data_supersolution(scenario: &Scenario, t_end: f64) -> Result<Supersolution> {
    if scenario.p == 1.0 {
        build_exp_weighted_supersolution(scenario, t_end, None)
    } else {
        build_reaction_scaled_supersolution(scenario, t_end, None)
    }
}

/// Largest constant initial level lying below the supersolution at `t = 0`.
pub fn small_data_bound(sup: &Supersolution) -> Result<f64> {
    match sup {
        Supersolution::ReactionScaled { alpha, y_bound, p, c, .. } => {
            if c.is_zero() {
                Ok(*alpha)
            } else {
                small_data_threshold(*p, *alpha, *y_bound, c)
            }
        }
        Supersolution::ExpWeighted { alpha, .. } => Ok(*alpha),
        Supersolution::Eigenfunction { d, .. } => Ok(*d),
    }
}

impl Supersolution {
    /// The same construction on the grid refined once (`N → 2N - 1`, `dt/2`),
    /// keeping `α`, `d` and `b`.
    fn refined(&self, scenario: &Scenario, t_end: f64) -> Result<Supersolution> {
        let fine = scenario.refined(1);
        match self {
            Supersolution::Eigenfunction { .. } => Ok(self.clone()),
            Supersolution::ReactionScaled { alpha, .. } => {
                build_reaction_scaled_supersolution(&fine, t_end, Some(*alpha))
            }
            Supersolution::ExpWeighted { alpha, .. } => build_exp_weighted_supersolution(&fine, t_end, Some(*alpha)),
        }
    }
}

/// Minimum of one residual family and where it occurs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualMin {
    pub value: f64,
    pub x: f64,
    pub t: f64,
}

impl ResidualMin {
    fn new() -> Self {
        ResidualMin { value: f64::INFINITY, x: f64::NAN, t: f64::NAN }
    }

    fn update(&mut self, value: f64, x: f64, t: f64) {
        if value < self.value || value.is_nan() {
            *self = ResidualMin { value, x, t };
        }
    }
}

/// Relative residuals of the three supersolution inequalities:
/// `ū_t - ū_xx - c ū^p ≥ 0` inside, `∂ū/∂ν - k ∫_0^t ū^q ≥ 0` on the
/// boundary and `ū(·, 0) - u₀ ≥ 0`. Each is divided by `1 + Σ|terms|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualReport {
    pub interior: ResidualMin,
    pub boundary: ResidualMin,
    pub initial: ResidualMin,
    /// `1e-6 + C_disc (h² + dt)`.
    pub tolerance: f64,
    pub c_disc: f64,
    pub pass: bool,
}

struct Mins([ResidualMin; 3]);

fn time_grid(spec: &Supersolution, scenario: &Scenario, t_end: f64) -> Vec<f64> {
    match spec.auxiliary() {
        Some(aux) => {
            let mut times: Vec<f64> = aux.times.iter().copied().filter(|&t| t <= t_end).collect();
            if times.len() < 3 {
                times = aux.times.iter().copied().take(3).collect();
            }
            times
        }
        None => {
            let n = (t_end / scenario.controls.dt_max).ceil().max(2.0) as usize;
            (0..=n).map(|j| t_end * j as f64 / n as f64).collect()
        }
    }
}

fn residual_mins(spec: &Supersolution, scenario: &Scenario, t_end: f64) -> Result<Mins> {
    let nodes = scenario.controls.nodes;
    let h = scenario.grid_spacing();
    let (p, q) = (scenario.p, scenario.q);
    let times = time_grid(spec, scenario, t_end);
    let fields = times.iter().map(|&t| spec.sample(t, nodes)).collect::<Result<Vec<_>>>()?;
    let mut interior = ResidualMin::new();
    let mut boundary = ResidualMin::new();
    let mut initial = ResidualMin::new();

    let u0 = scenario.initial.sample(scenario.length, nodes);
    for (i, (ub, u)) in fields[0].iter().zip(&u0).enumerate() {
        initial.update((ub - u) / (1.0 + u.abs()), i as f64 * h, 0.0);
    }

    let nt = times.len();
    let mut mem = [0.0f64; 2];
    for j in 0..nt {
        let t = times[j];
        let u = &fields[j];
        let u_t = |i: usize| -> f64 {
            if j == 0 {
                (fields[1][i] - u[i]) / (times[1] - t)
            } else if j == nt - 1 {
                (u[i] - fields[j - 1][i]) / (t - times[j - 1])
            } else {
                let (h1, h2) = (t - times[j - 1], times[j + 1] - t);
                -h2 / (h1 * (h1 + h2)) * fields[j - 1][i]
                    + (h2 - h1) / (h1 * h2) * u[i]
                    + h1 / (h2 * (h1 + h2)) * fields[j + 1][i]
            }
        };
        let c = scenario.c.value(t);
        for i in 1..nodes - 1 {
            let ut = u_t(i);
            let uxx = (u[i - 1] - 2.0 * u[i] + u[i + 1]) / (h * h);
            let react = c * u[i].powf(p);
            let r = (ut - uxx - react) / (1.0 + ut.abs() + uxx.abs() + react.abs());
            interior.update(r, i as f64 * h, t);
        }
        if j > 0 {
            let dt = t - times[j - 1];
            let prev = &fields[j - 1];
            mem[0] += 0.5 * dt * (prev[0].powf(q) + u[0].powf(q));
            mem[1] += 0.5 * dt * (prev[nodes - 1].powf(q) + u[nodes - 1].powf(q));
        }
        let k = scenario.k.value(t);
        let n = nodes - 1;
        let normal = [
            (3.0 * u[0] - 4.0 * u[1] + u[2]) / (2.0 * h),
            (3.0 * u[n] - 4.0 * u[n - 1] + u[n - 2]) / (2.0 * h),
        ];
        for side in 0..2 {
            let memory = k * mem[side];
            let r = (normal[side] - memory) / (1.0 + normal[side].abs() + memory.abs());
            boundary.update(r, if side == 0 { 0.0 } else { scenario.length }, t);
        }
    }
    Ok(Mins([interior, boundary, initial]))
}

/// Checks the three supersolution inequalities on the space-time grid up to
/// `t_end`. The tolerance is calibrated by repeating the check once on the
/// refined grid: `C_disc = 2 max|Δ min| / ((h² + dt) - (h²/4 + dt/2))`.
pub fn verify_supersolution(spec: &Supersolution, scenario: &Scenario, t_end: f64) -> Result<ResidualReport> {
    let base = residual_mins(spec, scenario, t_end)?;
    let fine_spec = spec.refined(scenario, t_end)?;
    let fine = residual_mins(&fine_spec, &scenario.refined(1), t_end)?;
    let h = scenario.grid_spacing();
    let dt = scenario.controls.dt_max;
    let e_base = h * h + dt;
    let e_fine = h * h / 4.0 + dt / 2.0;
    let spread = base
        .0
        .iter()
        .zip(&fine.0)
        .map(|(a, b)| if a.value.is_finite() && b.value.is_finite() { (a.value - b.value).abs() } else { 0.0 })
        .fold(0.0, f64::max);
    let c_disc = 2.0 * spread / (e_base - e_fine);
    let tolerance = 1e-6 + c_disc * e_base;
    let [interior, boundary, initial] = base.0;
    let pass = [interior, boundary, initial].iter().all(|m| m.value >= -tolerance);
    Ok(ResidualReport { interior, boundary, initial, tolerance, c_disc, pass })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DominationReport {
    pub holds: bool,
    /// Largest `u - ū` over the checked fields.
    pub max_excess: f64,
    pub worst_t: f64,
    pub checked: usize,
}

/// `u ≤ ū + 1e-8 (1 + ‖ū‖_∞)` at every snapshot of a run and at its final
/// state.
pub fn check_domination(spec: &Supersolution, outcome: &SimulationOutcome) -> Result<DominationReport> {
    let mut fields: Vec<(f64, &[f64])> = outcome.snapshots.iter().map(|s| (s.t, s.u.as_slice())).collect();
    fields.push((outcome.final_state.t, outcome.final_state.u.as_slice()));
    let mut report = DominationReport { holds: true, max_excess: f64::NEG_INFINITY, worst_t: 0.0, checked: 0 };
    for (t, u) in fields {
        let bar = spec.sample(t, u.len())?;
        let sup = bar.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = 1e-8 * (1.0 + sup);
        for (a, b) in u.iter().zip(&bar) {
            let excess = a - b;
            if excess > report.max_excess {
                report.max_excess = excess;
                report.worst_t = t;
            }
            if !(excess <= tol) {
                report.holds = false;
            }
        }
        report.checked += 1;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::InitialSpec;

    fn flux(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> FluxFn {
        Arc::new(f)
    }

    #[test]
    fn eigenpair_values() {
        let e = dirichlet_eigenpair(PI, 101).unwrap();
        assert!((e.lambda1 - 1.0).abs() < 1e-15);
        let e = dirichlet_eigenpair(1.0, 201).unwrap();
        assert!((e.lambda1 - PI * PI).abs() < 1e-12);
        assert!((e.phi[100] - 1.0).abs() < 1e-15);
        assert_eq!(e.phi[0], 0.0);
        assert!(e.phi[1..200].iter().all(|&v| v > 0.0));
        assert!((e.inward_slope() - PI).abs() < 1e-15);
        assert!(dirichlet_eigenpair(1.0, 2).is_err());
    }

    #[test]
    fn eigenpair_discrete_residual_is_second_order() {
        let r1 = dirichlet_eigenpair(1.0, 51).unwrap().discrete_residual();
        let r2 = dirichlet_eigenpair(1.0, 101).unwrap().discrete_residual();
        let order = (r1 / r2).log2();
        assert!((order - 2.0).abs() < 0.2, "order {order}");
    }

    #[test]
    fn eigenfunction_parameters() {
        let s = Scenario::new(0.5, 0.5, CoefficientSpec::constant(1.0), CoefficientSpec::constant(1.0), InitialSpec::constant(0.3));
        let Supersolution::Eigenfunction { d, b, .. } = build_eigenfunction_supersolution(&s, 10.0).unwrap() else {
            panic!()
        };
        assert_eq!(d, 1.0);
        let expected = (PI * PI + 2.0).max(2.0 / (0.5 * PI));
        assert!((b - expected).abs() < 1e-12);

        let s = Scenario::new(1.0, 1.0, CoefficientSpec::zero(), CoefficientSpec::zero(), InitialSpec::constant(2.0));
        let Supersolution::Eigenfunction { d, b, lambda1, .. } = build_eigenfunction_supersolution(&s, 1.0).unwrap() else {
            panic!()
        };
        assert_eq!(b, lambda1);
        assert_eq!(d, 2.0);

        let s = Scenario::new(2.0, 1.0, CoefficientSpec::zero(), CoefficientSpec::zero(), InitialSpec::constant(1.0));
        assert!(matches!(build_eigenfunction_supersolution(&s, 1.0), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn eigenfunction_residuals() {
        let mut s = Scenario::new(1.0, 1.0, CoefficientSpec::zero(), CoefficientSpec::zero(), InitialSpec::constant(1.0));
        s.controls.nodes = 51;
        let sup = build_eigenfunction_supersolution(&s, 1.0).unwrap();
        assert!(verify_supersolution(&sup, &s, 1.0).unwrap().pass);

        // zero function fails the initial inequality
        let zero = Supersolution::Eigenfunction { d: 0.0, b: 1.0, lambda1: PI * PI, length: 1.0, coefficient_max: 0.0 };
        let r = verify_supersolution(&zero, &s, 1.0).unwrap();
        assert!(!r.pass);
        assert!(r.initial.value < -0.4);

        // b far below the bound fails once the coefficients are large
        let mut s = Scenario::new(0.5, 0.5, CoefficientSpec::constant(50.0), CoefficientSpec::constant(50.0), InitialSpec::constant(1.0));
        s.controls.nodes = 51;
        let Supersolution::Eigenfunction { d, b, lambda1, length, coefficient_max } =
            build_eigenfunction_supersolution(&s, 0.5).unwrap()
        else {
            panic!()
        };
        assert!(verify_supersolution(&Supersolution::Eigenfunction { d, b, lambda1, length, coefficient_max }, &s, 0.5).unwrap().pass);
        let halved = Supersolution::Eigenfunction { d, b: 0.25 * b, lambda1, length, coefficient_max };
        assert!(!verify_supersolution(&halved, &s, 0.5).unwrap().pass);
    }

    #[test]
    fn auxiliary_runs() {
        let run = solve_auxiliary_linear(flux(|_| 0.0), 1.0, 41, 1e-2, 100.0).unwrap();
        assert!(run.values.iter().flatten().all(|&v| (v - 1.0).abs() < 1e-12));
        assert!((run.bound - 1.0).abs() < 1e-12 && run.stabilized);

        let run = solve_auxiliary_linear(flux(|t| t * (1.0 + t).powi(-3)), 1.0, 41, 1e-2, 1e5).unwrap();
        assert!(run.stabilized);
        // mass gained through both ends: 2∫ t(1+t)^{-3} = 1
        assert!((run.bound - 2.0).abs() < 2e-2, "{}", run.bound);

        let run = solve_auxiliary_linear(flux(|t| t), 1.0, 41, 1e-2, 100.0).unwrap();
        assert!(!run.stabilized);

        assert!(solve_auxiliary_linear(flux(|_| -1.0), 1.0, 41, 1e-2, 1.0).is_err());
    }

    #[test]
    fn z_profile_examples() {
        assert_eq!(z_profile(2.0, 0.7, 1.3, &CoefficientSpec::zero(), 3.0).unwrap(), 1.0);
        let c = CoefficientSpec::power(1.0, 2.0);
        assert!((z_profile(2.0, 1.0, 1.0, &c, 0.0).unwrap() - 0.5).abs() < 1e-14);
        for t in [0.5, 3.0, 40.0] {
            assert!((z_profile(2.0, 1.0, 1.0, &c, t).unwrap() - (1.0 + t) / (2.0 + t)).abs() < 1e-14);
        }
        let mut prev = 0.0;
        for i in 0..=100 {
            let t = i as f64;
            let z = z_profile(3.0, 0.5, 2.0, &c, t).unwrap();
            assert!(z >= prev && z <= 1.0);
            prev = z;
            assert!(z_residual(3.0, 0.5, 2.0, &c, t).unwrap() <= 1e-8);
            assert!(z_residual(2.0, 1.0, 1.0, &CoefficientSpec::exp_decay(1.0, 0.5), t).unwrap() <= 1e-8);
        }
        assert!(matches!(z_profile(2.0, 1.0, 1.0, &CoefficientSpec::constant(1.0), 0.0), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn thresholds() {
        assert_eq!(small_data_threshold(2.0, 0.3, 2.0, &CoefficientSpec::zero()).unwrap(), 0.3);
        let c = CoefficientSpec::power(1.0, 2.0);
        assert!((small_data_threshold(2.0, 0.5, 2.0, &c).unwrap() - 0.25).abs() < 1e-14);
        let mut prev = f64::INFINITY;
        for a in [0.0, 0.5, 1.0, 2.0, 8.0] {
            let v = small_data_threshold(2.5, 0.5, 2.0, &c.scaled(a)).unwrap();
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn reaction_scaled_reductions() {
        let mut s = Scenario::new(2.0, 2.0, CoefficientSpec::power(1.0, 2.0), CoefficientSpec::zero(), InitialSpec::constant(0.1));
        s.controls.nodes = 21;
        let sup = build_reaction_scaled_supersolution(&s, 10.0, Some(0.4)).unwrap();
        let Supersolution::ReactionScaled { alpha, y_bound, .. } = &sup else { panic!() };
        assert_eq!(*alpha, 0.4);
        assert!((y_bound - 1.0).abs() < 1e-9);
        for t in [0.0, 1.0, 7.5] {
            let z = z_profile(2.0, 0.4, *y_bound, &s.c, t).unwrap();
            assert!(sup.sample(t, 21).unwrap().iter().all(|&v| (v - 0.4 * z).abs() < 1e-9));
        }

        let s = Scenario { c: CoefficientSpec::zero(), k: CoefficientSpec::power(1.0, 3.0), ..s };
        let sup = build_reaction_scaled_supersolution(&s, 10.0, None).unwrap();
        let Supersolution::ReactionScaled { alpha, y_bound, aux, .. } = &sup else { panic!() };
        assert!((alpha - y_bound.powf(-2.0)).abs() < 1e-15);
        let field = sup.sample(aux.times[50], 21).unwrap();
        for (v, y) in field.iter().zip(&aux.values[50]) {
            assert!((v - alpha * y).abs() < 1e-14);
        }
    }

    #[test]
    fn exp_weighted_bounded_flag() {
        let mut s = Scenario::new(1.0, 2.0, CoefficientSpec::power(1.0, 2.0), CoefficientSpec::power(1.0, 4.0), InitialSpec::constant(0.01));
        s.controls.nodes = 21;
        let sup = build_exp_weighted_supersolution(&s, 10.0, None).unwrap();
        let Supersolution::ExpWeighted { bounded, alpha, h_bound, .. } = &sup else { panic!() };
        assert!(*bounded);
        assert!(alpha.powf(1.0) * h_bound.powf(2.0) <= 1.0 + 1e-12);

        let s = Scenario { c: CoefficientSpec::power(1.0, 1.0), k: CoefficientSpec::power(1.0, 5.0), ..s };
        let Supersolution::ExpWeighted { bounded, .. } = build_exp_weighted_supersolution(&s, 10.0, None).unwrap() else {
            panic!()
        };
        assert!(!bounded);

        let s = Scenario { p: 2.0, ..s };
        assert!(matches!(build_exp_weighted_supersolution(&s, 10.0, None), Err(Error::NotApplicable(_))));
    }
}
