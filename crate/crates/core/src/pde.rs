//! Finite-difference solver for `u_t = u_xx + c(t) u^p` on `(0, L)` with the
//! memory flux `∂u/∂ν = k(t) M(t)`, `M(t) = ∫_0^t u^q(x_b, τ) dτ`, at both
//! endpoints.
//!
//! One step of size `dt` from `t_n`:
//!
//! 1. diffusion by backward Euler on the uniform grid, with the boundary flux
//!    `k(t_n) M^n` entering through second-order ghost nodes
//!    (`u_{-1} = u_1 + 2h F` at `x = 0`, symmetrically at `x = L`);
//! 2. the pointwise reaction flow of `u' = c(t) u^p` over `[t_n, t_n + dt]`,
//!    which is separable and integrated exactly through `∫ c`;
//! 3. trapezoid update of the boundary memory integrals.
//!
//! The same machinery integrates the exponentially weighted problem obtained
//! for `p = 1` (see [`crate::transform`]) and linear problems with a
//! prescribed boundary flux.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coeffs::CoefficientSpec;
use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Scenario description
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialFamily {
    Constant,
    CosBump,
    Tabulated,
}

/// Initial datum `u_0`.
///
/// `cos_bump` is `A (1 - cos(2πx/L)) / 2`, whose slope vanishes at both
/// endpoints; `tabulated` holds equally spaced node values on `[0, L]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub family: InitialFamily,
    #[serde(default)]
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

impl InitialSpec {
    pub fn constant(value: f64) -> Self {
        InitialSpec { family: InitialFamily::Constant, value, values: None }
    }

    pub fn cos_bump(amplitude: f64) -> Self {
        InitialSpec { family: InitialFamily::CosBump, value: amplitude, values: None }
    }

    pub fn tabulated(values: Vec<f64>) -> Self {
        let value = values.iter().copied().fold(0.0, f64::max);
        InitialSpec { family: InitialFamily::Tabulated, value, values: Some(values) }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        InitialSpec {
            family: self.family,
            value: self.value * factor,
            values: self.values.as_ref().map(|v| v.iter().map(|x| x * factor).collect()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.family {
            InitialFamily::Constant | InitialFamily::CosBump => {
                if !(self.value.is_finite() && self.value >= 0.0) {
                    return Err(Error::Config("initial.value must be finite and >= 0".into()));
                }
            }
            InitialFamily::Tabulated => {
                let values = match &self.values {
                    Some(v) if v.len() >= 3 => v,
                    _ => {
                        return Err(Error::Config(
                            "tabulated initial data needs at least 3 node values".into(),
                        ))
                    }
                };
                if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::Config("initial values must be finite and >= 0".into()));
                }
                let amplitude = values.iter().copied().fold(0.0, f64::max);
                let n = values.len();
                // slopes in units of the table spacing; the invariant is scale-free
                let left = (values[1] - values[0]).abs() * (n - 1) as f64;
                let right = (values[n - 1] - values[n - 2]).abs() * (n - 1) as f64;
                if left.max(right) > 1e-8 * amplitude {
                    return Err(Error::Config(format!(
                        "initial data must have zero slope at both endpoints \
                         (|u0'| <= 1e-8 * max u0); got slopes {left:.3e}, {right:.3e} per unit length/L"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Node values on the uniform grid of `nodes` points over `[0, length]`.
    pub fn sample(&self, length: f64, nodes: usize) -> Vec<f64> {
        let h = length / (nodes - 1) as f64;
        match self.family {
            InitialFamily::Constant => vec![self.value; nodes],
            InitialFamily::CosBump => (0..nodes)
                .map(|i| {
                    let x = i as f64 * h;
                    0.5 * self.value * (1.0 - (2.0 * std::f64::consts::PI * x / length).cos())
                })
                .collect(),
            InitialFamily::Tabulated => {
                let values = self.values.as_deref().unwrap_or(&[]);
                let m = values.len();
                (0..nodes)
                    .map(|i| {
                        let s = i as f64 / (nodes - 1) as f64 * (m - 1) as f64;
                        let j = (s.floor() as usize).min(m - 2);
                        let frac = s - j as f64;
                        values[j] * (1.0 - frac) + values[j + 1] * frac
                    })
                    .collect()
            }
        }
    }

    pub fn sup(&self) -> f64 {
        match self.family {
            InitialFamily::Tabulated => {
                self.values.as_ref().map_or(0.0, |v| v.iter().copied().fold(0.0, f64::max))
            }
            _ => self.value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverControls {
    /// Grid nodes `N` (uniform, `h = L/(N-1)`).
    pub nodes: usize,
    /// First step; `θ h²` when unset.
    pub dt_init: Option<f64>,
    pub dt_max: f64,
    /// Safety factor: the reaction and boundary terms change `u` by at most
    /// about `θ` (relative) per step.
    pub theta: f64,
    pub blowup_threshold: f64,
    pub t_max: f64,
    /// Time between field snapshots; no snapshots when unset.
    pub snapshot_every: Option<f64>,
    /// Trace cadence in accepted steps.
    pub trace_every: usize,
    pub max_steps: usize,
}

impl Default for SolverControls {
    fn default() -> Self {
        SolverControls {
            nodes: 201,
            dt_init: None,
            dt_max: 1e-2,
            theta: 0.1,
            blowup_threshold: 1e10,
            t_max: 10.0,
            snapshot_every: None,
            trace_every: 1,
            max_steps: 20_000_000,
        }
    }
}

impl SolverControls {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 3 {
            return Err(Error::Config("domain.nodes must be >= 3".into()));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::Config("solver.theta must be in (0, 1]".into()));
        }
        if !(self.dt_max > 0.0) {
            return Err(Error::Config("solver.dt_max must be > 0".into()));
        }
        if !(self.t_max > 0.0) {
            return Err(Error::Config("solver.t_max must be > 0".into()));
        }
        if !(self.blowup_threshold > 0.0) {
            return Err(Error::Config("solver.blowup_threshold must be > 0".into()));
        }
        if self.dt_init.is_some_and(|d| !(d > 0.0)) {
            return Err(Error::Config("solver.dt_init must be > 0".into()));
        }
        if self.snapshot_every.is_some_and(|d| !(d > 0.0)) {
            return Err(Error::Config("output.snapshot_every must be > 0".into()));
        }
        if self.trace_every == 0 {
            return Err(Error::Config("trace cadence must be >= 1".into()));
        }
        Ok(())
    }

    /// `levels` refinements: the grid spacing, `θ` and `dt_max` are halved
    /// each time (nodes stay nested).
    pub fn refined(&self, levels: u32) -> Self {
        let factor = 2usize.pow(levels);
        SolverControls {
            nodes: (self.nodes - 1) * factor + 1,
            theta: self.theta / factor as f64,
            dt_max: self.dt_max / factor as f64,
            dt_init: self.dt_init.map(|d| d / (factor * factor) as f64),
            ..self.clone()
        }
    }
}

/// A full problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub length: f64,
    pub p: f64,
    pub q: f64,
    pub c: CoefficientSpec,
    pub k: CoefficientSpec,
    pub initial: InitialSpec,
    pub controls: SolverControls,
}

impl Scenario {
    pub fn new(p: f64, q: f64, c: CoefficientSpec, k: CoefficientSpec, initial: InitialSpec) -> Self {
        Scenario { length: 1.0, p, q, c, k, initial, controls: SolverControls::default() }
    }

    pub fn with_controls(mut self, controls: SolverControls) -> Self {
        self.controls = controls;
        self
    }

    pub fn with_initial(&self, initial: InitialSpec) -> Self {
        Scenario { initial, ..self.clone() }
    }

    pub fn refined(&self, levels: u32) -> Self {
        Scenario { controls: self.controls.refined(levels), ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(Error::Config("domain.length must be > 0".into()));
        }
        if !(self.p.is_finite() && self.p > 0.0) {
            return Err(Error::Config("exponents.p must be > 0".into()));
        }
        if !(self.q.is_finite() && self.q > 0.0) {
            return Err(Error::Config("exponents.q must be > 0".into()));
        }
        self.c.validate()?;
        self.k.validate()?;
        self.initial.validate()?;
        self.controls.validate()
    }

    pub fn grid_spacing(&self) -> f64 {
        self.length / (self.controls.nodes - 1) as f64
    }

    pub fn grid(&self) -> Vec<f64> {
        let h = self.grid_spacing();
        (0..self.controls.nodes).map(|i| i as f64 * h).collect()
    }

    /// The original problem.
    pub fn problem(&self) -> Problem {
        Problem {
            length: self.length,
            p: self.p,
            q: self.q,
            c: self.c.clone(),
            k: self.k.clone(),
            reaction: true,
            law: BoundaryLaw::Memory,
            controls: self.controls.clone(),
        }
    }

    pub fn initial_state(&self) -> State {
        State::new(self.initial.sample(self.length, self.controls.nodes))
    }
}

/// How the boundary flux is produced.
#[derive(Clone)]
pub enum BoundaryLaw {
    /// `F = k(t) M`, `M = ∫_0^t u^q`.
    Memory,
    /// `F = k(t) e^{-C(t)} A`, `A = ∫_0^t e^{q C(τ)} u^q`.
    WeightedMemory,
    /// `F = g(t)`, no memory.
    Prescribed(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for BoundaryLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundaryLaw::Memory => f.write_str("Memory"),
            BoundaryLaw::WeightedMemory => f.write_str("WeightedMemory"),
            BoundaryLaw::Prescribed(_) => f.write_str("Prescribed"),
        }
    }
}

/// Discretised dynamics: geometry, exponents, coefficients, reaction switch
/// and boundary law.
#[derive(Debug, Clone)]
pub struct Problem {
    pub length: f64,
    pub p: f64,
    pub q: f64,
    pub c: CoefficientSpec,
    pub k: CoefficientSpec,
    pub reaction: bool,
    pub law: BoundaryLaw,
    pub controls: SolverControls,
}

// ---------------------------------------------------------------------------
// State and stepping
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub u: Vec<f64>,
    /// Memory accumulator at `x = 0`.
    pub m_left: f64,
    /// Memory accumulator at `x = L`.
    pub m_right: f64,
    /// `C(t) = ∫_0^t c`.
    pub cum_c: f64,
    pub steps: usize,
    pub last_dt: Option<f64>,
}

impl State {
    pub fn new(u: Vec<f64>) -> Self {
        State { t: 0.0, u, m_left: 0.0, m_right: 0.0, cum_c: 0.0, steps: 0, last_dt: None }
    }

    pub fn sup_norm(&self) -> f64 {
        self.u.iter().fold(0.0, |m, &v| if v.is_nan() || m.is_nan() { f64::NAN } else { m.max(v.abs()) })
    }

    pub fn min(&self) -> f64 {
        self.u.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Trapezoid approximation of `w(t) = ∫_Ω u dx`.
    pub fn mass(&self, length: f64) -> f64 {
        trapezoid(&self.u, length)
    }
}

pub fn trapezoid(values: &[f64], length: f64) -> f64 {
    let n = values.len();
    let h = length / (n - 1) as f64;
    let interior: f64 = values[1..n - 1].iter().sum();
    h * (interior + 0.5 * (values[0] + values[n - 1]))
}

/// Thomas algorithm for a tridiagonal system; `lower[0]` and
/// `upper[n-1]` are ignored. Returns `None` on a vanishing pivot.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) -> Option<()> {
    let n = diag.len();
    let mut c_prime = vec![0.0; n];
    let mut denom = diag[0];
    if denom == 0.0 {
        return None;
    }
    c_prime[0] = upper[0] / denom;
    rhs[0] /= denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * c_prime[i - 1];
        if denom == 0.0 {
            return None;
        }
        if i + 1 < n {
            c_prime[i] = upper[i] / denom;
        }
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c_prime[i] * rhs[i + 1];
    }
    Some(())
}

/// Exact flow of `u' = c(t) u^p` over a step with `∫ c = delta_c`.
fn reaction_flow(u: f64, p: f64, delta_c: f64) -> f64 {
    if u <= 0.0 || delta_c == 0.0 {
        return u;
    }
    if p == 1.0 {
        u * delta_c.exp()
    } else if p > 1.0 {
        let base = u.powf(1.0 - p) - (p - 1.0) * delta_c;
        if base <= 0.0 {
            f64::INFINITY
        } else {
            base.powf(-1.0 / (p - 1.0))
        }
    } else {
        (u.powf(1.0 - p) + (1.0 - p) * delta_c).powf(1.0 / (1.0 - p))
    }
}

impl Problem {
    pub fn nodes(&self) -> usize {
        self.controls.nodes
    }

    pub fn grid_spacing(&self) -> f64 {
        self.length / (self.controls.nodes - 1) as f64
    }

    fn needs_cumulative(&self) -> bool {
        self.reaction || matches!(self.law, BoundaryLaw::WeightedMemory)
    }

    /// Outward boundary fluxes `(F_left, F_right)` at the state's time.
    pub fn fluxes(&self, state: &State) -> (f64, f64) {
        let t = state.t;
        match &self.law {
            BoundaryLaw::Memory => {
                let k = self.k.value(t);
                (k * state.m_left, k * state.m_right)
            }
            BoundaryLaw::WeightedMemory => {
                let k = self.k.value(t) * (-state.cum_c).exp();
                (k * state.m_left, k * state.m_right)
            }
            BoundaryLaw::Prescribed(g) => {
                let v = g(t);
                (v, v)
            }
        }
    }

    fn memory_integrand(&self, ub: f64, cum_c: f64) -> f64 {
        match self.law {
            BoundaryLaw::Memory => ub.powf(self.q),
            BoundaryLaw::WeightedMemory => (self.q * cum_c).exp() * ub.powf(self.q),
            BoundaryLaw::Prescribed(_) => 0.0,
        }
    }

    /// Advance by one step of size `dt`.
    pub fn step(&self, state: &State, dt: f64) -> Result<State> {
        if !(dt > 0.0) {
            return Err(Error::Precondition(format!("step size must be > 0, got {dt}")));
        }
        let n = self.nodes();
        if state.u.len() != n {
            return Err(Error::Precondition(format!(
                "state has {} nodes, problem expects {n}",
                state.u.len()
            )));
        }
        let h = self.grid_spacing();
        let r = dt / (h * h);
        let (f_left, f_right) = self.fluxes(state);

        let lower = {
            let mut v = vec![-r; n];
            v[n - 1] = -2.0 * r;
            v
        };
        let upper = {
            let mut v = vec![-r; n];
            v[0] = -2.0 * r;
            v
        };
        let diag = vec![1.0 + 2.0 * r; n];
        let mut u = state.u.clone();
        u[0] += 2.0 * dt * f_left / h;
        u[n - 1] += 2.0 * dt * f_right / h;
        solve_tridiagonal(&lower, &diag, &upper, &mut u)
            .expect("diagonally dominant system has nonzero pivots");

        let delta_c = if self.needs_cumulative() { self.c.integral(state.t, state.t + dt) } else { 0.0 };
        if self.reaction && delta_c > 0.0 {
            for v in u.iter_mut() {
                *v = reaction_flow(*v, self.p, delta_c);
            }
        }
        let cum_c = state.cum_c + delta_c;
        let m_left = state.m_left
            + 0.5 * dt * (self.memory_integrand(state.u[0], state.cum_c) + self.memory_integrand(u[0], cum_c));
        let m_right = state.m_right
            + 0.5
                * dt
                * (self.memory_integrand(state.u[n - 1], state.cum_c)
                    + self.memory_integrand(u[n - 1], cum_c));
        Ok(State {
            t: state.t + dt,
            u,
            m_left,
            m_right,
            cum_c,
            steps: state.steps + 1,
            last_dt: Some(dt),
        })
    }

    /// Adaptive step: `min(dt_max, θ / rate)` with `rate` the relative growth
    /// rate of the reaction plus that of the boundary feedback; the first step
    /// is `θ h²` and steps at most double afterwards.
    pub fn choose_dt(&self, state: &State) -> f64 {
        let ctl = &self.controls;
        let h = self.grid_spacing();
        let t = state.t;
        let sup = state.sup_norm();
        let mut rate = 0.0;
        if self.reaction && sup > 0.0 {
            rate += self.c.value(t) * sup.powf(self.p - 1.0);
        }
        let (f_left, f_right) = self.fluxes(state);
        let n = self.nodes();
        let k_eff = match self.law {
            BoundaryLaw::Memory => self.k.value(t),
            BoundaryLaw::WeightedMemory => self.k.value(t) * ((self.q - 1.0) * state.cum_c).exp(),
            BoundaryLaw::Prescribed(_) => 0.0,
        };
        let mut boundary: f64 = 0.0;
        for (ub, flux) in [(state.u[0], f_left), (state.u[n - 1], f_right)] {
            if ub > 0.0 {
                let mut b = 2.0 * flux / (h * ub);
                if k_eff > 0.0 {
                    b += (2.0 * k_eff * self.q * ub.powf(self.q - 1.0) / h).sqrt();
                }
                boundary = boundary.max(b);
            }
        }
        rate += boundary;
        let mut dt = (ctl.theta / (rate + 1e-30)).min(ctl.dt_max);
        dt = match state.last_dt {
            Some(prev) => dt.min(2.0 * prev),
            None => dt.min(ctl.dt_init.unwrap_or(ctl.theta * h * h)),
        };
        dt
    }
}

/// One step of the original problem.
pub fn step(state: &State, scenario: &Scenario, dt: f64) -> Result<State> {
    scenario.problem().step(state, dt)
}

pub fn choose_dt(state: &State, scenario: &Scenario) -> f64 {
    scenario.problem().choose_dt(state)
}

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    BlowUp,
    GlobalToHorizon,
    Aborted(String),
}

impl RunStatus {
    pub fn label(&self) -> &'static str {
        match self {
            RunStatus::BlowUp => "BlowUp",
            RunStatus::GlobalToHorizon => "GlobalToHorizon",
            RunStatus::Aborted(_) => "Aborted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub sup_norm: f64,
    pub mass: f64,
    pub m_left: f64,
    pub m_right: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupEstimate {
    pub t_cross: f64,
    pub t_fit: Option<f64>,
    pub fit_quality: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SimulationOutcome {
    pub status: RunStatus,
    pub t_end: f64,
    pub sup_norm_end: f64,
    pub blowup_estimate: Option<BlowupEstimate>,
    pub trace: Vec<TraceRow>,
    pub snapshots: Vec<Snapshot>,
    pub final_state: State,
}

/// Result of one accepted step inside a [`Simulation`].
#[derive(Debug, Clone, PartialEq)]
pub enum Progress {
    Running,
    Finished(RunStatus),
}

/// A run in progress: owns its state and records the trace.
pub struct Simulation {
    pub problem: Problem,
    pub state: State,
    pub trace: Vec<TraceRow>,
    pub snapshots: Vec<Snapshot>,
    next_snapshot: Option<f64>,
    finished: Option<RunStatus>,
}

impl Simulation {
    pub fn new(problem: Problem, state: State) -> Self {
        let mut sim = Simulation {
            next_snapshot: problem.controls.snapshot_every.map(|_| 0.0),
            problem,
            state,
            trace: Vec::new(),
            snapshots: Vec::new(),
            finished: None,
        };
        sim.record_row(0.0);
        sim.maybe_snapshot();
        sim
    }

    fn record_row(&mut self, dt: f64) {
        let s = &self.state;
        self.trace.push(TraceRow {
            t: s.t,
            sup_norm: s.sup_norm(),
            mass: s.mass(self.problem.length),
            m_left: s.m_left,
            m_right: s.m_right,
            dt,
        });
    }

    fn maybe_snapshot(&mut self) {
        if let (Some(next), Some(every)) = (self.next_snapshot, self.problem.controls.snapshot_every) {
            if self.state.t >= next - 1e-12 * every {
                self.snapshots.push(Snapshot { t: self.state.t, u: self.state.u.clone() });
                let mut n = next + every;
                while n <= self.state.t {
                    n += every;
                }
                self.next_snapshot = Some(n);
            }
        }
    }

    /// Status check before taking a step; `Some` when the run is over.
    pub fn check_termination(&mut self) -> Option<RunStatus> {
        if let Some(done) = &self.finished {
            return Some(done.clone());
        }
        let ctl = &self.problem.controls;
        let status = if self.state.t >= ctl.t_max * (1.0 - 1e-14) {
            Some(RunStatus::GlobalToHorizon)
        } else if self.state.steps >= ctl.max_steps {
            Some(RunStatus::Aborted(format!("step budget of {} exhausted", ctl.max_steps)))
        } else {
            None
        };
        if let Some(s) = &status {
            self.finished = Some(s.clone());
        }
        status
    }

    /// Step size the run would take next (clipped to the horizon).
    pub fn proposed_dt(&self) -> f64 {
        let dt = self.problem.choose_dt(&self.state);
        dt.min(self.problem.controls.t_max - self.state.t).max(f64::MIN_POSITIVE)
    }

    /// Take one step of size `dt` and classify the new state.
    pub fn advance(&mut self, dt: f64) -> Result<Progress> {
        if let Some(done) = self.check_termination() {
            return Ok(Progress::Finished(done));
        }
        let next = self.problem.step(&self.state, dt)?;
        self.state = next;
        let ctl = &self.problem.controls;
        let sup = self.state.sup_norm();
        let status = if sup.is_nan() || self.state.m_left.is_nan() || self.state.m_right.is_nan() {
            Some(RunStatus::Aborted("NaN detected".into()))
        } else if sup >= ctl.blowup_threshold {
            Some(RunStatus::BlowUp)
        } else if self.state.min() < -1e-10 * sup {
            Some(RunStatus::Aborted(format!(
                "negative undershoot {:.3e} at t = {}",
                self.state.min(),
                self.state.t
            )))
        } else {
            None
        };
        let near_threshold = sup >= 0.01 * ctl.blowup_threshold;
        if status.is_some() || near_threshold || self.state.steps % ctl.trace_every == 0 {
            self.record_row(dt);
        }
        self.maybe_snapshot();
        match status {
            Some(s) => {
                self.finished = Some(s.clone());
                Ok(Progress::Finished(s))
            }
            None => Ok(Progress::Running),
        }
    }

    /// Step with the adaptive `dt` until the run ends.
    pub fn run_to_end(mut self) -> Result<SimulationOutcome> {
        let status = loop {
            if let Some(s) = self.check_termination() {
                break s;
            }
            let dt = self.proposed_dt();
            if let Progress::Finished(s) = self.advance(dt)? {
                break s;
            }
        };
        Ok(self.into_outcome(status))
    }

    pub fn into_outcome(mut self, status: RunStatus) -> SimulationOutcome {
        if self.trace.last().is_none_or(|r| r.t < self.state.t) {
            let dt = self.state.last_dt.unwrap_or(0.0);
            self.record_row(dt);
        }
        let blowup_estimate = if status == RunStatus::BlowUp {
            let samples: Vec<(f64, f64)> = self.trace.iter().map(|r| (r.t, r.sup_norm)).collect();
            estimate_blowup_time(&samples, self.problem.p, self.problem.controls.blowup_threshold)
                .ok()
        } else {
            None
        };
        SimulationOutcome {
            t_end: self.state.t,
            sup_norm_end: self.state.sup_norm(),
            status,
            blowup_estimate,
            trace: self.trace,
            snapshots: self.snapshots,
            final_state: self.state,
        }
    }
}

/// Run a scenario from its initial datum to blow-up, horizon or budget.
pub fn run(scenario: &Scenario) -> Result<SimulationOutcome> {
    scenario.validate()?;
    Simulation::new(scenario.problem(), scenario.initial_state()).run_to_end()
}

/// Blow-up time estimates from a `(t, ‖u‖_∞)` trace that ends at or above
/// `threshold`.
///
/// `t_cross` interpolates `ln ‖u‖_∞` at the first crossing. For `p > 1` the
/// last 20 samples of `‖u‖_∞^{1-p}` are fitted by a straight line whose zero
/// is `t_fit`; `fit_quality` is its R².
pub fn estimate_blowup_time(samples: &[(f64, f64)], p: f64, threshold: f64) -> Result<BlowupEstimate> {
    let Some(&(_, last)) = samples.last() else {
        return Err(Error::Precondition("empty trace".into()));
    };
    if !(last >= threshold) {
        return Err(Error::Precondition(format!(
            "trace ends at {last:e}, below the blow-up threshold {threshold:e}"
        )));
    }
    let i = samples.iter().position(|s| s.1 >= threshold).expect("last sample crosses");
    let t_cross = if i == 0 {
        samples[0].0
    } else {
        let (t0, u0) = samples[i - 1];
        let (t1, u1) = samples[i];
        if u1.is_finite() && u0 > 0.0 {
            let (l0, l1, lt) = (u0.ln(), u1.ln(), threshold.ln());
            t0 + (t1 - t0) * (lt - l0) / (l1 - l0)
        } else {
            t1
        }
    };
    let mut estimate = BlowupEstimate { t_cross, t_fit: None, fit_quality: None };
    if p > 1.0 && samples.len() >= 20 {
        let tail = &samples[samples.len() - 20..];
        let xs: Vec<f64> = tail.iter().map(|s| s.0).collect();
        let ys: Vec<f64> = tail.iter().map(|s| s.1.powf(1.0 - p)).collect();
        if let Some((intercept, slope, r2)) = least_squares(&xs, &ys) {
            if slope < 0.0 {
                estimate.t_fit = Some(-intercept / slope);
                estimate.fit_quality = Some(r2);
            }
        }
    }
    Ok(estimate)
}

fn least_squares(xs: &[f64], ys: &[f64]) -> Option<(f64, f64, f64)> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Some((intercept, slope, r2))
}

// ---------------------------------------------------------------------------
// Comparison and mass diagnostics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    /// `u_low ≤ u_high + tol` at every shared node and time.
    pub holds: bool,
    /// Largest `u_low - u_high - tol` (negative when the order holds).
    pub max_violation: f64,
    /// Largest `|u_low - u_high|`.
    pub max_abs_diff: f64,
    /// Final shared time.
    pub t_compared: f64,
    pub low_status: Option<RunStatus>,
    pub high_status: Option<RunStatus>,
}

/// Runs two scenarios that differ only in their initial data in lockstep
/// (shared step sequence) and checks `u_low ≤ u_high` with tolerance
/// `1e-8 (1 + ‖u_high‖_∞)` until the horizon or the first run's end.
pub fn verify_comparison(low: &Scenario, high: &Scenario) -> Result<ComparisonReport> {
    low.validate()?;
    high.validate()?;
    if low.controls.nodes != high.controls.nodes || low.length != high.length || low.p != high.p || low.q != high.q {
        return Err(Error::Precondition("comparison needs scenarios on the same grid and exponents".into()));
    }
    let low_state = low.initial_state();
    let high_state = high.initial_state();
    if low.p.min(low.q) < 1.0 && !low_state.u.iter().all(|&v| v > 0.0) {
        return Err(Error::Precondition(
            "min(p, q) < 1 requires a strictly positive lower initial datum".into(),
        ));
    }
    let mut a = Simulation::new(low.problem(), low_state);
    let mut b = Simulation::new(high.problem(), high_state);
    let mut report = ComparisonReport {
        holds: true,
        max_violation: f64::NEG_INFINITY,
        max_abs_diff: 0.0,
        t_compared: 0.0,
        low_status: None,
        high_status: None,
    };
    compare_fields(&a.state.u, &b.state.u, &mut report);
    loop {
        let sa = a.check_termination();
        let sb = b.check_termination();
        if sa.is_some() || sb.is_some() {
            report.low_status = sa;
            report.high_status = sb;
            break;
        }
        let dt = a.proposed_dt().min(b.proposed_dt());
        let pa = a.advance(dt)?;
        let pb = b.advance(dt)?;
        if !a.state.sup_norm().is_finite() || !b.state.sup_norm().is_finite() {
            report.low_status = Some(RunStatus::BlowUp).filter(|_| pa != Progress::Running);
            report.high_status = Some(RunStatus::BlowUp).filter(|_| pb != Progress::Running);
            break;
        }
        compare_fields(&a.state.u, &b.state.u, &mut report);
        report.t_compared = a.state.t;
        if pa != Progress::Running || pb != Progress::Running {
            report.low_status = match pa {
                Progress::Finished(s) => Some(s),
                Progress::Running => None,
            };
            report.high_status = match pb {
                Progress::Finished(s) => Some(s),
                Progress::Running => None,
            };
            break;
        }
    }
    Ok(report)
}

fn compare_fields(low: &[f64], high: &[f64], report: &mut ComparisonReport) {
    let sup_high = high.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-8 * (1.0 + sup_high);
    for (l, h) in low.iter().zip(high) {
        let v = l - h - tol;
        report.max_violation = report.max_violation.max(v);
        report.max_abs_diff = report.max_abs_diff.max((l - h).abs());
        if v > 0.0 {
            report.holds = false;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassReport {
    /// Largest relative shortfall of the mass increment below
    /// `|Ω|^{1-p} ∫ c · w^p` between consecutive trace rows.
    pub max_deficit: f64,
    pub worst_t: f64,
}

/// Checks the mass inequality `w' ≥ |Ω|^{1-p} c(t) w^p` (valid for `p ≥ 1`)
/// on consecutive trace rows, in increment form:
/// `w(t_b) - w(t_a) ≥ |Ω|^{1-p} w(t_a)^p ∫_{t_a}^{t_b} c`.
pub fn mass_inequality_check(trace: &[TraceRow], scenario: &Scenario) -> Result<MassReport> {
    if scenario.p < 1.0 {
        return Err(Error::NotApplicable(format!(
            "mass inequality needs p >= 1, got {}",
            scenario.p
        )));
    }
    let omega = scenario.length;
    let mut report = MassReport { max_deficit: 0.0, worst_t: 0.0 };
    for w in trace.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(b.t > a.t) || !b.mass.is_finite() {
            continue;
        }
        let lower = omega.powf(1.0 - scenario.p) * a.mass.powf(scenario.p) * scenario.c.integral(a.t, b.t);
        let gain = b.mass - a.mass;
        let deficit = (lower - gain).max(0.0) / b.mass.abs().max(f64::MIN_POSITIVE);
        if deficit > report.max_deficit {
            report.max_deficit = deficit;
            report.worst_t = b.t;
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

/// Shortest round-trip text for `x`; exponent form outside `[1e-4, 1e15)`.
pub fn format_number(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub const TRACE_HEADER: &str = "t,sup_norm,mass_w,M_left,M_right,dt";

pub fn write_trace_csv<W: Write>(mut out: W, trace: &[TraceRow]) -> std::io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in trace {
        let cols = [r.t, r.sup_norm, r.mass, r.m_left, r.m_right, r.dt].map(format_number);
        writeln!(out, "{}", cols.join(","))?;
    }
    Ok(())
}

pub fn snapshot_file_name(index: usize) -> String {
    format!("snap_{index:06}.csv")
}

pub fn write_snapshot_csv<W: Write>(mut out: W, grid: &[f64], u: &[f64]) -> std::io::Result<()> {
    writeln!(out, "x,u")?;
    for (x, v) in grid.iter().zip(u) {
        writeln!(out, "{},{}", format_number(*x), format_number(*v))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(p: f64, q: f64, c: CoefficientSpec, k: CoefficientSpec, u0: InitialSpec) -> Scenario {
        Scenario::new(p, q, c, k, u0)
    }

    #[test]
    fn constants_are_steady_without_sources() {
        let s = scenario(2.0, 2.0, CoefficientSpec::zero(), CoefficientSpec::zero(), InitialSpec::constant(3.0));
        let mut state = s.initial_state();
        for _ in 0..10 {
            state = step(&state, &s, 1e-3).unwrap();
        }
        let err = state.u.iter().fold(0.0f64, |m, v| m.max((v - 3.0).abs()));
        assert!(err < 1e-11, "{err}");
    }

    #[test]
    fn uniform_reaction_step() {
        let s = scenario(2.0, 2.0, CoefficientSpec::constant(1.0), CoefficientSpec::zero(), InitialSpec::constant(1.0));
        let dt = 1e-3;
        let state = step(&s.initial_state(), &s, dt).unwrap();
        // exact flow of u' = u^2 from 1: 1/(1 - dt) = 1 + dt + O(dt^2)
        for &v in &state.u {
            assert!((v - 1.0 / (1.0 - dt)).abs() < 1e-12);
            assert!((v - (1.0 + dt)).abs() < 2.0 * dt * dt);
        }
    }

    #[test]
    fn memory_accumulates_by_trapezoid() {
        let s = scenario(1.0, 1.0, CoefficientSpec::zero(), CoefficientSpec::constant(1.0), InitialSpec::constant(1.0));
        let dt = 1e-4;
        let s1 = step(&s.initial_state(), &s, dt).unwrap();
        // first step: flux is zero (M = 0), u stays 1 and M = dt (1 + 1)/2
        assert!((s1.m_left - dt).abs() < 1e-18);
        let s2 = step(&s1, &s, dt).unwrap();
        let expected = dt + 0.5 * dt * (s1.u[0] + s2.u[0]);
        assert!((s2.m_left - expected).abs() < 1e-18);
        assert!((s2.m_left - 2.0 * dt).abs() < 1e-9);
        assert_eq!(s2.m_left, s2.m_right);
    }

    #[test]
    fn first_dt_from_zero_state() {
        let s = scenario(2.0, 2.0, CoefficientSpec::constant(1.0), CoefficientSpec::constant(1.0), InitialSpec::constant(0.0));
        let h = s.grid_spacing();
        let dt = choose_dt(&s.initial_state(), &s);
        assert!((dt - (s.controls.dt_max.min(0.1 * h * h))).abs() < 1e-20);
    }

    #[test]
    fn dt_limited_by_reaction_rate() {
        let s = scenario(2.0, 2.0, CoefficientSpec::constant(1.0), CoefficientSpec::zero(), InitialSpec::constant(1e6));
        let mut state = s.initial_state();
        state.last_dt = Some(1.0);
        let dt = choose_dt(&state, &s);
        assert!(dt <= 1e-7 * (1.0 + 1e-12));
        state.u = vec![s.controls.blowup_threshold; s.controls.nodes];
        assert!(choose_dt(&state, &s) > 0.0);
    }

    #[test]
    fn zero_data_stays_zero() {
        let mut s = scenario(2.0, 2.0, CoefficientSpec::constant(1.0), CoefficientSpec::constant(1.0), InitialSpec::constant(0.0));
        s.controls.t_max = 5.0;
        let out = run(&s).unwrap();
        assert_eq!(out.status, RunStatus::GlobalToHorizon);
        assert!(out.trace.iter().all(|r| r.sup_norm <= 1e-12));
    }

    #[test]
    fn step_budget_aborts() {
        let mut s = scenario(2.0, 2.0, CoefficientSpec::constant(1.0), CoefficientSpec::zero(), InitialSpec::constant(1.0));
        s.controls.max_steps = 10;
        let out = run(&s).unwrap();
        assert!(matches!(out.status, RunStatus::Aborted(_)));
        assert_eq!(out.final_state.steps, 10);
    }

    #[test]
    fn blowup_fit_on_exact_traces() {
        let p2: Vec<(f64, f64)> = (0..=90).map(|i| {
            let t = 0.9 + 0.001 * i as f64;
            (t, 1.0 / (1.0 - t))
        }).collect();
        let est = estimate_blowup_time(&p2, 2.0, 50.0).unwrap();
        assert!((est.t_fit.unwrap() - 1.0).abs() < 1e-10);
        assert!((est.fit_quality.unwrap() - 1.0).abs() < 1e-12);

        let p3: Vec<(f64, f64)> = (0..40).map(|i| {
            let t = 0.45 + 0.001 * i as f64;
            (t, (1.0 - 2.0 * t).powf(-0.5))
        }).collect();
        let est = estimate_blowup_time(&p3, 3.0, 3.0).unwrap();
        assert!((est.t_fit.unwrap() - 0.5).abs() < 1e-10);

        let flat: Vec<(f64, f64)> = (0..30).map(|i| (i as f64, 1.0)).collect();
        assert!(estimate_blowup_time(&flat, 2.0, 10.0).is_err());

        let short = &p2[p2.len() - 10..];
        let est = estimate_blowup_time(short, 2.0, 50.0).unwrap();
        assert!(est.t_fit.is_none());
    }

    #[test]
    fn tridiagonal_solves_known_system() {
        let lower = [0.0, -1.0, -1.0];
        let diag = [2.0, 2.0, 2.0];
        let upper = [-1.0, -1.0, 0.0];
        let mut rhs = [1.0, 0.0, 1.0];
        solve_tridiagonal(&lower, &diag, &upper, &mut rhs).unwrap();
        for v in rhs {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn tabulated_initial_slope_invariant() {
        let bad = InitialSpec::tabulated(vec![0.0, 1.0, 2.0, 3.0]);
        let err = bad.validate().unwrap_err();
        assert!(err.to_string().contains("zero slope"));
        let good = InitialSpec::tabulated(vec![1.0, 1.0, 2.0, 1.0, 1.0]);
        assert!(good.validate().is_ok());
    }

    #[test]
    fn mass_check_rejects_sublinear() {
        let s = scenario(0.5, 2.0, CoefficientSpec::zero(), CoefficientSpec::zero(), InitialSpec::constant(1.0));
        assert!(matches!(mass_inequality_check(&[], &s), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn trace_csv_header() {
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,sup_norm,mass_w,M_left,M_right,dt\n");
        assert_eq!(snapshot_file_name(7), "snap_000007.csv");
    }
}
