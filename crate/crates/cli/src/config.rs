//! JSON scenario documents.
//!
//! ```json
//! {
//!   "domain":    { "length": 1.0, "nodes": 201 },
//!   "exponents": { "p": 2.0, "q": 2.0 },
//!   "c":         { "family": "constant", "amplitude": 1.0 },
//!   "k":         { "family": "power", "amplitude": 1.0, "gamma": 3.0 },
//!   "initial":   { "family": "constant", "value": 1.0 },
//!   "solver":    { "t_max": 2.0, "blowup_threshold": 1e10, "theta": 0.1, "dt_max": 0.01 },
//!   "output":    { "dir": "out", "snapshot_every": 0.1 }
//! }
//! ```
//!
//! `exponents`, `c`, `k` and `initial` are required; every other field has a
//! default. The optional `sweep` and `oracle` sections feed the commands of
//! the same name.

use std::path::PathBuf;

use memheat_core::coeffs::CoefficientSpec;
use memheat_core::pde::{InitialSpec, Scenario, SolverControls};
use memheat_core::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    /// Interval length `L` (default 1).
    #[serde(default = "default_length")]
    pub length: f64,
    /// Grid nodes `N` (default 201).
    #[serde(default = "default_nodes")]
    pub nodes: usize,
}

impl Default for Domain {
    fn default() -> Self {
        Domain { length: default_length(), nodes: default_nodes() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exponents {
    pub p: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Solver {
    /// Horizon (default 10).
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    /// `‖u‖_∞` level that counts as blow-up (default 1e10).
    #[serde(default = "default_threshold")]
    pub blowup_threshold: f64,
    /// Step safety factor (default 0.1).
    #[serde(default = "default_theta")]
    pub theta: f64,
    /// Largest step (default 0.01).
    #[serde(default = "default_dt_max")]
    pub dt_max: f64,
    /// Step budget; the run is aborted when it is exhausted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
}

impl Default for Solver {
    fn default() -> Self {
        Solver {
            t_max: default_t_max(),
            blowup_threshold: default_threshold(),
            theta: default_theta(),
            dt_max: default_dt_max(),
            max_steps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    /// Output directory (default `out`).
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// Time between field snapshots; none when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<f64>,
    /// Trace cadence in steps (default 1).
    #[serde(default = "default_trace_every")]
    pub trace_every: usize,
}

impl Default for Output {
    fn default() -> Self {
        Output { dir: default_dir(), snapshot_every: None, trace_every: default_trace_every() }
    }
}

/// Parameter lists for `sweep`; an absent list keeps the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub p: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub q: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub c: Vec<CoefficientSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub k: Vec<CoefficientSpec>,
    /// Overrides of `initial.value`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub initial_value: Vec<f64>,
}

/// Problem for `oracle`: `y'' = b(r) y^q` from `r = a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Oracle {
    pub b: CoefficientSpec,
    pub q: f64,
    #[serde(default)]
    pub a: f64,
    #[serde(default = "one")]
    pub y_a: f64,
    #[serde(default = "one")]
    pub yp_a: f64,
    #[serde(default = "default_r_max")]
    pub r_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub domain: Domain,
    pub exponents: Exponents,
    pub c: CoefficientSpec,
    pub k: CoefficientSpec,
    pub initial: InitialSpec,
    #[serde(default)]
    pub solver: Solver,
    #[serde(default)]
    pub output: Output,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<Oracle>,
}

fn default_length() -> f64 {
    1.0
}
fn default_nodes() -> usize {
    201
}
fn default_t_max() -> f64 {
    10.0
}
fn default_threshold() -> f64 {
    1e10
}
fn default_theta() -> f64 {
    0.1
}
fn default_dt_max() -> f64 {
    1e-2
}
fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_trace_every() -> usize {
    1
}
fn default_r_max() -> f64 {
    1e6
}
fn one() -> f64 {
    1.0
}

impl RunConfig {
    pub fn scenario(&self) -> Scenario {
        let controls = SolverControls {
            nodes: self.domain.nodes,
            dt_max: self.solver.dt_max,
            theta: self.solver.theta,
            blowup_threshold: self.solver.blowup_threshold,
            t_max: self.solver.t_max,
            snapshot_every: self.output.snapshot_every,
            trace_every: self.output.trace_every,
            max_steps: self.solver.max_steps.unwrap_or(SolverControls::default().max_steps),
            dt_init: None,
        };
        Scenario {
            length: self.domain.length,
            p: self.exponents.p,
            q: self.exponents.q,
            c: self.c.clone(),
            k: self.k.clone(),
            initial: self.initial.clone(),
            controls,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario().validate()?;
        if let Some(sweep) = &self.sweep {
            for p in sweep.p.iter().chain(&sweep.q) {
                if !(*p > 0.0) {
                    return Err(Error::Config("sweep exponents must be > 0".into()));
                }
            }
            for spec in sweep.c.iter().chain(&sweep.k) {
                spec.validate()?;
            }
            if sweep.initial_value.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::Config("sweep initial values must be >= 0".into()));
            }
        }
        if let Some(o) = &self.oracle {
            if !(o.r_max > o.a) {
                return Err(Error::Config("oracle.r_max must exceed oracle.a".into()));
            }
            o.b.validate()?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Parse and validate a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let config: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "exponents": { "p": 2, "q": 2 },
        "c": { "family": "constant", "amplitude": 1 },
        "k": { "family": "constant", "amplitude": 0 },
        "initial": { "family": "constant", "value": 1 }
    }"#;

    #[test]
    fn minimal_document_gets_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        let s = cfg.scenario();
        assert_eq!(s.controls.nodes, 201);
        assert_eq!(s.controls.theta, 0.1);
        assert_eq!(s.controls.blowup_threshold, 1e10);
        assert_eq!(s.length, 1.0);
    }

    #[test]
    fn round_trip() {
        let cfg = parse_config(MINIMAL).unwrap();
        let again = parse_config(&cfg.to_json()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn negative_exponent() {
        let text = MINIMAL.replace(r#""p": 2"#, r#""p": -1"#);
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("exponents.p must be > 0"), "{err}");
    }

    #[test]
    fn unknown_key_is_named() {
        let text = MINIMAL.replace(r#""exponents""#, r#""colour": 1, "exponents""#);
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("colour"), "{err}");
    }

    #[test]
    fn missing_key() {
        let text = MINIMAL.replace(r#""k": { "family": "constant", "amplitude": 0 },"#, "");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("missing field `k`"), "{err}");
    }

    #[test]
    fn tabulated_initial_slope() {
        let text = MINIMAL.replace(
            r#""initial": { "family": "constant", "value": 1 }"#,
            r#""initial": { "family": "tabulated", "values": [0, 1, 2, 3] }"#,
        );
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("zero slope"), "{err}");
    }
}
