//! Subcommand implementations. Each writes a plain-text report, one
//! finding per line, and returns the process exit status.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use memheat_core::constructions::{
    build_eigenfunction_supersolution, build_small_data_supersolution, check_domination, small_data_bound,
    verify_supersolution, ResidualMin,
};
use memheat_core::criteria::{classify_regime_with, ClassifyOptions};
use memheat_core::ode_oracle::{check_blowup_criterion, integrate_ode, OdeControls, OdeProblem, OdeStatus};
use memheat_core::pde::format_number as num;
use memheat_core::pde::{self, InitialFamily, InitialSpec, RunStatus, Scenario, SimulationOutcome};
use memheat_core::transform::equivalence_check;
use memheat_core::{CoefficientSpec, Error, Regime};
use rayon::prelude::*;

use crate::config::RunConfig;

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_ABORTED: u8 = 3;
pub const EXIT_FAIL: u8 = 4;

/// Largest discrepancy accepted between the direct and transformed routes.
pub const TRANSFORM_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    Classify,
    Verify,
    Sweep,
    Oracle,
}

#[derive(Debug, Clone, Default)]
pub struct Options {
    /// Overrides `output.dir`.
    pub out: Option<std::path::PathBuf>,
    pub refine: u32,
    pub transform: bool,
}

/// Runs `command`; configuration problems found while executing map to
/// exit status 2, everything unexpected is returned as an error.
pub fn dispatch<W: Write>(command: Command, config: &RunConfig, options: &Options, report: &mut W) -> Result<u8> {
    let scenario = config.scenario().refined(options.refine);
    let out_dir = options.out.clone().unwrap_or_else(|| config.output.dir.clone());
    let result = match command {
        Command::Run => run(&scenario, &out_dir, report),
        Command::Classify => classify(&scenario, report),
        Command::Verify if options.transform => verify_transform(&scenario, report),
        Command::Verify => verify(&scenario, report),
        Command::Sweep => sweep(config, &scenario, &out_dir, report),
        Command::Oracle => oracle(config, report),
    };
    match result {
        Err(e) if matches!(e.downcast_ref::<Error>(), Some(Error::Config(_))) => {
            writeln!(report, "error: {e}")?;
            Ok(EXIT_CONFIG)
        }
        other => other,
    }
}

fn write_outputs(scenario: &Scenario, outcome: &SimulationOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let trace = File::create(dir.join("trace.csv")).context("creating trace.csv")?;
    pde::write_trace_csv(BufWriter::new(trace), &outcome.trace)?;
    let grid = scenario.grid();
    for (i, snap) in outcome.snapshots.iter().enumerate() {
        let name = pde::snapshot_file_name(i);
        let file = File::create(dir.join(&name)).with_context(|| format!("creating {name}"))?;
        pde::write_snapshot_csv(BufWriter::new(file), &grid, &snap.u)?;
    }
    Ok(())
}

fn outcome_lines<W: Write>(outcome: &SimulationOutcome, report: &mut W) -> Result<()> {
    writeln!(
        report,
        "OUTCOME: status={} t_end={} sup_norm_end={} steps={}",
        outcome.status.label(),
        num(outcome.t_end),
        num(outcome.sup_norm_end),
        outcome.final_state.steps
    )?;
    if let RunStatus::Aborted(reason) = &outcome.status {
        writeln!(report, "OUTCOME: reason={reason}")?;
    }
    if let Some(est) = &outcome.blowup_estimate {
        write!(report, "OUTCOME: t_cross={}", est.t_cross)?;
        if let (Some(t_fit), Some(r2)) = (est.t_fit, est.fit_quality) {
            write!(report, " t_fit={t_fit} fit_r2={r2}")?;
        }
        writeln!(report)?;
    }
    Ok(())
}

fn status_exit(status: &RunStatus) -> u8 {
    match status {
        RunStatus::Aborted(_) => EXIT_ABORTED,
        _ => EXIT_OK,
    }
}

fn run<W: Write>(scenario: &Scenario, dir: &Path, report: &mut W) -> Result<u8> {
    let outcome = pde::run(scenario)?;
    write_outputs(scenario, &outcome, dir)?;
    outcome_lines(&outcome, report)?;
    Ok(status_exit(&outcome.status))
}

fn classify<W: Write>(scenario: &Scenario, report: &mut W) -> Result<u8> {
    let verdict = classify_regime_with(scenario.p, scenario.q, &scenario.c, &scenario.k, &ClassifyOptions::default())?;
    match verdict.rule {
        Some(rule) => writeln!(report, "VERDICT: {} via {}", verdict.regime, rule)?,
        None => writeln!(report, "VERDICT: {}", verdict.regime)?,
    }
    for cond in &verdict.conditions {
        writeln!(
            report,
            "VERDICT: condition {} = {} ({})",
            cond.id,
            cond.result.status_text(),
            cond.result.evidence()
        )?;
    }
    if let Some(note) = &verdict.note {
        writeln!(report, "VERDICT: note {note}")?;
    }
    if verdict.regime.is_small_data() {
        match build_small_data_supersolution(scenario, scenario.controls.t_max).and_then(|s| small_data_bound(&s)) {
            Ok(bound) => writeln!(report, "VERDICT: small_data_bound={bound}")?,
            Err(e) => writeln!(report, "VERDICT: small_data_bound unavailable ({e})")?,
        }
    }
    Ok(EXIT_OK)
}

fn residual_line<W: Write>(report: &mut W, name: &str, m: &ResidualMin, tol: f64) -> Result<()> {
    let verdict = if m.value >= -tol { "PASS" } else { "FAIL" };
    writeln!(report, "RESIDUAL: {name} min={:e} at x={} t={} {verdict}", m.value, m.x, m.t)?;
    Ok(())
}

fn verify<W: Write>(scenario: &Scenario, report: &mut W) -> Result<u8> {
    let t_end = scenario.controls.t_max;
    let sup = if scenario.p.max(scenario.q) <= 1.0 {
        build_eigenfunction_supersolution(scenario, t_end)
    } else {
        build_small_data_supersolution(scenario, t_end)
    };
    let sup = match sup {
        Ok(s) => s,
        Err(e) => {
            writeln!(report, "RESIDUAL: no supersolution construction applies ({e}) FAIL")?;
            return Ok(EXIT_FAIL);
        }
    };
    let residuals = verify_supersolution(&sup, scenario, t_end)?;
    writeln!(report, "RESIDUAL: construction={}", sup.kind())?;
    residual_line(report, "interior", &residuals.interior, residuals.tolerance)?;
    residual_line(report, "boundary", &residuals.boundary, residuals.tolerance)?;
    residual_line(report, "initial", &residuals.initial, residuals.tolerance)?;
    writeln!(
        report,
        "RESIDUAL: tolerance={:e} c_disc={:e} {}",
        residuals.tolerance,
        residuals.c_disc,
        if residuals.pass { "PASS" } else { "FAIL" }
    )?;
    let mut ok = residuals.pass;
    if residuals.initial.value >= 0.0 {
        let mut run_scenario = scenario.clone();
        if run_scenario.controls.snapshot_every.is_none() {
            run_scenario.controls.snapshot_every = Some(t_end / 10.0);
        }
        let outcome = pde::run(&run_scenario)?;
        let dom = check_domination(&sup, &outcome)?;
        writeln!(
            report,
            "RESIDUAL: domination max_excess={:e} at t={} over {} fields {}",
            dom.max_excess,
            dom.worst_t,
            dom.checked,
            if dom.holds { "PASS" } else { "FAIL" }
        )?;
        outcome_lines(&outcome, report)?;
        ok &= dom.holds;
    } else {
        writeln!(report, "RESIDUAL: domination skipped (initial data above the supersolution)")?;
    }
    Ok(if ok { EXIT_OK } else { EXIT_FAIL })
}

fn verify_transform<W: Write>(scenario: &Scenario, report: &mut W) -> Result<u8> {
    let r = match equivalence_check(scenario, scenario.controls.t_max) {
        Ok(r) => r,
        Err(Error::NotApplicable(msg)) => {
            writeln!(report, "RESIDUAL: transform not applicable ({msg}) FAIL")?;
            return Ok(EXIT_FAIL);
        }
        Err(e) => return Err(e.into()),
    };
    let pass = r.discrepancy <= TRANSFORM_TOLERANCE && r.statuses_agree();
    writeln!(report, "OUTCOME: direct status={} t_cross={:?}", r.direct_status.label(), r.t_cross_direct)?;
    writeln!(report, "OUTCOME: transformed status={} t_cross={:?}", r.transformed_status.label(), r.t_cross_transformed)?;
    writeln!(
        report,
        "RESIDUAL: transform discrepancy={:e} compared_to_t={} {}",
        r.discrepancy,
        r.t_compared,
        if pass { "PASS" } else { "FAIL" }
    )?;
    Ok(if pass { EXIT_OK } else { EXIT_FAIL })
}

pub const SWEEP_HEADER: &str = "p,q,c_family,c_gamma,k_family,k_gamma,regime_predicted,outcome,t_end,sup_norm_end";

/// Cartesian product of the sweep lists over the base scenario, in the
/// order `p`, `q`, `c`, `k`, `initial_value` (last varies fastest).
pub fn sweep_cells(config: &RunConfig, base: &Scenario) -> Vec<Scenario> {
    let sweep = config.sweep.clone().unwrap_or_default();
    let or_base = |v: &[f64], b: f64| if v.is_empty() { vec![b] } else { v.to_vec() };
    let ps = or_base(&sweep.p, base.p);
    let qs = or_base(&sweep.q, base.q);
    let cs = if sweep.c.is_empty() { vec![base.c.clone()] } else { sweep.c.clone() };
    let ks = if sweep.k.is_empty() { vec![base.k.clone()] } else { sweep.k.clone() };
    let values: Vec<Option<f64>> =
        if sweep.initial_value.is_empty() { vec![None] } else { sweep.initial_value.iter().map(|v| Some(*v)).collect() };
    let mut cells = Vec::new();
    for &p in &ps {
        for &q in &qs {
            for c in &cs {
                for k in &ks {
                    for v in &values {
                        let mut s = Scenario { p, q, c: c.clone(), k: k.clone(), ..base.clone() };
                        if let Some(v) = v {
                            s.initial = with_level(&base.initial, *v);
                        }
                        cells.push(s);
                    }
                }
            }
        }
    }
    cells
}

/// The initial datum rescaled so that its maximum is `level`.
fn with_level(initial: &InitialSpec, level: f64) -> InitialSpec {
    match initial.family {
        InitialFamily::Tabulated if initial.sup() > 0.0 => initial.scaled(level / initial.sup()),
        _ => InitialSpec { value: level, ..initial.clone() },
    }
}

fn family_name(spec: &CoefficientSpec) -> String {
    serde_json::to_value(spec.family).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
}

/// Classification and run of one sweep cell.
pub fn sweep_cell(scenario: &Scenario) -> Result<(Option<Regime>, SimulationOutcome)> {
    let regime = classify_regime_with(scenario.p, scenario.q, &scenario.c, &scenario.k, &ClassifyOptions::default())
        .ok()
        .map(|v| v.regime);
    let outcome = pde::run(scenario)?;
    Ok((regime, outcome))
}

/// One `sweep.csv` line (no trailing newline).
pub fn sweep_line(scenario: &Scenario, regime: Option<Regime>, outcome: &SimulationOutcome) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        num(scenario.p),
        num(scenario.q),
        family_name(&scenario.c),
        num(scenario.c.gamma),
        family_name(&scenario.k),
        num(scenario.k.gamma),
        regime.map_or("error".to_string(), |r| r.to_string()),
        outcome.status.label(),
        num(outcome.t_end),
        num(outcome.sup_norm_end)
    )
}

fn sweep<W: Write>(config: &RunConfig, base: &Scenario, dir: &Path, report: &mut W) -> Result<u8> {
    let cells = sweep_cells(config, base);
    for cell in &cells {
        cell.validate()?;
    }
    let results: Vec<Result<(Option<Regime>, SimulationOutcome)>> = cells
        .par_iter()
        .enumerate()
        .map(|(i, cell)| {
            let (regime, outcome) = sweep_cell(cell)?;
            write_outputs(cell, &outcome, &dir.join(format!("cell_{i:04}")))?;
            Ok((regime, outcome))
        })
        .collect();
    fs::create_dir_all(dir)?;
    let mut csv = BufWriter::new(File::create(dir.join("sweep.csv")).context("creating sweep.csv")?);
    writeln!(csv, "{SWEEP_HEADER}")?;
    for (i, (cell, result)) in cells.iter().zip(results).enumerate() {
        let (regime, outcome) = result?;
        let line = sweep_line(cell, regime, &outcome);
        writeln!(csv, "{line}")?;
        writeln!(report, "OUTCOME: cell={i} {line}")?;
    }
    csv.flush()?;
    Ok(EXIT_OK)
}

fn oracle<W: Write>(config: &RunConfig, report: &mut W) -> Result<u8> {
    let o = config.oracle.as_ref().ok_or_else(|| Error::Config("the oracle command needs an `oracle` section".into()))?;
    let problem = OdeProblem { a: o.a, y_a: o.y_a, yp_a: o.yp_a, q: o.q, b: o.b.clone() };
    let outcome = integrate_ode(&problem, o.r_max, &OdeControls::default())?;
    match outcome.status {
        OdeStatus::BlowUp { r_star } => writeln!(
            report,
            "OUTCOME: BlowUp r_star={r_star} refinement_stability={:e} steps={}",
            outcome.refinement_stability.unwrap_or(f64::NAN),
            outcome.steps
        )?,
        OdeStatus::GlobalUpTo { r_max } => writeln!(
            report,
            "OUTCOME: GlobalUpTo r_max={r_max} steps={} (evidence only: the equality case stayed finite)",
            outcome.steps
        )?,
    }
    let crit = check_blowup_criterion(&o.b, o.q, o.a, 1e3)?;
    writeln!(report, "VERDICT: divergence = {} ({})", crit.divergence.status, crit.divergence.evidence)?;
    writeln!(report, "VERDICT: alt_bounded = {} ({})", crit.alt_bounded.holds, crit.alt_bounded.evidence)?;
    writeln!(report, "VERDICT: alt_monotone = {} ({})", crit.alt_monotone.holds, crit.alt_monotone.evidence)?;
    writeln!(report, "VERDICT: applies = {}", crit.applies)?;
    Ok(EXIT_OK)
}
