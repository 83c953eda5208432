//! Scenario runs: the coupled time loop, energy monitoring and artifacts.

pub mod config;
pub mod output;
pub mod refine;
pub mod system;

pub use config::{Checks, Outputs, Resolution, ScenarioConfig, ScenarioKind};
pub use refine::{refine_study, RefineRow, RefineTable};
pub use system::{build_scenario, step_system, Solvers, StepDiagnostics, SystemState};

use crate::energy::{energy_report, theorem1_monitor, EnergyReport, Theorem1Result};
use crate::error::Result;
use serde::Serialize;

/// One entry of the per-step log.
#[derive(Debug, Clone, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub e0: f64,
    pub vol_plus: f64,
    pub vol_minus: f64,
    /// Full energy report on reporting steps.
    pub report: Option<EnergyReport>,
    pub diagnostics: Option<StepDiagnostics>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub steps: usize,
    pub t_final: f64,
    pub e0_initial: f64,
    /// max_t |E₀(t) − E₀(0)| / E₀(0) (absolute when E₀(0) = 0).
    pub e0_drift: f64,
    /// max_t |Vol Ω⁺(t) − Vol Ω⁺(0)|.
    pub volume_drift: f64,
    pub max_vacuum_residual: f64,
    pub theorem: Option<Theorem1Result>,
}

pub struct RunResult {
    pub summary: RunSummary,
    pub records: Vec<StepRecord>,
    pub initial: SystemState,
    pub final_state: SystemState,
}

impl RunResult {
    pub fn reports(&self) -> Vec<EnergyReport> {
        self.records.iter().filter_map(|r| r.report.clone()).collect()
    }
}

fn record(
    state: &SystemState,
    solvers: &Solvers,
    full: bool,
    diagnostics: Option<StepDiagnostics>,
) -> Result<StepRecord> {
    let report = if full {
        Some(energy_report(
            &state.plasma,
            Some(&state.vacuum),
            &state.history,
            &solvers.energy,
        )?)
    } else {
        None
    };
    Ok(StepRecord {
        step: state.step,
        t: state.t(),
        e0: state.e0()?,
        vol_plus: state.plasma.map.volume(),
        vol_minus: state.vacuum.map.volume(),
        report,
        diagnostics,
    })
}

/// Build the scenario and advance it to `t_end`, writing artifacts when an
/// output directory is configured.
pub fn run(cfg: &ScenarioConfig) -> Result<RunResult> {
    let (initial, solvers) = build_scenario(cfg)?;
    let n = cfg.n_steps();
    let mut records = vec![record(&initial, &solvers, true, None)?];
    let mut state = initial.clone();
    let mut sink = output::StepSink::open(cfg)?;
    sink.write(&records[0])?;
    for i in 0..n {
        let dt = if i + 1 == n {
            cfg.t_end - state.t()
        } else {
            cfg.dt
        };
        let (next, diag) = step_system(&state, dt, &solvers).map_err(|e| e.at_step(i + 1))?;
        state = next;
        let full = (i + 1) % cfg.checks.report_every == 0 || i + 1 == n;
        let rec = record(&state, &solvers, full, Some(diag)).map_err(|e| e.at_step(i + 1))?;
        sink.write(&rec)?;
        records.push(rec);
    }
    sink.finish()?;
    let e00 = records[0].e0;
    let den = if e00 != 0.0 { e00.abs() } else { 1.0 };
    let e0_drift = records.iter().fold(0.0f64, |m, r| m.max((r.e0 - e00).abs() / den));
    let v0 = records[0].vol_plus;
    let volume_drift = records.iter().fold(0.0f64, |m, r| m.max((r.vol_plus - v0).abs()));
    let max_vacuum_residual = records
        .iter()
        .filter_map(|r| r.diagnostics.as_ref())
        .fold(0.0f64, |m, d| m.max(d.vacuum_residual));
    let reports: Vec<EnergyReport> = records.iter().filter_map(|r| r.report.clone()).collect();
    let theorem = theorem1_monitor(&reports, cfg.t_end).ok();
    let summary = RunSummary {
        scenario: cfg.scenario.name().to_string(),
        steps: n,
        t_final: state.t(),
        e0_initial: e00,
        e0_drift,
        volume_drift,
        max_vacuum_residual,
        theorem,
    };
    output::write_final(cfg, &state, &summary)?;
    Ok(RunResult {
        summary,
        records,
        initial,
        final_state: state,
    })
}
