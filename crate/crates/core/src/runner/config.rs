//! Scenario configuration, read from TOML or JSON.

use crate::error::{Error, Result};
use crate::vacuum::VacuumMode;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    StaticZpinch,
    VacuumAzimuthal,
    RotatingFlow,
    PerturbedInterface,
    VacuumOnly,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::StaticZpinch => "static-zpinch",
            ScenarioKind::VacuumAzimuthal => "vacuum-azimuthal",
            ScenarioKind::RotatingFlow => "rotating-flow",
            ScenarioKind::PerturbedInterface => "perturbed-interface",
            ScenarioKind::VacuumOnly => "vacuum-only",
        }
    }
}

/// Radial × angular node counts.  For the plasma disk `radial` counts nodes
/// across the diameter; for the vacuum annulus it counts rings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub radial: usize,
    pub angular: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Checks {
    /// Full energy report every this many steps (E₀ and volume every step).
    pub report_every: usize,
    pub clean_velocity: bool,
    pub clean_magnetic: bool,
    /// Order of the angular filter applied after each step; 0 disables it.
    pub filter_order: u32,
    /// Tolerance on max |det F − 1| before the run aborts.
    pub det_tol: f64,
    /// Tolerance on the constraints of the initial data.
    pub build_tol: f64,
}

impl Default for Checks {
    fn default() -> Self {
        Self {
            report_every: 1,
            clean_velocity: true,
            clean_magnetic: true,
            filter_order: crate::plasma::DEFAULT_FILTER_ORDER,
            det_tol: 1e-6,
            build_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    /// Directory for every artifact; nothing is written when absent.
    pub dir: Option<PathBuf>,
    pub energy_csv: Option<String>,
    pub step_json: Option<String>,
    /// Write the final-state grid dumps.
    pub dump_final: bool,
}

impl Outputs {
    pub fn energy_csv(&self) -> String {
        self.energy_csv.clone().unwrap_or_else(|| "energy.csv".into())
    }

    pub fn step_json(&self) -> String {
        self.step_json.clone().unwrap_or_else(|| "steps.jsonl".into())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub plasma: Resolution,
    pub vacuum: Resolution,
    pub wall_radius: f64,
    pub dt: f64,
    pub t_end: f64,
    pub mu: f64,
    /// Circulation of the vacuum field around Γ; scenario default when absent.
    pub circulation: Option<f64>,
    pub amplitude: f64,
    pub mode: u32,
    /// Angular velocity of the rotating-flow scenario.
    pub omega: f64,
    pub d0_ratio: f64,
    pub eps1: f64,
    pub vacuum_mode: VacuumMode,
    /// Project ϖ on the harmonic line after each step (evolved mode).
    pub project: bool,
    pub checks: Checks,
    pub output: Outputs,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioKind::StaticZpinch,
            plasma: Resolution {
                radial: 32,
                angular: 32,
            },
            vacuum: Resolution {
                radial: 24,
                angular: 32,
            },
            wall_radius: 2.0,
            dt: 1e-3,
            t_end: 0.1,
            mu: 1.0,
            circulation: None,
            amplitude: 1e-3,
            mode: 2,
            omega: 0.5,
            d0_ratio: 0.5,
            eps1: crate::geometry::DEFAULT_EPS1,
            vacuum_mode: VacuumMode::ConstrainedFlux,
            project: false,
            checks: Checks::default(),
            output: Outputs::default(),
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn for_scenario(kind: ScenarioKind) -> Self {
        Self {
            scenario: kind,
            ..Self::default()
        }
    }

    pub fn circulation(&self) -> f64 {
        self.circulation.unwrap_or(match self.scenario {
            ScenarioKind::VacuumAzimuthal | ScenarioKind::VacuumOnly => 2.0 * std::f64::consts::PI,
            _ => 0.0,
        })
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil().max(0.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end >= self.dt) {
            return bad(format!("t_end = {} is shorter than dt = {}", self.t_end, self.dt));
        }
        for (name, r) in [("plasma", self.plasma), ("vacuum", self.vacuum)] {
            if r.radial < 16 || r.angular < 16 {
                return bad(format!("{name} resolution {}x{} is below 16", r.radial, r.angular));
            }
        }
        if self.plasma.angular != self.vacuum.angular {
            return bad("plasma and vacuum need the same angular resolution".into());
        }
        if !(self.mu > 0.0) {
            return bad(format!("mu must be positive, got {}", self.mu));
        }
        if !(self.wall_radius > 1.0 + self.amplitude.abs()) {
            return bad(format!("wall radius {} does not enclose the plasma", self.wall_radius));
        }
        // |a|(m + 1) < 1 keeps ζ(1 + a Re ζ^m) injective with positive Jacobian
        if self.scenario == ScenarioKind::PerturbedInterface
            && !(self.amplitude.abs() * (self.mode as f64 + 1.0) < 0.5)
        {
            return bad(format!(
                "amplitude {} is too large for mode {}",
                self.amplitude, self.mode
            ));
        }
        if !(self.d0_ratio > 0.0 && self.d0_ratio < 1.0) {
            return bad(format!("d0 ratio must lie in (0, 1), got {}", self.d0_ratio));
        }
        if !(self.eps1 > 0.0 && self.eps1 < 2.0) {
            return bad(format!("eps1 must lie in (0, 2), got {}", self.eps1));
        }
        if self.checks.report_every == 0 {
            return bad("report_every must be at least 1".into());
        }
        Ok(())
    }

    pub fn from_str_ext(text: &str, ext: &str) -> Result<Self> {
        let cfg: Self = match ext {
            "toml" => toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?,
            "json" => serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?,
            other => {
                return Err(Error::Config(format!(
                    "config extension must be .toml or .json, got '{other}'"
                )))
            }
        };
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        let text = std::fs::read_to_string(path)?;
        let cfg = Self::from_str_ext(&text, ext)?;
        cfg.validate()?;
        Ok(cfg)
    }
}
