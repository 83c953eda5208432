//! Scenario construction and the coupled plasma–vacuum time step.

use super::config::{ScenarioConfig, ScenarioKind};
use crate::energy::{e0_parts, EnergyOptions, PressureHistory};
use crate::error::{Error, Result};
use crate::geometry::{compute_geometry_with, ClosedCurve};
use crate::kinematics::ExtensionReport;
use crate::plasma::{
    step_plasma, CleaningOptions, CleaningReport, EllipticSolver, PlasmaStage, PlasmaState,
};
use crate::spectral::Frame;
use crate::vacuum::{
    check_vacuum, project_harmonic, shifted_state, vacuum_stage, HarmonicSpec, VacuumMode,
    VacuumOptions, VacuumStage, VacuumState,
};
use serde::Serialize;
use std::sync::Arc;

/// Plasma and vacuum at one time, with the short pressure history used for
/// D_t P.
#[derive(Debug, Clone)]
pub struct SystemState {
    pub plasma: PlasmaState,
    pub vacuum: VacuumState,
    pub step: usize,
    pub history: PressureHistory,
}

impl SystemState {
    pub fn t(&self) -> f64 {
        self.plasma.t()
    }

    pub fn e0(&self) -> Result<f64> {
        let (p, v) = e0_parts(&self.plasma, Some(&self.vacuum))?;
        Ok(p + v)
    }

    fn record_pressure(&mut self) {
        self.history
            .push(self.t(), &self.plasma.q_plus, Some(&self.vacuum.q_minus));
    }
}

/// Solvers and options derived from the configuration.
#[derive(Debug, Clone)]
pub struct Solvers {
    pub plasma: EllipticSolver,
    pub vacuum: EllipticSolver,
    pub vacuum_opts: VacuumOptions,
    pub cleaning: CleaningOptions,
    pub energy: EnergyOptions,
    pub det_tol: f64,
}

impl Solvers {
    pub fn new(cfg: &ScenarioConfig, plasma: &Frame, vacuum: &Frame) -> Self {
        Self {
            plasma: EllipticSolver::for_frame(plasma),
            vacuum: EllipticSolver::for_frame(vacuum),
            vacuum_opts: VacuumOptions {
                mode: cfg.vacuum_mode,
                project: cfg.project,
                det_tol: cfg.checks.det_tol,
                ..VacuumOptions::default()
            },
            cleaning: CleaningOptions {
                velocity: cfg.checks.clean_velocity,
                magnetic: cfg.checks.clean_magnetic,
                filter_order: cfg.checks.filter_order,
            },
            energy: EnergyOptions {
                d0_ratio: cfg.d0_ratio,
                eps1: cfg.eps1,
            },
            det_tol: cfg.checks.det_tol,
        }
    }
}

fn sample(f: &Frame, g: impl Fn(f64, f64) -> [f64; 2]) -> [Vec<f64>; 2] {
    let n = f.n_nodes();
    let mut out = [vec![0.0; n], vec![0.0; n]];
    for k in 0..n {
        let v = g(f.pos[0][k], f.pos[1][k]);
        out[0][k] = v[0];
        out[1][k] = v[1];
    }
    out
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Initial plasma labels and fields (u₀, H₀) for a scenario.
fn plasma_initial(cfg: &ScenarioConfig) -> Result<(Arc<Frame>, [Vec<f64>; 2], [Vec<f64>; 2])> {
    let (nd, nt) = (cfg.plasma.radial, cfg.plasma.angular);
    let zero = |f: &Frame| [vec![0.0; f.n_nodes()], vec![0.0; f.n_nodes()]];
    Ok(match cfg.scenario {
        ScenarioKind::StaticZpinch => {
            let f = Frame::disk(nd, nt, 1.0)?;
            let h = sample(&f, |x, y| [-y, x]);
            let z = zero(&f);
            (Arc::new(f), z, h)
        }
        ScenarioKind::RotatingFlow => {
            let f = Frame::disk(nd, nt, 1.0)?;
            let w = cfg.omega;
            let u = sample(&f, |x, y| [-w * y, w * x]);
            let z = zero(&f);
            (Arc::new(f), u, z)
        }
        ScenarioKind::VacuumAzimuthal | ScenarioKind::VacuumOnly => {
            let f = Frame::disk(nd, nt, 1.0)?;
            let z = zero(&f);
            (Arc::new(f), z.clone(), z)
        }
        ScenarioKind::PerturbedInterface => {
            let (a, m) = (cfg.amplitude, cfg.mode as i32);
            let f = Frame::mapped_disk(nd, nt, |p| {
                // ζ(1 + a Re ζ^m)
                let r = p[0].hypot(p[1]);
                let ph = p[1].atan2(p[0]);
                let s = 1.0 + a * r.powi(m) * (m as f64 * ph).cos();
                [p[0] * s, p[1] * s]
            })
            .map_err(|e| Error::Scenario(format!("perturbed interface: {e}")))?;
            // H₀ = ∇⊥ψ with Δψ = −2 and ψ = 0 on Γ; the Z-pinch when a = 0
            let n = f.n_nodes();
            let solver = EllipticSolver::for_frame(&f);
            let (psi, _) = solver.solve(&f, &vec![-2.0; n], &vec![0.0; n], None)?;
            let g = f.grad(&psi);
            let h = [g[1].clone(), g[0].iter().map(|v| -v).collect()];
            let z = zero(&f);
            (Arc::new(f), z, h)
        }
    })
}

/// Initial coupled state satisfying the constraints, with q⁺ and q⁻ solved.
pub fn build_scenario(cfg: &ScenarioConfig) -> Result<(SystemState, Solvers)> {
    cfg.validate()?;
    let (labels, u0, h0) = plasma_initial(cfg)?;
    let mut plasma = PlasmaState::initial(labels.clone(), u0, h0, cfg.mu);
    let gamma = labels.ring(0);
    let vlab = Arc::new(
        Frame::blended_annulus(cfg.vacuum.radial, &gamma, cfg.wall_radius)
            .map_err(|e| Error::Scenario(format!("vacuum chart: {e}")))?,
    );
    let solvers = Solvers::new(cfg, &labels, &vlab);
    let circ = cfg.circulation();
    let mut vacuum = if circ == 0.0 {
        let mut v = VacuumState::initial(vlab.clone(), HarmonicSpec::Circulation(1.0), cfg.mu, &solvers.vacuum)?;
        let n = v.n_nodes();
        v.varpi = v.map.to_covariant([&vec![0.0; n], &vec![0.0; n]]);
        v.psi = vec![0.0; n];
        v.flux = 0.0;
        v.circulation = 0.0;
        v.q_minus = vec![0.0; n];
        v
    } else {
        VacuumState::initial(vlab.clone(), HarmonicSpec::Circulation(circ), cfg.mu, &solvers.vacuum)?
    };

    // constraint checks on the initial data
    let tol = cfg.checks.build_tol;
    let v = plasma.velocity();
    let h = plasma.magnetic();
    let scale = |f: &[Vec<f64>; 2]| max_abs(&f[0]).max(max_abs(&f[1])).max(1.0);
    let div_u = max_abs(&labels.div([&v[0], &v[1]]));
    let div_h = max_abs(&labels.div([&h[0], &h[1]]));
    if div_u > tol * scale(&v) || div_h > tol * scale(&h) {
        return Err(Error::Scenario(format!(
            "initial fields not divergence-free: |div u| = {div_u:e}, |div H| = {div_h:e}"
        )));
    }
    let geom = compute_geometry_with(&ClosedCurve::new(gamma.clone(), false)?, cfg.eps1)?;
    let hn = geom
        .normal
        .iter()
        .enumerate()
        .fold(0.0f64, |m, (j, n)| m.max((h[0][j] * n[0] + h[1][j] * n[1]).abs()));
    if hn > tol * scale(&h) {
        return Err(Error::Scenario(format!("initial H·N on the interface is {hn:e}")));
    }
    let vr = vacuum.residuals()?;
    if vr.max() > tol * scale(&vacuum.field()) {
        return Err(Error::Scenario(format!("initial vacuum field residuals {vr:?}")));
    }

    // q⁻ from the vacuum stage, then q⁺ from the pressure problem
    let mut stage = PlasmaStage::new(plasma.clone())?;
    let ug = stage.interface_velocity();
    let vst = vacuum_stage(&vacuum, [&ug[0], &ug[1]], &solvers.vacuum_opts, &solvers.vacuum)?;
    vacuum.absorb(&vst);
    stage.rates(&vst.q_minus_trace(), &solvers.plasma)?;
    plasma = stage.state;

    let mut state = SystemState {
        plasma,
        vacuum,
        step: 0,
        history: PressureHistory::default(),
    };
    state.record_pressure();
    Ok((state, solvers))
}

#[derive(Debug, Clone, Serialize)]
pub struct StepDiagnostics {
    pub det_drift_plasma: f64,
    pub det_drift_vacuum: f64,
    pub cleaning: CleaningReport,
    pub projection: f64,
    pub cfl: f64,
    pub pressure_iterations: usize,
    pub pressure_residual: f64,
    pub vacuum_residual: f64,
    pub oblique_l2: f64,
    pub flux: f64,
    pub circulation: f64,
    pub extension: ExtensionReport,
    pub warnings: Vec<String>,
}

/// One coupled RK4 step.  Stage order: plasma stage (positions, metric,
/// derivatives) → extended velocity → vacuum solves (ϖ, Ξ) → q⁻ trace →
/// pressure solve → plasma right sides.
pub fn step_system(state: &SystemState, dt: f64, s: &Solvers) -> Result<(SystemState, StepDiagnostics)> {
    let base = &state.vacuum;
    let mut stages: Vec<VacuumStage> = Vec::with_capacity(4);
    let mut finished: Option<(VacuumState, VacuumStage, f64, f64)> = None;
    let mut call = 0usize;
    let w = [dt / 6.0, dt / 3.0, dt / 3.0, dt / 6.0];
    let q_minus = |ps: &PlasmaStage| -> Result<Vec<f64>> {
        let t = ps.state.t();
        let nt = ps.state.map.labels.grid.n_theta();
        let pos = &ps.state.map.current.pos;
        let g = Some([&pos[0][..nt], &pos[1][..nt]]);
        let ug = ps.interface_velocity();
        let (vs, det, proj) = match call {
            0 => (base.clone(), 0.0, 0.0),
            1 => (shifted_state(base, t, &[(0.5 * dt, &stages[0])], g)?, 0.0, 0.0),
            2 => (shifted_state(base, t, &[(0.5 * dt, &stages[1])], g)?, 0.0, 0.0),
            3 => (shifted_state(base, t, &[(dt, &stages[2])], g)?, 0.0, 0.0),
            4 => {
                let parts: Vec<(f64, &VacuumStage)> = w.iter().cloned().zip(stages.iter()).collect();
                let mut next = shifted_state(base, t, &parts, g)?;
                let det = next.map.det_drift();
                if det > s.vacuum_opts.det_tol {
                    return Err(Error::Incompressibility {
                        drift: det,
                        tol: s.vacuum_opts.det_tol,
                    });
                }
                let mut proj = 0.0;
                if s.vacuum_opts.mode == VacuumMode::Evolved && s.vacuum_opts.project {
                    let (p, c) = project_harmonic(&next.map.current, &next.field(), &s.vacuum)?;
                    next.varpi = next.map.to_covariant([&p[0], &p[1]]);
                    proj = c;
                }
                (next, det, proj)
            }
            _ => return Err(Error::Sequencing("more than five stage evaluations in one step".into())),
        };
        let st = vacuum_stage(&vs, [&ug[0], &ug[1]], &s.vacuum_opts, &s.vacuum)?;
        let qm = st.q_minus_trace();
        if call == 4 {
            let mut vs = vs;
            vs.absorb(&st);
            finished = Some((vs, st, det, proj));
        } else {
            stages.push(st);
        }
        call += 1;
        Ok(qm)
    };
    let (plasma, rep) = step_plasma(&state.plasma, dt, &s.plasma, s.cleaning, s.det_tol, q_minus)?;
    let (vacuum, fin, det_v, projection) = finished
        .ok_or_else(|| Error::Sequencing("vacuum was not evaluated at the end of the step".into()))?;
    check_vacuum(&fin.residuals)?;
    let diag = StepDiagnostics {
        det_drift_plasma: rep.det_drift,
        det_drift_vacuum: det_v,
        cleaning: rep.cleaning,
        projection,
        cfl: rep.cfl,
        pressure_iterations: rep.pressure.iter().map(|p| p.iterations).max().unwrap_or(0),
        pressure_residual: rep.pressure.iter().fold(0.0f64, |m, p| m.max(p.residual)),
        vacuum_residual: fin.residuals.max(),
        oblique_l2: fin.electric.oblique_l2,
        flux: fin.flux,
        circulation: fin.circulation,
        extension: fin.extension,
        warnings: rep.warnings,
    };
    let mut next = SystemState {
        plasma,
        vacuum,
        step: state.step + 1,
        history: state.history.clone(),
    };
    next.record_pressure();
    Ok((next, diag))
}
