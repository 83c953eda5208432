//! Vacuum magnetic field on the annulus between Γ and W, the electric
//! potential Ξ, and the transport of ϖ by the virtual particles.

use crate::error::{Error, Result};
use crate::kinematics::{
    covariant_derivative, extend_velocity_on_map, material_derivative_field, perp_gradient,
    pullback_metric, raise_index, ExtensionReport, FlowMap, MetricState,
};
use crate::plasma::EllipticSolver;
use crate::spectral::{Frame, Grid};
use crate::tensor::{Domain, TensorField};
use serde::Serialize;
use std::sync::Arc;

/// Which coordinate of the one-dimensional harmonic space is prescribed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum HarmonicSpec {
    /// ∮ ϖ·dl counterclockwise around the annulus.
    Circulation(f64),
    /// ψ_W − ψ_Γ for ϖ = ∇⊥ψ.
    Flux(f64),
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct VacuumResiduals {
    pub div: f64,
    pub curl: f64,
    /// max |ϖ·N| on Γ.
    pub normal_gamma: f64,
    /// max |ϖ·N| on W.
    pub normal_wall: f64,
}

impl VacuumResiduals {
    pub fn max(&self) -> f64 {
        self.div.max(self.curl).max(self.normal_gamma).max(self.normal_wall)
    }
}

/// ψ with Δψ = 0, ψ = 0 on Γ and ψ = 1 on W, and ∫|∇ψ|².
#[derive(Debug, Clone)]
pub struct UnitHarmonic {
    pub psi: Vec<f64>,
    pub dirichlet_energy: f64,
    /// ∇⊥ψ in Cartesian components.
    pub field: [Vec<f64>; 2],
}

#[derive(Debug, Clone)]
pub struct HarmonicField {
    pub psi: Vec<f64>,
    /// Cartesian components.
    pub field: [Vec<f64>; 2],
    pub flux: f64,
    pub circulation: f64,
    pub residuals: VacuumResiduals,
}

fn annulus_rings(frame: &Frame) -> Result<(usize, usize)> {
    match frame.grid.as_ref() {
        Grid::Annulus(g) => Ok((g.n_rings(), g.n_theta())),
        Grid::Disk(_) => Err(Error::Shape("vacuum solves need an annulus frame".into())),
    }
}

/// Unit normals and |∂X/∂θ| on ring `i`, normals pointing to the right of
/// the counterclockwise tangent (out of Ω⁺ on Γ, out of Ω⁻ on W).
pub fn ring_normals(frame: &Frame, i: usize) -> (Vec<[f64; 2]>, Vec<f64>) {
    let nt = frame.grid.n_theta();
    (i * nt..(i + 1) * nt)
        .map(|k| {
            let t = [frame.jac[0][1][k], frame.jac[1][1][k]];
            let s = t[0].hypot(t[1]);
            ([t[1] / s, -t[0] / s], s)
        })
        .unzip()
}

pub fn vacuum_residuals(frame: &Frame, field: [&[f64]; 2]) -> Result<VacuumResiduals> {
    let (ns, nt) = annulus_rings(frame)?;
    let maxabs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let normal = |i: usize| {
        let (nrm, _) = ring_normals(frame, i);
        (0..nt).fold(0.0f64, |m, j| {
            let k = i * nt + j;
            m.max((field[0][k] * nrm[j][0] + field[1][k] * nrm[j][1]).abs())
        })
    };
    Ok(VacuumResiduals {
        div: maxabs(&frame.div(field)),
        curl: maxabs(&frame.curl(field)),
        normal_gamma: normal(0),
        normal_wall: normal(ns - 1),
    })
}

pub fn unit_harmonic(frame: &Frame, solver: &EllipticSolver) -> Result<UnitHarmonic> {
    let (ns, nt) = annulus_rings(frame)?;
    let n = frame.n_nodes();
    let mut bc = vec![0.0; n];
    for v in &mut bc[(ns - 1) * nt..] {
        *v = 1.0;
    }
    let (psi, _) = solver.solve(frame, &vec![0.0; n], &bc, None)?;
    let [px, py] = frame.grad(&psi);
    let energy: Vec<f64> = (0..n).map(|k| px[k] * px[k] + py[k] * py[k]).collect();
    let dirichlet_energy = frame.integrate(&energy);
    if !(dirichlet_energy > 0.0) {
        return Err(Error::Geometry("vacuum annulus has zero capacity".into()));
    }
    Ok(UnitHarmonic {
        psi,
        dirichlet_energy,
        field: [py, px.iter().map(|v| -v).collect()],
    })
}

/// The harmonic field ∇⊥ψ tangent to Γ and W with the given flux or
/// circulation.
pub fn solve_harmonic_field(
    frame: &Frame,
    spec: HarmonicSpec,
    solver: &EllipticSolver,
) -> Result<HarmonicField> {
    let unit = unit_harmonic(frame, solver)?;
    scale_unit(frame, &unit, spec)
}

fn scale_unit(frame: &Frame, unit: &UnitHarmonic, spec: HarmonicSpec) -> Result<HarmonicField> {
    // ∮ ∇⊥ψ·dl = −∮_W ∂_n ψ ds = −∫|∇ψ|² for the unit solve
    let d = unit.dirichlet_energy;
    let alpha = match spec {
        HarmonicSpec::Flux(f) => f,
        HarmonicSpec::Circulation(c) => -c / d,
    };
    let field = [
        unit.field[0].iter().map(|v| alpha * v).collect::<Vec<_>>(),
        unit.field[1].iter().map(|v| alpha * v).collect::<Vec<_>>(),
    ];
    let residuals = vacuum_residuals(frame, [&field[0], &field[1]])?;
    Ok(HarmonicField {
        psi: unit.psi.iter().map(|v| alpha * v).collect(),
        field,
        flux: alpha,
        circulation: -alpha * d,
        residuals,
    })
}

/// ∮ ϖ·dl counterclockwise along ring `ring` of the vacuum frame.
pub fn circulation(field: [&[f64]; 2], frame: &Frame, ring: usize) -> Result<f64> {
    let (ns, nt) = annulus_rings(frame)?;
    if ring >= ns {
        return Err(Error::Geometry(format!(
            "loop ring {ring} outside the vacuum grid of {ns} rings"
        )));
    }
    let h = 2.0 * std::f64::consts::PI / nt as f64;
    Ok((ring * nt..(ring + 1) * nt)
        .map(|k| h * (field[0][k] * frame.jac[0][1][k] + field[1][k] * frame.jac[1][1][k]))
        .sum())
}

/// Boundary data of the electric potential on Γ.
#[derive(Debug, Clone)]
pub struct MixedProblemData {
    /// u_N (ϖ₁N₂ − ϖ₂N₁).
    pub f1: Vec<f64>,
    /// (ϖ·∇u)·N − (u·∇ϖ)·N, one-sided from Ω⁻.
    pub f2: Vec<f64>,
    pub normal: Vec<[f64; 2]>,
    /// |∂X/∂θ| on Γ.
    pub speed: Vec<f64>,
}

/// Traces of f1 and f2 from the Cartesian vacuum velocity and field.
pub fn mixed_problem_data(
    frame: &Frame,
    velocity: [&[f64]; 2],
    varpi: [&[f64]; 2],
) -> Result<MixedProblemData> {
    let (_, nt) = annulus_rings(frame)?;
    let n = frame.n_nodes();
    for c in velocity.iter().chain(varpi.iter()) {
        if c.len() != n {
            return Err(Error::Shape(format!(
                "vacuum field has {} nodes, frame {n}",
                c.len()
            )));
        }
    }
    let (normal, speed) = ring_normals(frame, 0);
    // dv[i][j] = ∂_j v_i on the full grid; only ring 0 is used
    let dv = [frame.grad(velocity[0]), frame.grad(velocity[1])];
    let dw = [frame.grad(varpi[0]), frame.grad(varpi[1])];
    let mut f1 = vec![0.0; nt];
    let mut f2 = vec![0.0; nt];
    for j in 0..nt {
        let nn = normal[j];
        let u = [velocity[0][j], velocity[1][j]];
        let w = [varpi[0][j], varpi[1][j]];
        let un = u[0] * nn[0] + u[1] * nn[1];
        f1[j] = un * (w[0] * nn[1] - w[1] * nn[0]);
        let mut s = 0.0;
        for i in 0..2 {
            let wdu = w[0] * dv[i][0][j] + w[1] * dv[i][1][j];
            let udw = u[0] * dw[i][0][j] + u[1] * dw[i][1][j];
            s += (wdu - udw) * nn[i];
        }
        f2[j] = s;
    }
    Ok(MixedProblemData {
        f1,
        f2,
        normal,
        speed,
    })
}

#[derive(Debug, Clone)]
pub struct ElectricField {
    pub xi: Vec<f64>,
    /// ∇_{N⊥}Ξ − f2 at the Γ nodes, N⊥ = (N₂, −N₁).
    pub oblique: Vec<f64>,
    /// L²(Γ) norm of `oblique`.
    pub oblique_l2: f64,
    /// max |ΔΞ| over interior nodes.
    pub laplace_residual: f64,
    pub iterations: usize,
}

/// ΔΞ = 0 in Ω⁻, Ξ = f1 on Γ, Ξ = 0 on W; the oblique datum is only
/// measured.
pub fn solve_electric_field(
    frame: &Frame,
    data: &MixedProblemData,
    solver: &EllipticSolver,
    guess: Option<Vec<f64>>,
) -> Result<ElectricField> {
    let (ns, nt) = annulus_rings(frame)?;
    let n = frame.n_nodes();
    if data.f1.len() != nt {
        return Err(Error::Shape("f1 does not match the interface ring".into()));
    }
    let (xi, iterations) = if data.f1.iter().all(|v| *v == 0.0) {
        (vec![0.0; n], 0)
    } else {
        let mut bc = vec![0.0; n];
        bc[..nt].copy_from_slice(&data.f1);
        let (xi, st) = solver.solve(frame, &vec![0.0; n], &bc, guess)?;
        (xi, st.iterations)
    };
    let lap = frame.laplacian(&xi);
    let laplace_residual = (nt..(ns - 1) * nt).fold(0.0f64, |m, k| m.max(lap[k].abs()));
    let [gx, gy] = frame.grad(&xi);
    let oblique: Vec<f64> = (0..nt)
        .map(|j| {
            let nn = data.normal[j];
            nn[1] * gx[j] - nn[0] * gy[j] - data.f2[j]
        })
        .collect();
    let h = 2.0 * std::f64::consts::PI / nt as f64;
    let oblique_l2 = (0..nt)
        .map(|j| h * data.speed[j] * oblique[j] * oblique[j])
        .sum::<f64>()
        .sqrt();
    Ok(ElectricField {
        xi,
        oblique,
        oblique_l2,
        laplace_residual,
        iterations,
    })
}

/// D_t ϖ_a = −∇⊥_aΞ + u^b∇_bϖ_a + ϖ_b∇_a u^b on the vacuum labels.
pub fn vacuum_rate(
    metric: &MetricState,
    varpi: &TensorField,
    xi: &[f64],
    u: &TensorField,
) -> Result<TensorField> {
    let n = metric.n_nodes();
    let perp = perp_gradient(&TensorField::scalar(Domain::Vacuum, xi.to_vec()), metric)?;
    let dw = covariant_derivative(varpi, metric)?;
    let du = covariant_derivative(u, metric)?;
    let u_up = raise_index(u, metric);
    let w_up = raise_index(varpi, metric);
    let mut out = [vec![0.0; n], vec![0.0; n]];
    for (a, oa) in out.iter_mut().enumerate() {
        for k in 0..n {
            let mut s = -perp.get(a, k);
            for b in 0..2 {
                // ϖ_b ∇_a u^b = ϖ^b ∇_a u_b
                s += u_up[b][k] * dw.get(TensorField::flat(&[b, a]), k)
                    + w_up[b][k] * du.get(TensorField::flat(&[a, b]), k);
            }
            oa[k] = s;
        }
    }
    Ok(TensorField::vector(Domain::Vacuum, out))
}

/// Residual of D_t∇⊥_aΞ = u^b∇_b∇⊥_aΞ + ∇_a u^b∇⊥_bΞ at the middle of
/// three (or the last of two) time levels, max over nodes at least
/// `band` rings away from Γ and W.
///
/// The identity holds when the Eulerian potential is steady; the residual
/// measures ∂_t∇⊥Ξ otherwise.
pub fn evolve_perp_xi_check(
    series: &[(f64, Vec<f64>, MetricState)],
    u: &TensorField,
    band: usize,
) -> Result<f64> {
    if series.len() < 2 {
        return Err(Error::InsufficientHistory(format!(
            "perp-Ξ check needs two time levels, got {}",
            series.len()
        )));
    }
    let perps = series
        .iter()
        .map(|(t, xi, m)| {
            Ok((
                *t,
                perp_gradient(&TensorField::scalar(Domain::Vacuum, xi.clone()), m)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let (_, lhs) = material_derivative_field(&perps)?;
    let mid = if series.len() == 2 { 1 } else { series.len() / 2 };
    let metric = &series[mid].2;
    let w = &perps[mid].1;
    let dw = covariant_derivative(w, metric)?;
    let du = covariant_derivative(u, metric)?;
    let u_up = raise_index(u, metric);
    let w_up = raise_index(w, metric);
    let grid = metric.labels.grid.clone();
    let (ns, nt) = (grid.n_rings(), grid.n_theta());
    let mut res = 0.0f64;
    for i in band..ns.saturating_sub(band) {
        for j in 0..nt {
            let k = i * nt + j;
            for a in 0..2 {
                let mut r = 0.0;
                for b in 0..2 {
                    r += u_up[b][k] * dw.get(TensorField::flat(&[b, a]), k)
                        + w_up[b][k] * du.get(TensorField::flat(&[a, b]), k);
                }
                res = res.max((lhs.get(a, k) - r).abs());
            }
        }
    }
    Ok(res)
}

/// How ϖ is advanced in time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VacuumMode {
    /// Re-solve the harmonic field at every stage, keeping the flux fixed.
    ConstrainedFlux,
    /// Re-solve keeping the circulation fixed.
    ConstrainedCirculation,
    /// Integrate the transport equation for ϖ.
    Evolved,
}

#[derive(Debug, Clone, Copy)]
pub struct VacuumOptions {
    pub mode: VacuumMode,
    /// Project ϖ on the harmonic line after each evolved step.
    pub project: bool,
    pub min_gap: f64,
    pub det_tol: f64,
}

impl Default for VacuumOptions {
    fn default() -> Self {
        Self {
            mode: VacuumMode::ConstrainedFlux,
            project: false,
            min_gap: 1e-3,
            det_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VacuumState {
    pub map: FlowMap,
    /// Covariant field ϖ_a on the vacuum labels.
    pub varpi: TensorField,
    pub xi: Vec<f64>,
    pub psi: Vec<f64>,
    pub flux: f64,
    pub circulation: f64,
    /// μ|ϖ|²/2 at every vacuum node; ring 0 is the trace on Γ.
    pub q_minus: Vec<f64>,
    pub mu: f64,
}

impl VacuumState {
    /// Harmonic field on the identity map of `labels`.
    pub fn initial(
        labels: Arc<Frame>,
        spec: HarmonicSpec,
        mu: f64,
        solver: &EllipticSolver,
    ) -> Result<Self> {
        let h = solve_harmonic_field(&labels, spec, solver)?;
        let map = FlowMap::identity(Domain::Vacuum, labels);
        let q_minus = magnetic_pressure(&h.field, mu);
        Ok(Self {
            varpi: TensorField::vector(Domain::Vacuum, h.field),
            xi: vec![0.0; map.n_nodes()],
            map,
            psi: h.psi,
            flux: h.flux,
            circulation: h.circulation,
            q_minus,
            mu,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.map.n_nodes()
    }

    pub fn t(&self) -> f64 {
        self.map.t
    }

    /// Cartesian field.
    pub fn field(&self) -> [Vec<f64>; 2] {
        self.map.to_cartesian(&self.varpi)
    }

    pub fn q_minus_trace(&self) -> &[f64] {
        &self.q_minus[..self.map.labels.grid.n_theta()]
    }

    pub fn residuals(&self) -> Result<VacuumResiduals> {
        let f = self.field();
        vacuum_residuals(&self.map.current, [&f[0], &f[1]])
    }
}

pub fn magnetic_pressure(field: &[Vec<f64>; 2], mu: f64) -> Vec<f64> {
    field[0]
        .iter()
        .zip(&field[1])
        .map(|(a, b)| 0.5 * mu * (a * a + b * b))
        .collect()
}

/// Everything the vacuum contributes at one Runge–Kutta stage.
#[derive(Debug, Clone)]
pub struct VacuumStage {
    /// Extended velocity, the rate of the vacuum positions (Cartesian).
    pub velocity: [Vec<f64>; 2],
    pub extension: ExtensionReport,
    /// Cartesian field at this stage.
    pub field: [Vec<f64>; 2],
    /// Covariant field at this stage.
    pub varpi: TensorField,
    pub psi: Option<Vec<f64>>,
    pub flux: f64,
    pub circulation: f64,
    pub electric: ElectricField,
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
    pub q_minus: Vec<f64>,
    /// D_t ϖ in evolved mode.
    pub rate: Option<TensorField>,
    pub residuals: VacuumResiduals,
}

impl VacuumStage {
    pub fn q_minus_trace(&self) -> Vec<f64> {
        self.q_minus[..self.f1.len()].to_vec()
    }
}

/// Evaluate the vacuum at `state` (positions and, in evolved mode, ϖ) with
/// the interface velocity `u_gamma` in Cartesian components.
pub fn vacuum_stage(
    state: &VacuumState,
    u_gamma: [&[f64]; 2],
    opts: &VacuumOptions,
    solver: &EllipticSolver,
) -> Result<VacuumStage> {
    let frame = &state.map.current;
    let (ext, extension) = extend_velocity_on_map(u_gamma, &state.map, opts.min_gap)?;
    let n = frame.n_nodes();
    let velocity = [ext.comp(0).to_vec(), ext.comp(1).to_vec()];
    let (field, varpi, psi, flux, circ) = match opts.mode {
        VacuumMode::ConstrainedFlux | VacuumMode::ConstrainedCirculation => {
            let spec = if opts.mode == VacuumMode::ConstrainedFlux {
                HarmonicSpec::Flux(state.flux)
            } else {
                HarmonicSpec::Circulation(state.circulation)
            };
            let h = if spec == HarmonicSpec::Flux(0.0) || spec == HarmonicSpec::Circulation(0.0) {
                HarmonicField {
                    psi: vec![0.0; n],
                    field: [vec![0.0; n], vec![0.0; n]],
                    flux: 0.0,
                    circulation: 0.0,
                    residuals: VacuumResiduals::default(),
                }
            } else {
                solve_harmonic_field(frame, spec, solver)?
            };
            let cov = state.map.to_covariant([&h.field[0], &h.field[1]]);
            (h.field, cov, Some(h.psi), h.flux, h.circulation)
        }
        VacuumMode::Evolved => {
            let f = state.field();
            let last = frame.grid.n_rings() - 1;
            let c = circulation([&f[0], &f[1]], frame, last)?;
            (f, state.varpi.clone(), None, state.flux, c)
        }
    };
    let data = mixed_problem_data(frame, [&velocity[0], &velocity[1]], [&field[0], &field[1]])?;
    let guess = if state.xi.iter().any(|v| *v != 0.0) {
        Some(state.xi.clone())
    } else {
        None
    };
    let electric = solve_electric_field(frame, &data, solver, guess)?;
    let rate = if opts.mode == VacuumMode::Evolved {
        let metric = pullback_metric(&state.map)?;
        let u = state.map.to_covariant([&velocity[0], &velocity[1]]);
        Some(vacuum_rate(&metric, &varpi, &electric.xi, &u)?)
    } else {
        None
    };
    let residuals = vacuum_residuals(frame, [&field[0], &field[1]])?;
    let q_minus = magnetic_pressure(&field, state.mu);
    Ok(VacuumStage {
        velocity,
        extension,
        field,
        varpi,
        psi,
        flux,
        circulation: circ,
        electric,
        f1: data.f1,
        f2: data.f2,
        q_minus,
        rate,
        residuals,
    })
}

impl VacuumState {
    /// Copy the derived quantities of a stage evaluated at this state.
    pub fn absorb(&mut self, st: &VacuumStage) {
        self.varpi = st.varpi.clone();
        self.xi = st.electric.xi.clone();
        if let Some(p) = &st.psi {
            self.psi = p.clone();
        }
        self.flux = st.flux;
        self.circulation = st.circulation;
        self.q_minus = st.q_minus.clone();
    }
}

/// L²-orthogonal projection of the Cartesian field on the harmonic line.
/// Returns the projected field and max |correction|.
pub fn project_harmonic(
    frame: &Frame,
    field: &[Vec<f64>; 2],
    solver: &EllipticSolver,
) -> Result<([Vec<f64>; 2], f64)> {
    let unit = unit_harmonic(frame, solver)?;
    let n = frame.n_nodes();
    let dot = |a: &[Vec<f64>; 2], b: &[Vec<f64>; 2]| {
        frame.integrate(&(0..n).map(|k| a[0][k] * b[0][k] + a[1][k] * b[1][k]).collect::<Vec<_>>())
    };
    let alpha = dot(field, &unit.field) / dot(&unit.field, &unit.field);
    let proj = [
        unit.field[0].iter().map(|v| alpha * v).collect::<Vec<_>>(),
        unit.field[1].iter().map(|v| alpha * v).collect::<Vec<_>>(),
    ];
    let corr = (0..n).fold(0.0f64, |m, k| {
        m.max((proj[0][k] - field[0][k]).hypot(proj[1][k] - field[1][k]))
    });
    Ok((proj, corr))
}

#[derive(Debug, Clone, Serialize)]
pub struct VacuumStepReport {
    pub residuals: VacuumResiduals,
    pub projection: f64,
    pub extension: ExtensionReport,
    pub det_drift: f64,
    pub oblique_l2: f64,
}

/// Stage-combination helper shared with the coupled integrator: the vacuum
/// state at `base` shifted by Σ wᵢ·(positions rate, ϖ rate).
pub fn shifted_state(
    base: &VacuumState,
    t: f64,
    parts: &[(f64, &VacuumStage)],
    gamma_positions: Option<[&[f64]; 2]>,
) -> Result<VacuumState> {
    let mut pos = base.map.current.pos.clone();
    let mut varpi = base.varpi.clone();
    for (w, st) in parts {
        for c in 0..2 {
            for (x, v) in pos[c].iter_mut().zip(&st.velocity[c]) {
                *x += w * v;
            }
        }
        if let Some(r) = &st.rate {
            varpi = varpi.axpy(*w, r);
        }
    }
    if let Some(g) = gamma_positions {
        let nt = g[0].len();
        pos[0][..nt].copy_from_slice(g[0]);
        pos[1][..nt].copy_from_slice(g[1]);
    }
    let map = base.map.with_positions(pos, t)?;
    Ok(VacuumState {
        map,
        varpi,
        xi: base.xi.clone(),
        psi: base.psi.clone(),
        flux: base.flux,
        circulation: base.circulation,
        q_minus: base.q_minus.clone(),
        mu: base.mu,
    })
}

/// One RK4 step of the vacuum alone, driven by a prescribed interface
/// velocity `u_gamma(t, frame)`.
pub fn evolve_vacuum<U>(
    state: &VacuumState,
    dt: f64,
    opts: &VacuumOptions,
    solver: &EllipticSolver,
    mut u_gamma: U,
) -> Result<(VacuumState, VacuumStepReport)>
where
    U: FnMut(f64, &Frame) -> Result<[Vec<f64>; 2]>,
{
    if !(dt > 0.0) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    let t0 = state.t();
    let mut eval = |s: &VacuumState| -> Result<VacuumStage> {
        let ug = u_gamma(s.t(), &s.map.current)?;
        vacuum_stage(s, [&ug[0], &ug[1]], opts, solver)
    };
    let k1 = eval(state)?;
    let s2 = shifted_state(state, t0 + 0.5 * dt, &[(0.5 * dt, &k1)], None)?;
    let k2 = eval(&s2)?;
    let s3 = shifted_state(state, t0 + 0.5 * dt, &[(0.5 * dt, &k2)], None)?;
    let k3 = eval(&s3)?;
    let s4 = shifted_state(state, t0 + dt, &[(dt, &k3)], None)?;
    let k4 = eval(&s4)?;
    let w = [dt / 6.0, dt / 3.0, dt / 3.0, dt / 6.0];
    let mut next = shifted_state(
        state,
        t0 + dt,
        &[(w[0], &k1), (w[1], &k2), (w[2], &k3), (w[3], &k4)],
        None,
    )?;
    let det_drift = next.map.det_drift();
    if det_drift > opts.det_tol {
        return Err(Error::Incompressibility {
            drift: det_drift,
            tol: opts.det_tol,
        });
    }
    let mut projection = 0.0;
    if opts.mode == VacuumMode::Evolved && opts.project {
        let (p, c) = project_harmonic(&next.map.current, &next.field(), solver)?;
        next.varpi = next.map.to_covariant([&p[0], &p[1]]);
        projection = c;
    }
    let fin = eval(&next)?;
    next.absorb(&fin);
    check_vacuum(&fin.residuals)?;
    Ok((
        next,
        VacuumStepReport {
            residuals: fin.residuals,
            projection,
            extension: fin.extension,
            det_drift,
            oblique_l2: fin.electric.oblique_l2,
        },
    ))
}

/// Residual level above which the vacuum constraints are considered lost.
pub const VACUUM_BLOWUP: f64 = 1e-2;

pub fn check_vacuum(r: &VacuumResiduals) -> Result<()> {
    if !(r.max() <= VACUUM_BLOWUP) {
        return Err(Error::VacuumConsistency(format!(
            "constraint residuals {r:?} exceed {VACUUM_BLOWUP:e}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests;
