//! Plasma evolution in Lagrangian coordinates and the total-pressure problem.

use crate::error::{Error, Result};
use crate::geometry::InterfaceGeometry;
use crate::kinematics::{covariant_derivative, pullback_metric, raise_index, FlowMap, MetricState};
use crate::spectral::{fourier, Frame, GmresOptions, GmresStats, ModeSolver};
use crate::tensor::{Domain, TensorField};
use serde::Serialize;
use std::sync::Arc;

/// Velocity, magnetic field and total pressure on the plasma labels.
#[derive(Debug, Clone)]
pub struct PlasmaState {
    pub map: FlowMap,
    /// Covariant velocity u_a.
    pub u: TensorField,
    /// Covariant magnetic field β_a.
    pub beta: TensorField,
    /// Total pressure q⁺ at every node.
    pub q_plus: Vec<f64>,
    pub mu: f64,
    /// Initial field H₀ in label components; β = g·H₀ for all time.
    pub h0: [Vec<f64>; 2],
    /// Time at which `q_plus` was last solved for.
    pub pressure_time: Option<f64>,
}

impl PlasmaState {
    /// State at t = 0 on the identity map from Cartesian v₀ and H₀.
    pub fn initial(labels: Arc<Frame>, v0: [Vec<f64>; 2], h0: [Vec<f64>; 2], mu: f64) -> Self {
        let map = FlowMap::identity(Domain::Plasma, labels);
        let n = map.n_nodes();
        Self {
            u: TensorField::vector(Domain::Plasma, v0),
            beta: TensorField::vector(Domain::Plasma, h0.clone()),
            map,
            q_plus: vec![0.0; n],
            mu,
            h0,
            pressure_time: None,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.map.n_nodes()
    }

    pub fn t(&self) -> f64 {
        self.map.t
    }

    pub fn pressure_is_fresh(&self) -> bool {
        self.pressure_time == Some(self.map.t)
    }

    /// Cartesian velocity v.
    pub fn velocity(&self) -> [Vec<f64>; 2] {
        self.map.to_cartesian(&self.u)
    }

    /// Cartesian magnetic field H.
    pub fn magnetic(&self) -> [Vec<f64>; 2] {
        self.map.to_cartesian(&self.beta)
    }

    /// Piola form g_ab H₀^b of the magnetic field on the current map.
    pub fn piola_beta(&self) -> TensorField {
        let n = self.n_nodes();
        let mut out = [vec![0.0; n], vec![0.0; n]];
        for k in 0..n {
            // H = F H₀, β_a = F^i_a H^i
            let hx = self.map.f[0][0][k] * self.h0[0][k] + self.map.f[0][1][k] * self.h0[1][k];
            let hy = self.map.f[1][0][k] * self.h0[0][k] + self.map.f[1][1][k] * self.h0[1][k];
            for (a, oa) in out.iter_mut().enumerate() {
                oa[k] = self.map.f[0][a][k] * hx + self.map.f[1][a][k] * hy;
            }
        }
        TensorField::vector(Domain::Plasma, out)
    }
}

/// Right side and Dirichlet data of the total-pressure problem.
#[derive(Debug, Clone)]
pub struct PressureProblem {
    pub rhs: Vec<f64>,
    /// q⁻ at the interface nodes (ring 0).
    pub dirichlet: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PressureStats {
    pub iterations: usize,
    pub gmres_residual: f64,
    /// max |Δq − rhs| over interior nodes.
    pub residual: f64,
}

/// Reusable preconditioned Dirichlet solver.
#[derive(Debug, Clone)]
pub struct EllipticSolver {
    pub pre: Arc<ModeSolver>,
    pub opts: GmresOptions,
}

impl EllipticSolver {
    pub fn for_frame(frame: &Frame) -> Self {
        Self {
            pre: Arc::new(frame.preconditioner()),
            opts: GmresOptions::default(),
        }
    }

    /// Solve Δq = rhs with q = bc on every boundary ring.
    pub fn solve(
        &self,
        frame: &Frame,
        rhs: &[f64],
        bc: &[f64],
        guess: Option<Vec<f64>>,
    ) -> Result<(Vec<f64>, GmresStats)> {
        frame.solve_dirichlet(rhs, bc, &self.pre, guess, self.opts)
    }
}

/// Covariant first derivatives reused across the right-hand sides.
#[derive(Debug, Clone)]
pub struct PlasmaDerivatives {
    pub du: TensorField,
    pub dbeta: TensorField,
    pub u_up: [Vec<f64>; 2],
    pub beta_up: [Vec<f64>; 2],
}

impl PlasmaDerivatives {
    pub fn compute(state: &PlasmaState, metric: &MetricState) -> Result<Self> {
        Ok(Self {
            du: covariant_derivative(&state.u, metric)?,
            dbeta: covariant_derivative(&state.beta, metric)?,
            u_up: raise_index(&state.u, metric),
            beta_up: raise_index(&state.beta, metric),
        })
    }
}

/// tr((A g⁻¹)²) with A_ac = ∇_a w_c, i.e. ∇_a w^b ∇_b w^a.
fn grad_square_trace(dw: &TensorField, metric: &MetricState, k: usize) -> f64 {
    let mut m = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            m[a][b] = dw.get(TensorField::flat(&[a, 0]), k) * metric.g_inv[0][b][k]
                + dw.get(TensorField::flat(&[a, 1]), k) * metric.g_inv[1][b][k];
        }
    }
    m[0][0] * m[0][0] + 2.0 * m[0][1] * m[1][0] + m[1][1] * m[1][1]
}

/// −∇_a u^b ∇_b u^a + μ ∇_a β^b ∇_b β^a.
pub fn pressure_rhs(d: &PlasmaDerivatives, metric: &MetricState, mu: f64) -> Vec<f64> {
    (0..metric.n_nodes())
        .map(|k| -grad_square_trace(&d.du, metric, k) + mu * grad_square_trace(&d.dbeta, metric, k))
        .collect()
}

pub fn pressure_problem(
    state: &PlasmaState,
    metric: &MetricState,
    d: &PlasmaDerivatives,
    q_minus: &[f64],
) -> Result<PressureProblem> {
    let nt = state.map.labels.grid.n_theta();
    if q_minus.len() != nt {
        return Err(Error::Shape(format!(
            "pressure boundary data has {} values, interface has {nt}",
            q_minus.len()
        )));
    }
    if q_minus.iter().any(|v| !v.is_finite()) {
        return Err(Error::Shape("non-finite pressure boundary data".into()));
    }
    Ok(PressureProblem {
        rhs: pressure_rhs(d, metric, state.mu),
        dirichlet: q_minus.to_vec(),
    })
}

/// Solve Δq⁺ = rhs in Ω⁺ with q⁺ = q⁻ on Γ, on the current positions.
pub fn pressure_solve(
    problem: &PressureProblem,
    frame: &Frame,
    solver: &EllipticSolver,
    guess: Option<Vec<f64>>,
) -> Result<(Vec<f64>, PressureStats)> {
    if problem.rhs.iter().any(|v| !v.is_finite()) {
        return Err(Error::Shape("non-finite pressure right side".into()));
    }
    let n = frame.n_nodes();
    let nt = frame.grid.n_theta();
    let mut bc = vec![0.0; n];
    bc[..nt].copy_from_slice(&problem.dirichlet);
    let (q, st) = solver.solve(frame, &problem.rhs, &bc, guess)?;
    let lap = frame.laplacian(&q);
    let residual = (nt..n).fold(0.0f64, |m, k| m.max((lap[k] - problem.rhs[k]).abs()));
    Ok((
        q,
        PressureStats {
            iterations: st.iterations,
            gmres_residual: st.residual,
            residual,
        },
    ))
}

/// u^c ∇_a u_c + μ β^d ∇_d β_a − ∇_a q⁺.
pub fn momentum_rhs(state: &PlasmaState, metric: &MetricState) -> Result<TensorField> {
    let d = PlasmaDerivatives::compute(state, metric)?;
    momentum_rhs_with(state, metric, &d)
}

pub fn momentum_rhs_with(
    state: &PlasmaState,
    metric: &MetricState,
    d: &PlasmaDerivatives,
) -> Result<TensorField> {
    if !state.pressure_is_fresh() {
        return Err(Error::Sequencing(format!(
            "pressure last solved at {:?}, state is at t = {}",
            state.pressure_time,
            state.t()
        )));
    }
    let n = state.n_nodes();
    let dq = metric.labels.grad(&state.q_plus);
    let mut out = [vec![0.0; n], vec![0.0; n]];
    for (a, oa) in out.iter_mut().enumerate() {
        for k in 0..n {
            let mut s = -dq[a][k];
            for c in 0..2 {
                s += d.u_up[c][k] * d.du.get(TensorField::flat(&[a, c]), k);
                s += state.mu * d.beta_up[c][k] * d.dbeta.get(TensorField::flat(&[c, a]), k);
            }
            oa[k] = s;
        }
    }
    Ok(TensorField::vector(Domain::Plasma, out))
}

/// β^d ∇_d u_a + β^c ∇_a u_c.
pub fn induction_rhs(state: &PlasmaState, metric: &MetricState) -> Result<TensorField> {
    let d = PlasmaDerivatives::compute(state, metric)?;
    Ok(induction_rhs_with(state, &d))
}

pub fn induction_rhs_with(state: &PlasmaState, d: &PlasmaDerivatives) -> TensorField {
    let n = state.n_nodes();
    let mut out = [vec![0.0; n], vec![0.0; n]];
    for (a, oa) in out.iter_mut().enumerate() {
        for k in 0..n {
            let mut s = 0.0;
            for c in 0..2 {
                s += d.beta_up[c][k]
                    * (d.du.get(TensorField::flat(&[c, a]), k)
                        + d.du.get(TensorField::flat(&[a, c]), k));
            }
            oa[k] = s;
        }
    }
    TensorField::vector(Domain::Plasma, out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaylorStatus {
    Holds,
    Violated,
    Degenerate,
}

#[derive(Debug, Clone, Serialize)]
pub struct TaylorSign {
    /// ∇_N P at every interface node.
    pub dn_p: Vec<f64>,
    /// ε = −max ∇_N P.
    pub margin: f64,
    pub status: TaylorStatus,
}

/// Below this |∇_N P| the sign is called degenerate.
pub const TAYLOR_DEGENERATE: f64 = 1e-10;

/// Normal derivative of the pressure jump from one-sided spectral derivatives.
pub fn taylor_sign(
    plasma: &Frame,
    q_plus: &[f64],
    vacuum: Option<(&Frame, &[f64])>,
    geom: &InterfaceGeometry,
) -> Result<TaylorSign> {
    let nt = plasma.grid.n_theta();
    if geom.n_nodes() != nt {
        return Err(Error::Shape(format!(
            "interface geometry has {} nodes, plasma ring has {nt}",
            geom.n_nodes()
        )));
    }
    let gp = plasma.grad(q_plus);
    let gm = match vacuum {
        Some((f, qm)) => {
            if f.grid.n_theta() != nt {
                return Err(Error::Shape("vacuum and plasma rings differ".into()));
            }
            let g = f.grad(qm);
            Some([g[0][..nt].to_vec(), g[1][..nt].to_vec()])
        }
        None => None,
    };
    let dn_p: Vec<f64> = (0..nt)
        .map(|j| {
            let n = geom.normal[j];
            let (mut a, mut b) = (gp[0][j], gp[1][j]);
            if let Some(g) = &gm {
                a -= g[0][j];
                b -= g[1][j];
            }
            n[0] * a + n[1] * b
        })
        .collect();
    let max = dn_p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let amax = dn_p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let margin = -max;
    let status = if amax < TAYLOR_DEGENERATE {
        TaylorStatus::Degenerate
    } else if margin > 0.0 {
        TaylorStatus::Holds
    } else {
        TaylorStatus::Violated
    };
    Ok(TaylorSign {
        dn_p,
        margin,
        status,
    })
}

/// Quantities at one Runge–Kutta stage.
#[derive(Debug, Clone)]
pub struct PlasmaStage {
    pub state: PlasmaState,
    pub metric: MetricState,
    pub derivs: PlasmaDerivatives,
    /// Cartesian velocity, the rate of the positions.
    pub velocity: [Vec<f64>; 2],
}

#[derive(Debug, Clone)]
pub struct StageRates {
    pub du: TensorField,
    pub dbeta: TensorField,
    pub pressure: PressureStats,
}

impl PlasmaStage {
    pub fn new(state: PlasmaState) -> Result<Self> {
        let metric = pullback_metric(&state.map)?;
        let derivs = PlasmaDerivatives::compute(&state, &metric)?;
        let velocity = state.velocity();
        Ok(Self {
            state,
            metric,
            derivs,
            velocity,
        })
    }

    /// Interface velocity (ring 0) in Cartesian components.
    pub fn interface_velocity(&self) -> [Vec<f64>; 2] {
        let nt = self.state.map.labels.grid.n_theta();
        [self.velocity[0][..nt].to_vec(), self.velocity[1][..nt].to_vec()]
    }

    /// Solve for q⁺ (unless already fresh) and evaluate the right sides.
    pub fn rates(&mut self, q_minus: &[f64], solver: &EllipticSolver) -> Result<StageRates> {
        let mut stats = PressureStats {
            iterations: 0,
            gmres_residual: 0.0,
            residual: 0.0,
        };
        if !self.state.pressure_is_fresh() {
            let prob = pressure_problem(&self.state, &self.metric, &self.derivs, q_minus)?;
            let guess = Some(self.state.q_plus.clone());
            let (q, st) = pressure_solve(&prob, &self.state.map.current, solver, guess)?;
            self.state.q_plus = q;
            self.state.pressure_time = Some(self.state.t());
            stats = st;
        }
        Ok(StageRates {
            du: momentum_rhs_with(&self.state, &self.metric, &self.derivs)?,
            dbeta: induction_rhs_with(&self.state, &self.derivs),
            pressure: stats,
        })
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CleaningReport {
    /// max |∇φ| removed from the velocity.
    pub velocity: f64,
    /// max |β − g·H₀| before the reset.
    pub magnetic: f64,
    /// Largest change of a position or velocity component by the filter.
    pub filter: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct CleaningOptions {
    pub velocity: bool,
    pub magnetic: bool,
    /// Order of the angular exponential filter on positions and velocity;
    /// 0 disables it.
    pub filter_order: u32,
}

pub const DEFAULT_FILTER_ORDER: u32 = 8;

impl Default for CleaningOptions {
    fn default() -> Self {
        Self {
            velocity: true,
            magnetic: true,
            filter_order: DEFAULT_FILTER_ORDER,
        }
    }
}

/// Apply the angular filter ring by ring.
fn filter_rings(f: &[f64], nt: usize, order: u32) -> Vec<f64> {
    f.chunks(nt).flat_map(|ring| fourier::exp_filter(ring, order)).collect()
}

/// Project u onto divergence-free fields (φ = 0 on Γ) and reset β to its
/// Piola form.
pub fn clean(
    state: &mut PlasmaState,
    solver: &EllipticSolver,
    opts: CleaningOptions,
) -> Result<CleaningReport> {
    let mut rep = CleaningReport {
        velocity: 0.0,
        magnetic: 0.0,
        filter: 0.0,
    };
    if opts.filter_order > 0 {
        let nt = state.map.labels.grid.n_theta();
        let v = state.velocity();
        let pos = &state.map.current.pos;
        let fp = [filter_rings(&pos[0], nt, opts.filter_order), filter_rings(&pos[1], nt, opts.filter_order)];
        let fv = [filter_rings(&v[0], nt, opts.filter_order), filter_rings(&v[1], nt, opts.filter_order)];
        for c in 0..2 {
            for k in 0..pos[c].len() {
                rep.filter = rep.filter.max((fp[c][k] - pos[c][k]).abs()).max((fv[c][k] - v[c][k]).abs());
            }
        }
        state.map = state.map.with_positions(fp, state.t())?;
        state.u = state.map.to_covariant([&fv[0], &fv[1]]);
    }
    if opts.velocity {
        let frame = &state.map.current;
        let v = state.velocity();
        let div = frame.div([&v[0], &v[1]]);
        let scale = v.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
        let dmax = div.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if dmax > 0.0 {
            let n = frame.n_nodes();
            let mut s = solver.clone();
            s.opts.atol = 1e-15 * scale.max(1.0);
            let (phi, _) = s.solve(frame, &div, &vec![0.0; n], Some(vec![0.0; n]))?;
            let g = frame.grad(&phi);
            let vc = [
                v[0].iter().zip(&g[0]).map(|(a, b)| a - b).collect::<Vec<_>>(),
                v[1].iter().zip(&g[1]).map(|(a, b)| a - b).collect::<Vec<_>>(),
            ];
            rep.velocity = (0..n).fold(0.0f64, |m, k| m.max(g[0][k].hypot(g[1][k])));
            state.u = state.map.to_covariant([&vc[0], &vc[1]]);
        }
    }
    if opts.magnetic {
        let p = state.piola_beta();
        rep.magnetic = p.max_diff(&state.beta);
        state.beta = p;
    }
    Ok(rep)
}

#[derive(Debug, Clone, Serialize)]
pub struct PlasmaStepReport {
    pub pressure: Vec<PressureStats>,
    pub cleaning: CleaningReport,
    pub det_drift: f64,
    pub cfl: f64,
    pub warnings: Vec<String>,
}

/// CFL number above which a warning is raised.
pub const CFL_WARN: f64 = 0.5;

/// Estimated CFL number max|v| dt / h on the current positions.
pub fn cfl_number(state: &PlasmaState, dt: f64) -> f64 {
    let v = state.velocity();
    let vmax = (0..state.n_nodes()).fold(0.0f64, |m, k| m.max(v[0][k].hypot(v[1][k])));
    let h = state.map.labels.grid.min_spacing() * state.map.current.equivalent_radius();
    vmax * dt / h
}

fn combine(base: &TensorField, parts: &[(f64, &TensorField)]) -> TensorField {
    let mut out = base.clone();
    for (s, t) in parts {
        out = out.axpy(*s, t);
    }
    out
}

fn shift_positions(map: &FlowMap, parts: &[(f64, &[Vec<f64>; 2])]) -> [Vec<f64>; 2] {
    let mut p = map.current.pos.clone();
    for (s, v) in parts {
        for c in 0..2 {
            for (x, dv) in p[c].iter_mut().zip(&v[c]) {
                *x += s * dv;
            }
        }
    }
    p
}

/// One RK4 step of the plasma alone, with q⁻ supplied per stage from the
/// current stage.
pub fn step_plasma<Q>(
    state: &PlasmaState,
    dt: f64,
    solver: &EllipticSolver,
    cleaning: CleaningOptions,
    det_tol: f64,
    mut q_minus: Q,
) -> Result<(PlasmaState, PlasmaStepReport)>
where
    Q: FnMut(&PlasmaStage) -> Result<Vec<f64>>,
{
    if !(dt > 0.0) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    let mut warnings = Vec::new();
    let cfl = cfl_number(state, dt);
    if cfl > CFL_WARN {
        warnings.push(format!("CFL number {cfl:.3} exceeds {CFL_WARN}"));
    }
    let t0 = state.t();
    let mut pressure = Vec::with_capacity(5);

    let mut eval = |s: PlasmaState| -> Result<(PlasmaStage, StageRates)> {
        let mut st = PlasmaStage::new(s)?;
        let qm = q_minus(&st)?;
        let r = st.rates(&qm, solver)?;
        Ok((st, r))
    };
    let at = |base: &PlasmaState,
              t: f64,
              pos: [Vec<f64>; 2],
              u: TensorField,
              beta: TensorField,
              q_guess: &[f64]|
     -> Result<PlasmaState> {
        let map = base.map.with_positions(pos, t)?;
        Ok(PlasmaState {
            map,
            u,
            beta,
            q_plus: q_guess.to_vec(),
            mu: base.mu,
            h0: base.h0.clone(),
            pressure_time: None,
        })
    };

    let (s1, k1) = eval(state.clone())?;
    pressure.push(k1.pressure);
    let p2 = shift_positions(&state.map, &[(0.5 * dt, &s1.velocity)]);
    let st2 = at(
        state,
        t0 + 0.5 * dt,
        p2,
        state.u.axpy(0.5 * dt, &k1.du),
        state.beta.axpy(0.5 * dt, &k1.dbeta),
        &s1.state.q_plus,
    )?;
    let (s2, k2) = eval(st2)?;
    pressure.push(k2.pressure);
    let p3 = shift_positions(&state.map, &[(0.5 * dt, &s2.velocity)]);
    let st3 = at(
        state,
        t0 + 0.5 * dt,
        p3,
        state.u.axpy(0.5 * dt, &k2.du),
        state.beta.axpy(0.5 * dt, &k2.dbeta),
        &s2.state.q_plus,
    )?;
    let (s3, k3) = eval(st3)?;
    pressure.push(k3.pressure);
    let p4 = shift_positions(&state.map, &[(dt, &s3.velocity)]);
    let st4 = at(
        state,
        t0 + dt,
        p4,
        state.u.axpy(dt, &k3.du),
        state.beta.axpy(dt, &k3.dbeta),
        &s3.state.q_plus,
    )?;
    let (s4, k4) = eval(st4)?;
    pressure.push(k4.pressure);

    let w = [dt / 6.0, dt / 3.0, dt / 3.0, dt / 6.0];
    let pos = shift_positions(
        &state.map,
        &[
            (w[0], &s1.velocity),
            (w[1], &s2.velocity),
            (w[2], &s3.velocity),
            (w[3], &s4.velocity),
        ],
    );
    let u = combine(&state.u, &[(w[0], &k1.du), (w[1], &k2.du), (w[2], &k3.du), (w[3], &k4.du)]);
    let beta = combine(
        &state.beta,
        &[(w[0], &k1.dbeta), (w[1], &k2.dbeta), (w[2], &k3.dbeta), (w[3], &k4.dbeta)],
    );
    let mut next = at(state, t0 + dt, pos, u, beta, &s4.state.q_plus)?;
    let det_drift = next.map.det_drift();
    if det_drift > det_tol {
        return Err(Error::Incompressibility {
            drift: det_drift,
            tol: det_tol,
        });
    }
    let cleaning = clean(&mut next, solver, cleaning)?;
    let (s_end, k_end) = eval(next)?;
    pressure.push(k_end.pressure);
    Ok((
        s_end.state,
        PlasmaStepReport {
            pressure,
            cleaning,
            det_drift,
            cfl,
            warnings,
        },
    ))
}

#[cfg(test)]
mod tests;
