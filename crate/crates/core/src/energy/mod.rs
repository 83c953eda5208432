//! Energies E₀…E₃ and the quantities tracked by the a priori bounds.
//!
//! E₀ is evaluated covariantly on the labels.  The higher energies use the
//! Eulerian form on the current positions: Cartesian derivatives of v, H
//! and the pressure jump, with the cut-off co-metric q^{ij} contracting the
//! derivative indices.

use crate::error::{Error, Result};
use crate::geometry::{
    compute_geometry_with, cutoff_cometric, ClosedCurve, CutoffCometric, InterfaceGeometry,
    DEFAULT_EPS1,
};
use crate::kinematics::{contract_full, pullback_metric};
use crate::plasma::{taylor_sign, PlasmaState, TaylorSign, TaylorStatus};
use crate::spectral::Frame;
use crate::vacuum::VacuumState;
use serde::Serialize;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnergyOptions {
    /// d0 as a fraction of ι₀.
    pub d0_ratio: f64,
    pub eps1: f64,
}

impl Default for EnergyOptions {
    fn default() -> Self {
        Self {
            d0_ratio: 0.5,
            eps1: DEFAULT_EPS1,
        }
    }
}

/// ∫(½|u|² + ½μ|β|²)dμ_g over the plasma and ½μ∫|ϖ|²dμ_g over the vacuum.
pub fn e0(plasma: &PlasmaState, vacuum: Option<&VacuumState>) -> Result<f64> {
    let (p, v) = e0_parts(plasma, vacuum)?;
    Ok(p + v)
}

/// Plasma and vacuum parts of E₀.
pub fn e0_parts(plasma: &PlasmaState, vacuum: Option<&VacuumState>) -> Result<(f64, f64)> {
    let m = pullback_metric(&plasma.map)?;
    let uu = contract_full(&plasma.u, &plasma.u, &m)?;
    let bb = contract_full(&plasma.beta, &plasma.beta, &m)?;
    let dens: Vec<f64> = uu
        .iter()
        .zip(&bb)
        .map(|(a, b)| 0.5 * a + 0.5 * plasma.mu * b)
        .collect();
    let p = m.integrate(&dens);
    let v = match vacuum {
        Some(vs) => {
            let mv = pullback_metric(&vs.map)?;
            let ww = contract_full(&vs.varpi, &vs.varpi, &mv)?;
            0.5 * vs.mu * mv.integrate(&ww)
        }
        None => 0.0,
    };
    Ok((p, v))
}

/// E₀ by plain quadrature of the Cartesian fields on the current positions.
pub fn e0_eulerian(plasma: &PlasmaState, vacuum: Option<&VacuumState>) -> f64 {
    let v = plasma.velocity();
    let h = plasma.magnetic();
    let n = plasma.n_nodes();
    let dens: Vec<f64> = (0..n)
        .map(|k| {
            0.5 * (v[0][k].powi(2) + v[1][k].powi(2))
                + 0.5 * plasma.mu * (h[0][k].powi(2) + h[1][k].powi(2))
        })
        .collect();
    let mut e = plasma.map.current.integrate(&dens);
    if let Some(vs) = vacuum {
        let w = vs.field();
        let d: Vec<f64> = (0..vs.n_nodes())
            .map(|k| 0.5 * vs.mu * (w[0][k].powi(2) + w[1][k].powi(2)))
            .collect();
        e += vs.map.current.integrate(&d);
    }
    e
}

/// `out[r][c]`: component c of ∂^r f, the last derivative in the most
/// significant bit.
pub fn derivative_stack(frame: &Frame, f: &[f64], rmax: usize) -> Vec<Vec<Vec<f64>>> {
    let mut out = vec![vec![f.to_vec()]];
    for _ in 0..rmax {
        let prev = out.last().unwrap();
        let mut next = vec![Vec::new(); prev.len() * 2];
        for (c, comp) in prev.iter().enumerate() {
            let [d0, d1] = frame.grad(comp);
            next[c] = d0;
            next[prev.len() + c] = d1;
        }
        out.push(next);
    }
    out
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct EnergyTerms {
    pub velocity: f64,
    pub magnetic: f64,
    pub curl_velocity: f64,
    pub curl_magnetic: f64,
    /// ∫_Γ |Π∂^r P|² ϑ dS, absent for r = 1 or when ϑ is undefined.
    pub boundary: Option<f64>,
    /// Set when r ≥ 2 and the Taylor sign fails, so the boundary term is
    /// omitted.
    pub weight_undefined: bool,
}

impl EnergyTerms {
    pub fn total(&self) -> f64 {
        self.velocity
            + self.magnetic
            + self.curl_velocity
            + self.curl_magnetic
            + self.boundary.unwrap_or(0.0)
    }
}

/// Derivatives and geometry of one snapshot, shared by E₁…E₃ and the bounds.
#[derive(Debug, Clone)]
pub struct EnergyContext {
    pub t: f64,
    pub mu: f64,
    pub e0_plasma: f64,
    pub e0_vacuum: f64,
    pub curve: ClosedCurve,
    pub geom: InterfaceGeometry,
    pub cometric: CutoffCometric,
    pub taylor: TaylorSign,
    pub weights: Vec<f64>,
    /// `dv[i][r][c]`
    dv: [Vec<Vec<Vec<f64>>>; 2],
    dh: [Vec<Vec<Vec<f64>>>; 2],
    dcurl_v: Vec<Vec<Vec<f64>>>,
    dcurl_h: Vec<Vec<Vec<f64>>>,
    /// ∂^r P on Γ for r = 0…3 (one-sided on each side).
    dp_gamma: Vec<Vec<Vec<f64>>>,
    /// |∇q⁺| + |∇v| + |∇H| at every plasma node.
    m_density: Vec<f64>,
    pub vol_plus: f64,
    pub vol_minus: Option<f64>,
}

fn curl(frame: &Frame, f: &[Vec<f64>; 2]) -> Vec<f64> {
    frame.curl([&f[0], &f[1]])
}

impl EnergyContext {
    pub fn new(
        plasma: &PlasmaState,
        vacuum: Option<&VacuumState>,
        opts: &EnergyOptions,
    ) -> Result<Self> {
        let frame = &plasma.map.current;
        let nt = frame.grid.n_theta();
        let n = frame.n_nodes();
        let curve = ClosedCurve::new(frame.ring(0), false)?;
        let geom = compute_geometry_with(&curve, opts.eps1)?;
        let pts: Vec<[f64; 2]> = (0..n).map(|k| [frame.pos[0][k], frame.pos[1][k]]).collect();
        let cometric = cutoff_cometric(&curve, &geom, &pts, opts.d0_ratio * geom.iota0)?;
        let taylor = taylor_sign(
            frame,
            &plasma.q_plus,
            vacuum.map(|v| (&v.map.current, v.q_minus.as_slice())),
            &geom,
        )?;
        let (e0_plasma, e0_vacuum) = e0_parts(plasma, vacuum)?;
        let v = plasma.velocity();
        let h = plasma.magnetic();
        let dv = [derivative_stack(frame, &v[0], 3), derivative_stack(frame, &v[1], 3)];
        let dh = [derivative_stack(frame, &h[0], 3), derivative_stack(frame, &h[1], 3)];
        let dcurl_v = derivative_stack(frame, &curl(frame, &v), 2);
        let dcurl_h = derivative_stack(frame, &curl(frame, &h), 2);
        let dq = derivative_stack(frame, &plasma.q_plus, 3);
        let dqm = vacuum.map(|vs| derivative_stack(&vs.map.current, &vs.q_minus, 3));
        let dp_gamma: Vec<Vec<Vec<f64>>> = (0..=3)
            .map(|r| {
                (0..1usize << r)
                    .map(|c| {
                        (0..nt)
                            .map(|j| {
                                let m = dqm.as_ref().map_or(0.0, |d| d[r][c][j]);
                                dq[r][c][j] - m
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let m_density = (0..n)
            .map(|k| {
                let g = |d: &[Vec<Vec<Vec<f64>>>; 2]| {
                    (0..2)
                        .map(|i| d[i][1][0][k].powi(2) + d[i][1][1][k].powi(2))
                        .sum::<f64>()
                        .sqrt()
                };
                dq[1][0][k].hypot(dq[1][1][k]) + g(&dv) + g(&dh)
            })
            .collect();
        Ok(Self {
            t: plasma.t(),
            mu: plasma.mu,
            e0_plasma,
            e0_vacuum,
            weights: frame.area_weights(),
            vol_plus: plasma.map.volume(),
            vol_minus: vacuum.map(|v| v.map.volume()),
            curve,
            geom,
            cometric,
            taylor,
            dv,
            dh,
            dcurl_v,
            dcurl_h,
            dp_gamma,
            m_density,
        })
    }

    pub fn e0(&self) -> f64 {
        self.e0_plasma + self.e0_vacuum
    }

    fn q_norm(&self, d: &[Vec<Vec<Vec<f64>>>; 2], r: usize) -> f64 {
        let nc = 1usize << r;
        let mut dens = vec![0.0; self.weights.len()];
        let mut a = vec![0.0; nc];
        for (k, dk) in dens.iter_mut().enumerate() {
            for di in d.iter() {
                for c in 0..nc {
                    a[c] = di[r][c][k];
                }
                *dk += self.cometric.contract(k, r, &a, &a);
            }
        }
        dens.iter().zip(&self.weights).map(|(a, w)| a * w).sum()
    }

    fn plain_norm(&self, d: &[Vec<f64>]) -> f64 {
        (0..self.weights.len())
            .map(|k| self.weights[k] * d.iter().map(|c| c[k] * c[k]).sum::<f64>())
            .sum()
    }

    /// (∂^r P)(τ, …, τ) at every Γ node.
    pub fn tangential_pressure(&self, r: usize) -> Vec<f64> {
        let nc = 1usize << r;
        (0..self.geom.n_nodes())
            .map(|j| {
                let tau = self.geom.tangent[j];
                (0..nc)
                    .map(|c| {
                        let w: f64 = (0..r).map(|s| tau[(c >> s) & 1]).product();
                        w * self.dp_gamma[r][c][j]
                    })
                    .sum()
            })
            .collect()
    }

    /// ∫_Γ |Π∂^r P|² ϑ dS with ϑ = −1/∇_N P, or None where ϑ is undefined.
    pub fn boundary_term(&self, r: usize) -> Option<f64> {
        if self.taylor.status != TaylorStatus::Holds {
            return None;
        }
        let tp = self.tangential_pressure(r);
        Some(
            (0..tp.len())
                .map(|j| self.geom.arc_weights[j] * tp[j] * tp[j] / (-self.taylor.dn_p[j]))
                .sum(),
        )
    }

    pub fn e_r(&self, r: usize) -> Result<EnergyTerms> {
        if !(1..=3).contains(&r) {
            return Err(Error::Config(format!("energy order must be 1, 2 or 3, got {r}")));
        }
        let mut t = EnergyTerms {
            velocity: self.q_norm(&self.dv, r),
            magnetic: self.mu * self.q_norm(&self.dh, r),
            curl_velocity: self.plain_norm(&self.dcurl_v[r - 1]),
            curl_magnetic: self.mu * self.plain_norm(&self.dcurl_h[r - 1]),
            boundary: None,
            weight_undefined: false,
        };
        if r >= 2 {
            t.boundary = self.boundary_term(r);
            t.weight_undefined = t.boundary.is_none();
        }
        Ok(t)
    }

    /// |∇²P| (Frobenius) at every Γ node.
    pub fn hessian_jump(&self) -> Vec<f64> {
        (0..self.geom.n_nodes())
            .map(|j| (0..4).map(|c| self.dp_gamma[2][c][j].powi(2)).sum::<f64>().sqrt())
            .collect()
    }

    pub fn m_bound(&self) -> f64 {
        self.m_density.iter().fold(0.0, |m, v| m.max(*v))
    }
}

/// ∂^r v_i for tests and diagnostics: `[i][r][c]`.
impl EnergyContext {
    pub fn velocity_derivatives(&self) -> &[Vec<Vec<Vec<f64>>>; 2] {
        &self.dv
    }
}

/// Short history of nodal pressures at fixed labels, for D_t P.
#[derive(Debug, Clone, Default)]
pub struct PressureHistory {
    levels: Vec<(f64, Vec<f64>, Option<Vec<f64>>)>,
}

impl PressureHistory {
    pub fn push(&mut self, t: f64, q_plus: &[f64], q_minus: Option<&[f64]>) {
        self.levels.push((t, q_plus.to_vec(), q_minus.map(|q| q.to_vec())));
        if self.levels.len() > 3 {
            self.levels.remove(0);
        }
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Backward difference at the latest level: two-point with two levels,
    /// three-point (second order, non-uniform) with three.
    fn backward(&self, pick: impl Fn(&(f64, Vec<f64>, Option<Vec<f64>>)) -> Option<&Vec<f64>>) -> Result<Option<Vec<f64>>> {
        let l = &self.levels;
        match l.len() {
            0 | 1 => Err(Error::InsufficientHistory(format!(
                "D_t P needs two pressure levels, have {}",
                l.len()
            ))),
            2 => {
                let (a, b) = (pick(&l[0]), pick(&l[1]));
                let h = l[1].0 - l[0].0;
                Ok(match (a, b) {
                    (Some(a), Some(b)) => Some(a.iter().zip(b).map(|(x, y)| (y - x) / h).collect()),
                    _ => None,
                })
            }
            _ => {
                let n = l.len();
                let (t0, t1, t2) = (l[n - 3].0, l[n - 2].0, l[n - 1].0);
                let (h1, h2) = (t1 - t0, t2 - t1);
                // derivative at t2 of the quadratic through the three levels
                let c0 = h2 / (h1 * (h1 + h2));
                let c1 = -(h1 + h2) / (h1 * h2);
                let c2 = (h1 + 2.0 * h2) / (h2 * (h1 + h2));
                Ok(match (pick(&l[n - 3]), pick(&l[n - 2]), pick(&l[n - 1])) {
                    (Some(a), Some(b), Some(c)) => Some(
                        (0..a.len()).map(|k| c0 * a[k] + c1 * b[k] + c2 * c[k]).collect(),
                    ),
                    _ => None,
                })
            }
        }
    }

    /// ∇_N D_t P on Γ from the history and the current frames.
    pub fn normal_dt_pressure(
        &self,
        plasma: &Frame,
        vacuum: Option<&Frame>,
        geom: &InterfaceGeometry,
    ) -> Result<Vec<f64>> {
        let dq = self.backward(|l| Some(&l.1))?.unwrap();
        let dqm = self.backward(|l| l.2.as_ref())?;
        let nt = geom.n_nodes();
        let gp = plasma.grad(&dq);
        let gm = match (dqm, vacuum) {
            (Some(d), Some(f)) => Some(f.grad(&d)),
            _ => None,
        };
        Ok((0..nt)
            .map(|j| {
                let nn = geom.normal[j];
                let (mut a, mut b) = (gp[0][j], gp[1][j]);
                if let Some(g) = &gm {
                    a -= g[0][j];
                    b -= g[1][j];
                }
                nn[0] * a + nn[1] * b
            })
            .collect())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Bounds {
    pub k_cal: f64,
    /// ‖1/∇_N P‖_∞; None when ∇_N P touches zero.
    pub e_cal: Option<f64>,
    pub m: f64,
    /// sup_Γ(|∇²P| + |∇_N D_t P|); None without pressure history.
    pub l: Option<f64>,
    /// sup_Γ |∇²P| alone, always available.
    pub l_hessian: f64,
    pub flags: Vec<String>,
}

pub fn track_bounds(
    ctx: &EnergyContext,
    history: &PressureHistory,
    plasma: &Frame,
    vacuum: Option<&Frame>,
) -> Bounds {
    let mut flags = Vec::new();
    let e_cal = if ctx.taylor.status == TaylorStatus::Degenerate
        || ctx.taylor.dn_p.iter().any(|d| *d == 0.0)
    {
        flags.push("ecal-infinite".to_string());
        None
    } else {
        Some(ctx.taylor.dn_p.iter().fold(0.0f64, |m, d| m.max(1.0 / d.abs())))
    };
    let hess = ctx.hessian_jump();
    let l_hessian = hess.iter().fold(0.0f64, |m, v| m.max(*v));
    let l = match history.normal_dt_pressure(plasma, vacuum, &ctx.geom) {
        Ok(nd) => Some(
            hess.iter()
                .zip(&nd)
                .fold(0.0f64, |m, (a, b)| m.max(a + b.abs())),
        ),
        Err(_) => {
            flags.push("l-insufficient-history".to_string());
            None
        }
    };
    Bounds {
        k_cal: ctx.geom.k_cal,
        e_cal,
        m: ctx.m_bound(),
        l,
        l_hessian,
        flags,
    }
}

/// Everything reported at one time.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyReport {
    pub t: f64,
    #[serde(rename = "E0")]
    pub e0: f64,
    #[serde(rename = "E1")]
    pub e1: f64,
    #[serde(rename = "E2")]
    pub e2: f64,
    #[serde(rename = "E3")]
    pub e3: f64,
    #[serde(rename = "Kcal")]
    pub k_cal: f64,
    #[serde(rename = "Ecal")]
    pub e_cal: Option<f64>,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "L")]
    pub l: Option<f64>,
    pub taylor_margin: f64,
    pub vol_omega: f64,
    pub flags: Vec<String>,
    #[serde(skip)]
    pub terms: [EnergyTerms; 3],
}

impl EnergyReport {
    pub fn energies(&self) -> [f64; 4] {
        [self.e0, self.e1, self.e2, self.e3]
    }

    pub fn sum(&self) -> f64 {
        self.energies().iter().sum()
    }

    pub fn taylor_holds(&self) -> bool {
        self.taylor_margin > 0.0 && !self.flags.iter().any(|f| f == "taylor-degenerate")
    }
}

/// Build the report of one snapshot; the pressure history should already
/// contain this time level.
pub fn energy_report(
    plasma: &PlasmaState,
    vacuum: Option<&VacuumState>,
    history: &PressureHistory,
    opts: &EnergyOptions,
) -> Result<EnergyReport> {
    let ctx = EnergyContext::new(plasma, vacuum, opts)?;
    let b = track_bounds(
        &ctx,
        history,
        &plasma.map.current,
        vacuum.map(|v| &v.map.current),
    );
    let terms = [ctx.e_r(1)?, ctx.e_r(2)?, ctx.e_r(3)?];
    let mut flags = b.flags.clone();
    match ctx.taylor.status {
        TaylorStatus::Holds => {}
        TaylorStatus::Violated => flags.push("taylor-violated".into()),
        TaylorStatus::Degenerate => flags.push("taylor-degenerate".into()),
    }
    if terms.iter().any(|t| t.weight_undefined) {
        flags.push("boundary-term-omitted".into());
    }
    Ok(EnergyReport {
        t: plasma.t(),
        e0: ctx.e0(),
        e1: terms[0].total(),
        e2: terms[1].total(),
        e3: terms[2].total(),
        k_cal: b.k_cal,
        e_cal: b.e_cal,
        m: b.m,
        l: b.l,
        taylor_margin: ctx.taylor.margin,
        vol_omega: ctx.vol_plus,
        flags,
        terms,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Theorem1Result {
    /// Largest t with Σ E_s ≤ 2 Σ E_s(0) on [0, t]; None when the Taylor
    /// sign fails at t = 0.
    pub t_observed: Option<f64>,
    pub horizon: f64,
    pub full_horizon: bool,
    /// ℰ(t) ≤ 2ℰ(0) over [0, T_obs].
    pub ecal_within: bool,
    pub violation: bool,
}

pub fn theorem1_monitor(reports: &[EnergyReport], horizon: f64) -> Result<Theorem1Result> {
    if reports.len() < 2 {
        return Err(Error::InsufficientHistory(format!(
            "theorem monitor needs two reports, got {}",
            reports.len()
        )));
    }
    let r0 = &reports[0];
    if !r0.taylor_holds() {
        return Ok(Theorem1Result {
            t_observed: None,
            horizon,
            full_horizon: false,
            ecal_within: false,
            violation: true,
        });
    }
    let s0 = r0.sum();
    let mut t_obs = r0.t;
    let mut ecal_within = true;
    for r in reports {
        if !(r.sum() <= 2.0 * s0) {
            break;
        }
        t_obs = r.t;
        match (r.e_cal, r0.e_cal) {
            (Some(e), Some(e0)) if e <= 2.0 * e0 => {}
            _ => ecal_within = false,
        }
    }
    Ok(Theorem1Result {
        t_observed: Some(t_obs),
        horizon,
        full_horizon: t_obs >= horizon * (1.0 - 1e-12),
        ecal_within,
        violation: false,
    })
}
