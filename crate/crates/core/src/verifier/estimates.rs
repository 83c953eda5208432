//! Fitted constants of the inequality-type estimates.
//!
//! Each function returns the smallest constant that makes the inequality
//! hold on the given discrete data; stability under refinement is judged by
//! the suite.

use crate::energy::derivative_stack;
use crate::error::{Error, Result};
use crate::geometry::{compute_geometry, cutoff_cometric, ClosedCurve, InterfaceGeometry};
use crate::plasma::EllipticSolver;
use crate::spectral::{Frame, Grid};
use crate::vacuum::{solve_harmonic_field, HarmonicSpec};

/// ∫ Σ_c |∂^r f_c|² over the frame.
fn sq_norm(frame: &Frame, stacks: &[Vec<Vec<Vec<f64>>>], r: usize) -> f64 {
    let n = frame.n_nodes();
    let dens: Vec<f64> = (0..n)
        .map(|k| stacks.iter().map(|s| s[r].iter().map(|c| c[k] * c[k]).sum::<f64>()).sum())
        .collect();
    frame.integrate(&dens)
}

fn ring_geometry(frame: &Frame, i: usize, fixed: bool) -> Result<InterfaceGeometry> {
    compute_geometry(&ClosedCurve::new(frame.ring(i), fixed)?)
}

/// ∮ density over ring `i` with arc-length weights.
fn ring_integral(frame: &Frame, geom: &InterfaceGeometry, i: usize, density: impl Fn(usize) -> f64) -> f64 {
    let nt = frame.grid.n_theta();
    (0..nt).map(|j| geom.arc_weights[j] * density(i * nt + j)).sum()
}

/// Harmonic tangential field on a vacuum annulus with unit-scaled
/// circulation 2π, and K = max(|θ| + 1/ι₀) over Γ and W.
pub struct VacuumSample {
    pub frame: Frame,
    pub field: [Vec<f64>; 2],
    pub k: f64,
    gamma: InterfaceGeometry,
    wall: InterfaceGeometry,
}

impl VacuumSample {
    pub fn new(frame: Frame) -> Result<Self> {
        let last = match frame.grid.as_ref() {
            Grid::Annulus(g) => g.n_rings() - 1,
            Grid::Disk(_) => return Err(Error::Shape("vacuum sample needs an annulus".into())),
        };
        let solver = EllipticSolver::for_frame(&frame);
        let h = solve_harmonic_field(&frame, HarmonicSpec::Circulation(std::f64::consts::TAU), &solver)?;
        let gamma = ring_geometry(&frame, 0, false)?;
        let wall = ring_geometry(&frame, last, true)?;
        let kk = |g: &InterfaceGeometry| g.max_abs_theta() + 1.0 / g.iota0;
        Ok(Self {
            k: kk(&gamma).max(kk(&wall)),
            field: h.field,
            frame,
            gamma,
            wall,
        })
    }

    fn last_ring(&self) -> usize {
        self.frame.grid.n_rings() - 1
    }

    fn stacks(&self, r: usize) -> Vec<Vec<Vec<Vec<f64>>>> {
        self.field.iter().map(|c| derivative_stack(&self.frame, c, r)).collect()
    }

    /// ‖∇^{r+1}ϖ‖ / (K‖∇^rϖ‖) over Ω⁻.
    pub fn derivative_ratio(&self, r: usize) -> f64 {
        let st = self.stacks(r + 1);
        (sq_norm(&self.frame, &st, r + 1) / sq_norm(&self.frame, &st, r)).sqrt() / self.k
    }

    /// ‖ϖ‖_{L^p(Γ∪W)} / (‖∇ϖ‖_{L^p(Ω⁻)} + ‖ϖ‖_{L^p(Ω⁻)}) for p = 1 or 2.
    pub fn trace_constant(&self, p: u32) -> f64 {
        let st = self.stacks(1);
        let n = self.frame.n_nodes();
        let pw = |v: f64| if p == 1 { v.sqrt() } else { v };
        let val: Vec<f64> = (0..n).map(|k| pw(st[0][0][0][k].powi(2) + st[1][0][0][k].powi(2))).collect();
        let grad: Vec<f64> = (0..n)
            .map(|k| pw(st.iter().map(|s| s[1].iter().map(|c| c[k] * c[k]).sum::<f64>()).sum()))
            .collect();
        let root = |v: f64| if p == 1 { v } else { v.sqrt() };
        let bdry = ring_integral(&self.frame, &self.gamma, 0, |k| val[k])
            + ring_integral(&self.frame, &self.wall, self.last_ring(), |k| val[k]);
        root(bdry) / (root(self.frame.integrate(&grad)) + root(self.frame.integrate(&val)))
    }
}

/// max over nodes of |∇w|² / (tangential term + |div w|² + |curl w|²) for
/// w = ∂^r f, with the tangential projection given by the cut-off cometric
/// δ − η²N⊗N of the interface ring; nodes with a denominator below
/// 1e-12 of its maximum are skipped.
pub fn divcurl_constant(frame: &Frame, f: &[Vec<f64>; 2], r: usize, d0_ratio: f64) -> Result<f64> {
    let curve = ClosedCurve::new(frame.ring(0), false)?;
    let geom = compute_geometry(&curve)?;
    let pts = super::fields::points(frame);
    let q = cutoff_cometric(&curve, &geom, &pts, d0_ratio * geom.iota0)?;
    let st: Vec<_> = f.iter().map(|c| derivative_stack(frame, c, r + 1)).collect();
    let ra = 1usize << r;
    let n = frame.n_nodes();
    let mut num = vec![0.0; n];
    let mut den = vec![0.0; n];
    let mut comps = vec![0.0; 2 * ra];
    for k in 0..n {
        let mut tang = 0.0;
        let mut full = 0.0;
        for s in &st {
            for (c, v) in comps.iter_mut().enumerate() {
                *v = s[r + 1][c][k];
            }
            tang += q.contract(k, r + 1, &comps, &comps);
            full += comps.iter().map(|v| v * v).sum::<f64>();
        }
        // ∂_c w_{Aa} = st[a][r+1][c·2^r + A]
        let mut div2 = 0.0;
        let mut curl2 = 0.0;
        for a in 0..ra {
            let div = st[0][r + 1][a][k] + st[1][r + 1][ra + a][k];
            let curl = st[1][r + 1][a][k] - st[0][r + 1][ra + a][k];
            div2 += div * div;
            curl2 += 2.0 * curl * curl;
        }
        num[k] = full;
        den[k] = tang + div2 + curl2;
    }
    let dmax = den.iter().fold(0.0f64, |m, v| m.max(*v));
    if !(dmax > 0.0) {
        return Err(Error::Invariant("div-curl denominator vanishes everywhere".into()));
    }
    Ok((0..n)
        .filter(|&k| den[k] > 1e-12 * dmax)
        .fold(0.0f64, |m, k| m.max(num[k] / den[k])))
}

/// Fitted C in ‖∇^{r−1}q‖_{L²(Γ)} + ‖∇^r q‖_{L²(Ω)} ≤ δ‖Π∇^r q‖_{L²(Γ)}
/// + C Σ_{s ≤ r−2} ‖∇^sΔq‖_{L²(Ω)} for q with Δq = f and q = 0 on Γ.
pub fn elliptic_constant(frame: &Frame, f: &[f64], r: usize, delta: f64) -> Result<f64> {
    if !(2..=3).contains(&r) {
        return Err(Error::Config(format!("elliptic estimate implemented for r = 2, 3, got {r}")));
    }
    let n = frame.n_nodes();
    let solver = EllipticSolver::for_frame(frame);
    let (q, _) = solver.solve(frame, f, &vec![0.0; n], None)?;
    let st = [derivative_stack(frame, &q, r)];
    let geom = ring_geometry(frame, 0, false)?;
    let nt = frame.grid.n_theta();
    let lhs_gamma = ring_integral(frame, &geom, 0, |k| st[0][r - 1].iter().map(|c| c[k] * c[k]).sum())
        .sqrt();
    let lhs_omega = sq_norm(frame, &st, r).sqrt();
    // Π∇^r q has the single tangential component ∇^r q(τ, …, τ) in 2D
    let proj: Vec<f64> = (0..nt)
        .map(|j| {
            let tau = geom.tangent[j];
            (0..1usize << r)
                .map(|c| {
                    let w: f64 = (0..r).map(|s| tau[(c >> (r - 1 - s)) & 1]).product();
                    w * st[0][r][c][j]
                })
                .sum::<f64>()
        })
        .collect();
    let pi = (0..nt).map(|j| geom.arc_weights[j] * proj[j] * proj[j]).sum::<f64>().sqrt();
    let lap = frame.laplacian(&q);
    let lap_st = [derivative_stack(frame, &lap, r - 2)];
    let rhs: f64 = (0..=r - 2).map(|s| sq_norm(frame, &lap_st, s).sqrt()).sum();
    if !(rhs > 0.0) {
        return Err(Error::Invariant("elliptic estimate with vanishing Laplacian".into()));
    }
    Ok(((lhs_gamma + lhs_omega - delta * pi) / rhs).max(0.0))
}
