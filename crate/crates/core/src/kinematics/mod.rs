//! Lagrangian flow maps, the pulled-back metric and covariant calculus.

mod covariant;
mod extension;

pub use covariant::{
    christoffel_pushforward, contract_full, covariant_derivative, divergence, pull_back,
    push_forward, raise_index, symmetric_gradient,
};
pub use extension::{cutoff, extend_velocity_on_map, extend_velocity_to_vacuum, ExtensionReport};

use crate::error::{Error, Result};
use crate::spectral::Frame;
use crate::tensor::{Domain, TensorField};
use std::sync::Arc;

/// Positions x(t, y) of the particles labelled by y on a reference grid.
#[derive(Debug, Clone)]
pub struct FlowMap {
    pub domain: Domain,
    /// Label chart y(ξ), fixed in time.
    pub labels: Arc<Frame>,
    /// Current positions x(ξ).
    pub current: Frame,
    pub t: f64,
    /// `f[i][a]` = ∂x^i/∂y^a
    pub f: [[Vec<f64>; 2]; 2],
    /// `finv[a][i]` = ∂y^a/∂x^i
    pub finv: [[Vec<f64>; 2]; 2],
    pub det_f: Vec<f64>,
}

impl FlowMap {
    /// The identity map f₀(y) = y.
    pub fn identity(domain: Domain, labels: Arc<Frame>) -> Self {
        let n = labels.n_nodes();
        let one = vec![1.0; n];
        let zero = vec![0.0; n];
        Self {
            domain,
            current: (*labels).clone(),
            labels,
            t: 0.0,
            f: [[one.clone(), zero.clone()], [zero.clone(), one.clone()]],
            finv: [[one.clone(), zero.clone()], [zero, one.clone()]],
            det_f: one,
        }
    }

    pub fn new(domain: Domain, labels: Arc<Frame>, pos: [Vec<f64>; 2], t: f64) -> Result<Self> {
        let current = Frame::new(labels.grid.clone(), pos)?;
        let n = labels.n_nodes();
        let mut f = [[vec![0.0; n], vec![0.0; n]], [vec![0.0; n], vec![0.0; n]]];
        let mut finv = f.clone();
        let mut det_f = vec![0.0; n];
        for k in 0..n {
            let mut m = [[0.0; 2]; 2];
            for (i, row) in m.iter_mut().enumerate() {
                for (a, v) in row.iter_mut().enumerate() {
                    *v = current.jac[i][0][k] * labels.inv[0][a][k]
                        + current.jac[i][1][k] * labels.inv[1][a][k];
                }
            }
            let d = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            if !(d > 0.0) {
                return Err(Error::MapDegeneracy(format!(
                    "orientation lost at node {k}: det = {d:e}"
                )));
            }
            for i in 0..2 {
                for a in 0..2 {
                    f[i][a][k] = m[i][a];
                }
            }
            finv[0][0][k] = m[1][1] / d;
            finv[0][1][k] = -m[0][1] / d;
            finv[1][0][k] = -m[1][0] / d;
            finv[1][1][k] = m[0][0] / d;
            det_f[k] = d;
        }
        Ok(Self {
            domain,
            labels,
            current,
            t,
            f,
            finv,
            det_f,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.det_f.len()
    }

    /// Same labels, new positions.
    pub fn with_positions(&self, pos: [Vec<f64>; 2], t: f64) -> Result<Self> {
        Self::new(self.domain, self.labels.clone(), pos, t)
    }

    /// max |det(∂x/∂y) − 1|.
    pub fn det_drift(&self) -> f64 {
        self.det_f.iter().fold(0.0, |m, d| m.max((d - 1.0).abs()))
    }

    /// Covariant components u_a = v_i ∂x^i/∂y^a of a Cartesian field.
    pub fn to_covariant(&self, v: [&[f64]; 2]) -> TensorField {
        let n = self.n_nodes();
        let mut u = [vec![0.0; n], vec![0.0; n]];
        for k in 0..n {
            for (a, ua) in u.iter_mut().enumerate() {
                ua[k] = v[0][k] * self.f[0][a][k] + v[1][k] * self.f[1][a][k];
            }
        }
        TensorField::vector(self.domain, u)
    }

    /// Cartesian components v_i = u_a ∂y^a/∂x^i.
    pub fn to_cartesian(&self, u: &TensorField) -> [Vec<f64>; 2] {
        let n = self.n_nodes();
        let mut v = [vec![0.0; n], vec![0.0; n]];
        for k in 0..n {
            for (i, vi) in v.iter_mut().enumerate() {
                vi[k] = u.get(0, k) * self.finv[0][i][k] + u.get(1, k) * self.finv[1][i][k];
            }
        }
        v
    }

    /// Volume of the image domain.
    pub fn volume(&self) -> f64 {
        self.current.integrate(&vec![1.0; self.n_nodes()])
    }
}

/// Pulled-back metric with inverse, volume element and Christoffel symbols.
#[derive(Debug, Clone)]
pub struct MetricState {
    pub labels: Arc<Frame>,
    /// `g[a][b]`
    pub g: [[Vec<f64>; 2]; 2],
    pub g_inv: [[Vec<f64>; 2]; 2],
    pub det: Vec<f64>,
    /// `chr[c][a][b]` = Γ^c_ab
    pub chr: [[[Vec<f64>; 2]; 2]; 2],
}

impl MetricState {
    pub fn n_nodes(&self) -> usize {
        self.det.len()
    }

    /// Build from explicit components, computing inverse and Christoffels.
    pub fn from_components(labels: Arc<Frame>, g: [[Vec<f64>; 2]; 2]) -> Result<Self> {
        let n = labels.n_nodes();
        let mut g_inv = [[vec![0.0; n], vec![0.0; n]], [vec![0.0; n], vec![0.0; n]]];
        let mut det = vec![0.0; n];
        for k in 0..n {
            let d = g[0][0][k] * g[1][1][k] - g[0][1][k] * g[1][0][k];
            if !(d.abs() > 1e-300) || !d.is_finite() {
                return Err(Error::MapDegeneracy(format!("singular metric at node {k}")));
            }
            det[k] = d;
            g_inv[0][0][k] = g[1][1][k] / d;
            g_inv[0][1][k] = -g[0][1][k] / d;
            g_inv[1][0][k] = -g[1][0][k] / d;
            g_inv[1][1][k] = g[0][0][k] / d;
        }
        // dg[e][a][b] = ∂_e g_ab
        let mut grads = [[[vec![], vec![]], [vec![], vec![]]], [[vec![], vec![]], [vec![], vec![]]]];
        for a in 0..2 {
            for b in 0..2 {
                let [d0, d1] = labels.grad(&g[a][b]);
                grads[0][a][b] = d0;
                grads[1][a][b] = d1;
            }
        }
        let mut chr = [
            [[vec![0.0; n], vec![0.0; n]], [vec![0.0; n], vec![0.0; n]]],
            [[vec![0.0; n], vec![0.0; n]], [vec![0.0; n], vec![0.0; n]]],
        ];
        for k in 0..n {
            for c in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        let mut s = 0.0;
                        for d in 0..2 {
                            s += g_inv[c][d][k]
                                * (grads[a][b][d][k] + grads[b][a][d][k] - grads[d][a][b][k]);
                        }
                        chr[c][a][b][k] = 0.5 * s;
                    }
                }
            }
        }
        Ok(Self {
            labels,
            g,
            g_inv,
            det,
            chr,
        })
    }

    /// Symmetry, positivity and unit determinant to `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        for k in 0..self.n_nodes() {
            let asym = (self.g[0][1][k] - self.g[1][0][k]).abs();
            if asym > tol {
                return Err(Error::Invariant(format!(
                    "metric not symmetric at node {k}: |g12 - g21| = {asym:e}"
                )));
            }
            if !(self.g[0][0][k] > 0.0 && self.det[k] > 0.0) {
                return Err(Error::Invariant(format!("metric not positive at node {k}")));
            }
            if (self.det[k] - 1.0).abs() > tol {
                return Err(Error::Invariant(format!(
                    "det g = {} at node {k}",
                    self.det[k]
                )));
            }
        }
        Ok(())
    }

    /// √det g.
    pub fn volume_element(&self) -> Vec<f64> {
        self.det.iter().map(|d| d.abs().sqrt()).collect()
    }

    /// ∫ f dμ_g over the reference domain.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        let w = self.labels.grid.weights();
        (0..f.len())
            .map(|k| w[k] * self.labels.vol[k] * self.det[k].abs().sqrt() * f[k])
            .sum()
    }
}

/// g_ab = δ_ij ∂x^i/∂y^a ∂x^j/∂y^b.
pub fn pullback_metric(map: &FlowMap) -> Result<MetricState> {
    let n = map.n_nodes();
    let mut g = [[vec![0.0; n], vec![0.0; n]], [vec![0.0; n], vec![0.0; n]]];
    for k in 0..n {
        for a in 0..2 {
            for b in 0..2 {
                g[a][b][k] = map.f[0][a][k] * map.f[0][b][k] + map.f[1][a][k] * map.f[1][b][k];
            }
        }
    }
    MetricState::from_components(map.labels.clone(), g)
}

/// Classical RK4 for dx/dt = v(t, x) applied to every particle.
pub fn advance_map<V>(map: &FlowMap, velocity: V, dt: f64, det_tol: f64) -> Result<FlowMap>
where
    V: Fn(f64, [f64; 2]) -> [f64; 2],
{
    if !(dt > 0.0) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    let n = map.n_nodes();
    let t = map.t;
    let mut px = vec![0.0; n];
    let mut py = vec![0.0; n];
    for k in 0..n {
        let x = [map.current.pos[0][k], map.current.pos[1][k]];
        let add = |a: [f64; 2], b: [f64; 2], s: f64| [a[0] + s * b[0], a[1] + s * b[1]];
        let k1 = velocity(t, x);
        let k2 = velocity(t + 0.5 * dt, add(x, k1, 0.5 * dt));
        let k3 = velocity(t + 0.5 * dt, add(x, k2, 0.5 * dt));
        let k4 = velocity(t + dt, add(x, k3, dt));
        px[k] = x[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
        py[k] = x[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
    }
    let next = map.with_positions([px, py], t + dt)?;
    let drift = next.det_drift();
    if drift > det_tol {
        return Err(Error::Incompressibility {
            drift,
            tol: det_tol,
        });
    }
    Ok(next)
}

/// Time derivative at fixed label from consecutive levels (t_k, T_k).
///
/// Three or more levels: centred difference about the middle level.  Two
/// levels: the difference quotient, attributed to the midpoint.
pub fn material_derivative_field(series: &[(f64, TensorField)]) -> Result<(f64, TensorField)> {
    match series.len() {
        0 | 1 => Err(Error::InsufficientHistory(format!(
            "material derivative needs two time levels, got {}",
            series.len()
        ))),
        2 => {
            let (t0, a) = &series[0];
            let (t1, b) = &series[1];
            a.check_shape(b)?;
            let h = t1 - t0;
            Ok((0.5 * (t0 + t1), b.axpy(-1.0, a).scaled(1.0 / h)))
        }
        len => {
            let m = len / 2;
            let (t0, a) = &series[m - 1];
            let (t1, _) = &series[m];
            let (t2, c) = &series[m + 1];
            a.check_shape(c)?;
            Ok((*t1, c.axpy(-1.0, a).scaled(1.0 / (t2 - t0))))
        }
    }
}

/// ∇⊥_a q = ε_ab g^{bc} ∇_c q, with ε the metric volume form.
///
/// For a unit-determinant map this is the pull-back of the Euclidean
/// (∂₂q, −∂₁q); on flat patches it reduces to (∇₂q, −∇₁q).
pub fn perp_gradient(q: &TensorField, metric: &MetricState) -> Result<TensorField> {
    if q.rank != 0 {
        return Err(Error::Shape(format!("perp gradient needs a scalar, got rank {}", q.rank)));
    }
    let n = q.n;
    let [d1, d2] = metric.labels.grad(&q.data);
    let mut out = [vec![0.0; n], vec![0.0; n]];
    for k in 0..n {
        let up1 = metric.g_inv[0][0][k] * d1[k] + metric.g_inv[0][1][k] * d2[k];
        let up2 = metric.g_inv[1][0][k] * d1[k] + metric.g_inv[1][1][k] * d2[k];
        let vol = metric.det[k].abs().sqrt();
        out[0][k] = vol * up2;
        out[1][k] = -vol * up1;
    }
    Ok(TensorField::vector(q.domain, out))
}

#[cfg(test)]
mod tests;
