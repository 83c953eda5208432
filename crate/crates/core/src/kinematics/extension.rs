//! Divergence-free extension of the interface velocity into the vacuum.
//!
//! On the blended vacuum chart x(σ, θ) a stream function
//! ψ = χ(σ)(Ψ(θ) + σΦ(θ)) is built so that ∇⊥ψ reproduces the full
//! velocity on Γ (σ = 0).  χ is the cubic with χ(0) = 1, χ'(0) = 0 and a
//! double zero at the wall, so the extension vanishes on W.

use crate::error::{Error, Result};
use crate::spectral::{fourier, Frame, Grid};
use crate::tensor::{Domain, TensorField};
use super::FlowMap;
use serde::Serialize;

/// Cutoff profile χ(σ) = (1 + 2σ)(1 − σ)².
pub fn cutoff(sigma: f64) -> f64 {
    (1.0 + 2.0 * sigma) * (1.0 - sigma).powi(2)
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtensionReport {
    /// max over Ω⁻ of |v| divided by max over Γ of |v|.
    pub sup_ratio: f64,
    /// max |div v| over Ω⁻.
    pub max_divergence: f64,
    /// max |v − u| on Γ.
    pub trace_error: f64,
    /// max |v| on W.
    pub wall_speed: f64,
    /// ∮_Γ u·n ds, zero for incompressible plasma flow.
    pub net_flux: f64,
    /// Smallest distance between Γ and W nodes.
    pub gap: f64,
}

/// Extend the Cartesian interface velocity `u_gamma` (one value per node of
/// ring 0 of `vac`) to Cartesian components on every vacuum node.
pub fn extend_velocity_to_vacuum(
    u_gamma: [&[f64]; 2],
    vac: &Frame,
    min_gap: f64,
) -> Result<(TensorField, ExtensionReport)> {
    extend_impl(u_gamma, vac, None, min_gap)
}

/// As [`extend_velocity_to_vacuum`] on a moving vacuum map: ∇⊥ψ is taken on
/// the fixed labels and pushed forward, v = F·∇⊥_y ψ.
///
/// For det F = 1 this equals ∇⊥ψ on the current positions, but the
/// positions then enter only through F, which keeps the virtual-particle
/// map from feeding back on its own chart derivatives.
pub fn extend_velocity_on_map(
    u_gamma: [&[f64]; 2],
    map: &FlowMap,
    min_gap: f64,
) -> Result<(TensorField, ExtensionReport)> {
    extend_impl(u_gamma, &map.current, Some(map), min_gap)
}

fn extend_impl(
    u_gamma: [&[f64]; 2],
    vac: &Frame,
    map: Option<&FlowMap>,
    min_gap: f64,
) -> Result<(TensorField, ExtensionReport)> {
    let ag = match vac.grid.as_ref() {
        Grid::Annulus(g) => g,
        Grid::Disk(_) => {
            return Err(Error::Shape("velocity extension needs the vacuum annulus".into()))
        }
    };
    let nt = ag.n_theta();
    let ns = ag.n_rings();
    if u_gamma[0].len() != nt || u_gamma[1].len() != nt {
        return Err(Error::Shape(format!(
            "interface velocity has {} nodes, vacuum ring has {nt}",
            u_gamma[0].len()
        )));
    }
    let gam = vac.ring(0);
    let wall = vac.ring(ns - 1);
    let gap = gam
        .iter()
        .flat_map(|p| wall.iter().map(move |q| (p[0] - q[0]).hypot(p[1] - q[1])))
        .fold(f64::INFINITY, f64::min);
    if !(gap > min_gap) {
        return Err(Error::Geometry(format!(
            "interface-wall gap {gap:e} below threshold {min_gap:e}"
        )));
    }

    // ∇ψ = (−u₂, u₁) on Γ, projected on the chart tangents.
    let mut dpsi = vec![0.0; nt];
    let mut phi = vec![0.0; nt];
    for j in 0..nt {
        let w = [-u_gamma[1][j], u_gamma[0][j]];
        // jac[k][1] = ∂x^k/∂θ, jac[k][0] = ∂x^k/∂s and σ = (1 − s)/2
        dpsi[j] = w[0] * vac.jac[0][1][j] + w[1] * vac.jac[1][1][j];
        phi[j] = -2.0 * (w[0] * vac.jac[0][0][j] + w[1] * vac.jac[1][0][j]);
    }
    let mean = dpsi.iter().sum::<f64>() / nt as f64;
    let net_flux = -mean * 2.0 * std::f64::consts::PI;
    let psi_g = fourier::integrate(&dpsi);

    let mut psi = vec![0.0; ns * nt];
    for i in 0..ns {
        let sg = ag.sigma(i);
        let c = cutoff(sg);
        for j in 0..nt {
            psi[i * nt + j] = c * (psi_g[j] + sg * phi[j]);
        }
    }
    let v = match map {
        None => {
            let [px, py] = vac.grad(&psi);
            [py, px.iter().map(|x| -x).collect::<Vec<_>>()]
        }
        Some(m) => {
            let [py1, py2] = m.labels.grad(&psi);
            let n = psi.len();
            let mut v = [vec![0.0; n], vec![0.0; n]];
            for k in 0..n {
                let w = [py2[k], -py1[k]];
                for (i, vi) in v.iter_mut().enumerate() {
                    vi[k] = m.f[i][0][k] * w[0] + m.f[i][1][k] * w[1];
                }
            }
            v
        }
    };

    let div = vac.div([&v[0], &v[1]]);
    let speed = |k: usize| v[0][k].hypot(v[1][k]);
    let max_gamma = (0..nt)
        .map(|j| u_gamma[0][j].hypot(u_gamma[1][j]))
        .fold(0.0, f64::max);
    let max_all = (0..ns * nt).map(speed).fold(0.0, f64::max);
    let trace_error = (0..nt)
        .map(|j| (v[0][j] - u_gamma[0][j]).hypot(v[1][j] - u_gamma[1][j]))
        .fold(0.0, f64::max);
    let wall_speed = ((ns - 1) * nt..ns * nt).map(speed).fold(0.0, f64::max);
    let report = ExtensionReport {
        sup_ratio: if max_gamma > 0.0 { max_all / max_gamma } else { 0.0 },
        max_divergence: div.iter().fold(0.0, |m, d| m.max(d.abs())),
        trace_error,
        wall_speed,
        net_flux,
        gap,
    };
    Ok((TensorField::vector(Domain::Vacuum, v), report))
}
