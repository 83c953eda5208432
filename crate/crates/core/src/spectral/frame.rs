//! Mapped coordinates: a grid together with physical positions of its nodes.

use super::gmres::{gmres, GmresOptions, GmresStats};
use super::grid::{AnnulusGrid, DiskGrid, Grid, ModeSolver};
use crate::error::{Error, Result};
use std::sync::Arc;

/// Node positions X(ξ) with the chain-rule data needed for ∂/∂X.
#[derive(Debug, Clone)]
pub struct Frame {
    pub grid: Arc<Grid>,
    pub pos: [Vec<f64>; 2],
    /// `jac[k][a]` = ∂X^k/∂ξ^a
    pub jac: [[Vec<f64>; 2]; 2],
    /// `inv[a][k]` = ∂ξ^a/∂X^k
    pub inv: [[Vec<f64>; 2]; 2],
    pub det: Vec<f64>,
    /// |det|, the area element relative to dξ.
    pub vol: Vec<f64>,
}

impl Frame {
    pub fn new(grid: Arc<Grid>, pos: [Vec<f64>; 2]) -> Result<Self> {
        let n = grid.n_nodes();
        if pos[0].len() != n || pos[1].len() != n {
            return Err(Error::Shape(format!(
                "frame expects {n} nodes, got {} and {}",
                pos[0].len(),
                pos[1].len()
            )));
        }
        let [x1, x2] = grid.d_comp(&pos[0]);
        let [y1, y2] = grid.d_comp(&pos[1]);
        let orient = grid.orientation();
        let mut det = vec![0.0; n];
        let mut vol = vec![0.0; n];
        let mut inv = [[vec![0.0; n], vec![0.0; n]], [vec![0.0; n], vec![0.0; n]]];
        for k in 0..n {
            let d = x1[k] * y2[k] - x2[k] * y1[k];
            if !(d * orient > 0.0) || !d.is_finite() {
                return Err(Error::MapDegeneracy(format!(
                    "jacobian determinant {d:e} at node {k}"
                )));
            }
            det[k] = d;
            vol[k] = d * orient;
            inv[0][0][k] = y2[k] / d;
            inv[0][1][k] = -x2[k] / d;
            inv[1][0][k] = -y1[k] / d;
            inv[1][1][k] = x1[k] / d;
        }
        Ok(Self {
            grid,
            pos,
            jac: [[x1, x2], [y1, y2]],
            inv,
            det,
            vol,
        })
    }

    /// Disk of radius `r` centred at the origin.
    pub fn disk(n_diam: usize, nt: usize, r: f64) -> Result<Self> {
        let g = DiskGrid::new(n_diam, nt)?;
        let z = g.coords();
        let pos = [
            z.iter().map(|p| r * p[0]).collect(),
            z.iter().map(|p| r * p[1]).collect(),
        ];
        Self::new(Arc::new(Grid::Disk(g)), pos)
    }

    /// Concentric annulus r_in < r < r_out with ring 0 on r_in.
    pub fn annulus(ns: usize, nt: usize, r_in: f64, r_out: f64) -> Result<Self> {
        let g = AnnulusGrid::new(ns, nt)?;
        let mut pos = [Vec::with_capacity(ns * nt), Vec::with_capacity(ns * nt)];
        for i in 0..ns {
            let r = r_in + g.sigma(i) * (r_out - r_in);
            for &th in g.theta() {
                pos[0].push(r * th.cos());
                pos[1].push(r * th.sin());
            }
        }
        Self::new(Arc::new(Grid::Annulus(g)), pos)
    }

    /// Image of the unit disk under `f`, which must preserve orientation.
    pub fn mapped_disk(n_diam: usize, nt: usize, f: impl Fn([f64; 2]) -> [f64; 2]) -> Result<Self> {
        let g = DiskGrid::new(n_diam, nt)?;
        let z: Vec<[f64; 2]> = g.coords().into_iter().map(f).collect();
        let pos = [z.iter().map(|p| p[0]).collect(), z.iter().map(|p| p[1]).collect()];
        Self::new(Arc::new(Grid::Disk(g)), pos)
    }

    /// Annulus between the closed curve `gamma` (node j at angle θ_j) and the
    /// circle of radius `r_wall`, in the chart x = (1−σ)Γ(θ) + σW(θ).
    pub fn blended_annulus(ns: usize, gamma: &[[f64; 2]], r_wall: f64) -> Result<Self> {
        let nt = gamma.len();
        let g = AnnulusGrid::new(ns, nt)?;
        let mut pos = [Vec::with_capacity(ns * nt), Vec::with_capacity(ns * nt)];
        for i in 0..ns {
            let sg = g.sigma(i);
            for (j, th) in g.theta().iter().enumerate() {
                pos[0].push((1.0 - sg) * gamma[j][0] + sg * r_wall * th.cos());
                pos[1].push((1.0 - sg) * gamma[j][1] + sg * r_wall * th.sin());
            }
        }
        Self::new(Arc::new(Grid::Annulus(g)), pos)
    }

    pub fn n_nodes(&self) -> usize {
        self.det.len()
    }

    /// Physical gradient (∂f/∂X¹, ∂f/∂X²).
    pub fn grad(&self, f: &[f64]) -> [Vec<f64>; 2] {
        let [d1, d2] = self.grid.d_comp(f);
        let n = f.len();
        let mut g0 = vec![0.0; n];
        let mut g1 = vec![0.0; n];
        for k in 0..n {
            g0[k] = self.inv[0][0][k] * d1[k] + self.inv[1][0][k] * d2[k];
            g1[k] = self.inv[0][1][k] * d1[k] + self.inv[1][1][k] * d2[k];
        }
        [g0, g1]
    }

    /// Divergence ∂_k v^k of a Cartesian vector field.
    pub fn div(&self, v: [&[f64]; 2]) -> Vec<f64> {
        let a = self.grad(v[0]);
        let b = self.grad(v[1]);
        a[0].iter().zip(&b[1]).map(|(x, y)| x + y).collect()
    }

    /// Scalar curl ∂₁v₂ − ∂₂v₁.
    pub fn curl(&self, v: [&[f64]; 2]) -> Vec<f64> {
        let a = self.grad(v[0]);
        let b = self.grad(v[1]);
        b[0].iter().zip(&a[1]).map(|(x, y)| x - y).collect()
    }

    /// Euclidean Laplacian as the divergence of the gradient.
    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        let g = self.grad(f);
        self.div([&g[0], &g[1]])
    }

    /// Quadrature weights for ∫ f dX.
    pub fn area_weights(&self) -> Vec<f64> {
        self.grid
            .weights()
            .iter()
            .zip(&self.vol)
            .map(|(w, d)| w * d)
            .collect()
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.grid
            .weights()
            .iter()
            .zip(&self.vol)
            .zip(f)
            .map(|((w, d), v)| w * d * v)
            .sum()
    }

    /// Positions of one ring as (x, y) pairs.
    pub fn ring(&self, i: usize) -> Vec<[f64; 2]> {
        let nt = self.grid.n_theta();
        (0..nt)
            .map(|j| [self.pos[0][i * nt + j], self.pos[1][i * nt + j]])
            .collect()
    }

    /// Equivalent radius √(area/π).
    pub fn equivalent_radius(&self) -> f64 {
        (self.integrate(&vec![1.0; self.n_nodes()]) / std::f64::consts::PI).sqrt()
    }

    /// Mean distance from the origin of the nodes of ring `i`.
    pub fn mean_ring_radius(&self, i: usize) -> f64 {
        let r = self.ring(i);
        r.iter().map(|p| p[0].hypot(p[1])).sum::<f64>() / r.len() as f64
    }

    /// Reference-geometry preconditioner suited to this frame.
    pub fn preconditioner(&self) -> ModeSolver {
        match self.grid.as_ref() {
            Grid::Disk(g) => ModeSolver::disk(g, self.equivalent_radius()),
            Grid::Annulus(g) => {
                let last = g.n_rings() - 1;
                ModeSolver::annulus(g, self.mean_ring_radius(0), self.mean_ring_radius(last))
            }
        }
    }

    /// Solve ΔX q = rhs in the interior with q = `bc` on every boundary ring.
    ///
    /// Only boundary entries of `bc` are read.
    pub fn solve_dirichlet(
        &self,
        rhs: &[f64],
        bc: &[f64],
        pre: &ModeSolver,
        x0: Option<Vec<f64>>,
        opts: GmresOptions,
    ) -> Result<(Vec<f64>, GmresStats)> {
        let n = self.n_nodes();
        let grid = self.grid.clone();
        let mut b = rhs.to_vec();
        for k in 0..n {
            if grid.is_boundary(k) {
                b[k] = bc[k];
            }
        }
        let apply = |q: &[f64]| {
            let mut out = self.laplacian(q);
            for k in 0..n {
                if grid.is_boundary(k) {
                    out[k] = q[k];
                }
            }
            out
        };
        let x0 = x0.unwrap_or_else(|| pre.solve(&b));
        gmres(apply, |r| pre.solve(r), &b, x0, opts)
    }
}
