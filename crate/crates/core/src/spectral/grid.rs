//! Tensor-product spectral grids for the plasma disk and the vacuum annulus.
//!
//! Both grids store nodal values ring by ring: index `i * n_theta + j` with
//! `i` the radial (ring) index and `j` the angular index.  Derivatives are
//! taken with respect to smooth computational coordinates ξ = (ξ¹, ξ²):
//! Cartesian ζ on the unit disk and (s, θ) on the annulus.

use super::{cheb, fourier};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex64;
use std::f64::consts::PI;

/// Which boundary ring of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ring {
    /// The ring carrying the free interface Γ.
    Interface,
    /// The ring carrying the fixed wall W (annulus only).
    Wall,
}

/// Unit disk sampled on the double-covered Chebyshev grid.
///
/// Chebyshev nodes run across a full diameter; only the r > 0 half is stored
/// and the other half is recovered from f(-r, θ) = f(r, θ + π).
#[derive(Debug, Clone)]
pub struct DiskGrid {
    n_diam: usize,
    nr: usize,
    nt: usize,
    rho: Vec<f64>,
    theta: Vec<f64>,
    dcheb: Vec<f64>,
    dtheta: Vec<f64>,
    weights: Vec<f64>,
}

impl DiskGrid {
    /// `n_diam` Chebyshev nodes across the diameter (even), `nt` angles (even).
    pub fn new(n_diam: usize, nt: usize) -> Result<Self> {
        if n_diam < 8 || n_diam % 2 != 0 || nt < 8 || nt % 2 != 0 {
            return Err(Error::Resolution(format!(
                "disk grid needs even sizes >= 8, got {n_diam} x {nt}"
            )));
        }
        let n = n_diam - 1;
        let x = cheb::nodes(n);
        let nr = n_diam / 2;
        let rho = x[..nr].to_vec();
        let theta = fourier::angles(nt);
        let hm = cheb::half_moment_weights(n);
        let dth = 2.0 * PI / nt as f64;
        let mut weights = vec![0.0; nr * nt];
        for i in 0..nr {
            let w = (hm[i] + hm[n - i]) * dth;
            for j in 0..nt {
                weights[i * nt + j] = w;
            }
        }
        Ok(Self {
            n_diam,
            nr,
            nt,
            rho,
            theta,
            dcheb: cheb::diff_matrix(n),
            dtheta: fourier::diff_matrix(nt),
            weights,
        })
    }

    pub fn n_rings(&self) -> usize {
        self.nr
    }
    pub fn n_theta(&self) -> usize {
        self.nt
    }
    pub fn n_diam(&self) -> usize {
        self.n_diam
    }
    pub fn rho(&self) -> &[f64] {
        &self.rho
    }
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Computational coordinates ζ of every node.
    pub fn coords(&self) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(self.nr * self.nt);
        for i in 0..self.nr {
            for j in 0..self.nt {
                let (s, c) = self.theta[j].sin_cos();
                out.push([self.rho[i] * c, self.rho[i] * s]);
            }
        }
        out
    }

    /// ∂f/∂ρ using the diameter lines through θ_j and θ_j + π.
    pub fn d_rho(&self, f: &[f64]) -> Vec<f64> {
        let (nr, nt, m) = (self.nr, self.nt, self.n_diam);
        let half = nt / 2;
        let mut g = vec![0.0; m * half];
        for i in 0..nr {
            for j in 0..half {
                g[i * half + j] = f[i * nt + j];
                g[(m - 1 - i) * half + j] = f[i * nt + j + half];
            }
        }
        let mut dg = vec![0.0; m * half];
        cheb::apply_rows(&self.dcheb, m, &g, half, &mut dg);
        let mut out = vec![0.0; nr * nt];
        for i in 0..nr {
            for j in 0..half {
                out[i * nt + j] = dg[i * half + j];
                out[i * nt + j + half] = -dg[(m - 1 - i) * half + j];
            }
        }
        out
    }

    /// ∂f/∂θ ring by ring.
    pub fn d_theta(&self, f: &[f64]) -> Vec<f64> {
        d_theta_rings(&self.dtheta, self.nt, f)
    }

    /// Derivatives with respect to ζ¹, ζ².
    pub fn d_comp(&self, f: &[f64]) -> [Vec<f64>; 2] {
        let fr = self.d_rho(f);
        let ft = self.d_theta(f);
        let mut d1 = vec![0.0; f.len()];
        let mut d2 = vec![0.0; f.len()];
        for i in 0..self.nr {
            let inv = 1.0 / self.rho[i];
            for j in 0..self.nt {
                let k = i * self.nt + j;
                let (s, c) = self.theta[j].sin_cos();
                d1[k] = c * fr[k] - s * inv * ft[k];
                d2[k] = s * fr[k] + c * inv * ft[k];
            }
        }
        [d1, d2]
    }

    /// Weights for ∫ f dζ over the unit disk.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Annulus in computational coordinates (s, θ) ∈ [-1, 1] × [0, 2π).
///
/// Ring 0 (s = 1) is the interface Γ, the last ring (s = -1) the wall W.
#[derive(Debug, Clone)]
pub struct AnnulusGrid {
    ns: usize,
    nt: usize,
    s: Vec<f64>,
    theta: Vec<f64>,
    dcheb: Vec<f64>,
    dtheta: Vec<f64>,
    weights: Vec<f64>,
}

impl AnnulusGrid {
    /// `ns` Chebyshev nodes across the gap, `nt` angles (even).
    pub fn new(ns: usize, nt: usize) -> Result<Self> {
        if ns < 4 || nt < 8 || nt % 2 != 0 {
            return Err(Error::Resolution(format!(
                "annulus grid needs ns >= 4 and even nt >= 8, got {ns} x {nt}"
            )));
        }
        let n = ns - 1;
        let s = cheb::nodes(n);
        let cc = cheb::clenshaw_curtis(n);
        let dth = 2.0 * PI / nt as f64;
        let mut weights = vec![0.0; ns * nt];
        for i in 0..ns {
            for j in 0..nt {
                weights[i * nt + j] = cc[i] * dth;
            }
        }
        Ok(Self {
            ns,
            nt,
            s,
            theta: fourier::angles(nt),
            dcheb: cheb::diff_matrix(n),
            dtheta: fourier::diff_matrix(nt),
            weights,
        })
    }

    pub fn n_rings(&self) -> usize {
        self.ns
    }
    pub fn n_theta(&self) -> usize {
        self.nt
    }
    pub fn s(&self) -> &[f64] {
        &self.s
    }
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }
    /// Blend parameter σ = (1 - s)/2: 0 on Γ, 1 on W.
    pub fn sigma(&self, i: usize) -> f64 {
        0.5 * (1.0 - self.s[i])
    }

    pub fn coords(&self) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(self.ns * self.nt);
        for i in 0..self.ns {
            for j in 0..self.nt {
                out.push([self.s[i], self.theta[j]]);
            }
        }
        out
    }

    pub fn d_s(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        cheb::apply_rows(&self.dcheb, self.ns, f, self.nt, &mut out);
        out
    }

    pub fn d_theta(&self, f: &[f64]) -> Vec<f64> {
        d_theta_rings(&self.dtheta, self.nt, f)
    }

    pub fn d_comp(&self, f: &[f64]) -> [Vec<f64>; 2] {
        [self.d_s(f), self.d_theta(f)]
    }

    /// Weights for ∫ f ds dθ.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

fn d_theta_rings(d: &[f64], nt: usize, f: &[f64]) -> Vec<f64> {
    let rings = f.len() / nt;
    let mut out = vec![0.0; f.len()];
    for i in 0..rings {
        let row = &f[i * nt..(i + 1) * nt];
        let orow = &mut out[i * nt..(i + 1) * nt];
        for (a, o) in orow.iter_mut().enumerate() {
            let drow = &d[a * nt..(a + 1) * nt];
            *o = drow.iter().zip(row).map(|(x, y)| x * y).sum();
        }
    }
    out
}

/// A computational grid for either domain.
#[derive(Debug, Clone)]
pub enum Grid {
    Disk(DiskGrid),
    Annulus(AnnulusGrid),
}

impl Grid {
    pub fn n_nodes(&self) -> usize {
        self.n_rings() * self.n_theta()
    }
    pub fn n_rings(&self) -> usize {
        match self {
            Grid::Disk(g) => g.n_rings(),
            Grid::Annulus(g) => g.n_rings(),
        }
    }
    pub fn n_theta(&self) -> usize {
        match self {
            Grid::Disk(g) => g.n_theta(),
            Grid::Annulus(g) => g.n_theta(),
        }
    }
    pub fn d_comp(&self, f: &[f64]) -> [Vec<f64>; 2] {
        match self {
            Grid::Disk(g) => g.d_comp(f),
            Grid::Annulus(g) => g.d_comp(f),
        }
    }
    /// Quadrature weights for ∫ f dξ¹dξ².
    pub fn weights(&self) -> &[f64] {
        match self {
            Grid::Disk(g) => g.weights(),
            Grid::Annulus(g) => g.weights(),
        }
    }
    /// Ring index of a boundary, if the grid has it.
    pub fn ring_index(&self, ring: Ring) -> Option<usize> {
        match (self, ring) {
            (_, Ring::Interface) => Some(0),
            (Grid::Annulus(g), Ring::Wall) => Some(g.n_rings() - 1),
            (Grid::Disk(_), Ring::Wall) => None,
        }
    }
    /// Whether node `k` lies on any boundary ring.
    pub fn is_boundary(&self, k: usize) -> bool {
        let i = k / self.n_theta();
        match self {
            Grid::Disk(_) => i == 0,
            Grid::Annulus(g) => i == 0 || i == g.n_rings() - 1,
        }
    }
    /// Sign of det ∂X/∂ξ for a positively oriented physical domain: the
    /// annulus coordinate s increases towards Γ, which reverses orientation.
    pub fn orientation(&self) -> f64 {
        match self {
            Grid::Disk(_) => 1.0,
            Grid::Annulus(_) => -1.0,
        }
    }
    /// Angular parameter of column j.
    pub fn theta(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n_theta() as f64
    }
    /// Smallest node spacing in computational units, for CFL heuristics.
    pub fn min_spacing(&self) -> f64 {
        match self {
            Grid::Disk(g) => {
                let r = g.rho();
                let dr = r[0] - r[1];
                let last = r[g.n_rings() - 1];
                dr.min(2.0 * PI * last / g.n_theta() as f64).min(2.0 * last)
            }
            Grid::Annulus(g) => {
                let s = g.s();
                (s[0] - s[1]).min(2.0 * PI / g.n_theta() as f64)
            }
        }
    }
}

/// Per-Fourier-mode dense solver for a separable reference Laplacian.
///
/// Used as the preconditioner of the mapped-domain Poisson solves: it is the
/// exact inverse when the physical domain coincides with the reference one.
#[derive(Debug, Clone)]
pub struct ModeSolver {
    nr: usize,
    nt: usize,
    lus: Vec<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl ModeSolver {
    /// Polar Laplacian on the disk of radius `scale`, Dirichlet at the rim.
    pub fn disk(g: &DiskGrid, scale: f64) -> Self {
        let (nr, nt, m) = (g.n_rings(), g.n_theta(), g.n_diam());
        let d = &g.dcheb;
        let mut d2 = vec![0.0; m * m];
        for i in 0..m {
            for l in 0..m {
                let mut s = 0.0;
                for p in 0..m {
                    s += d[i * m + p] * d[p * m + l];
                }
                d2[i * m + l] = s;
            }
        }
        let mut lus = Vec::with_capacity(nt / 2 + 1);
        for k in 0..=nt / 2 {
            let par = if k % 2 == 0 { 1.0 } else { -1.0 };
            let mut a = DMatrix::<f64>::zeros(nr, nr);
            for i in 0..nr {
                let r = g.rho[i];
                for l in 0..nr {
                    let d1 = d[i * m + l] + par * d[i * m + (m - 1 - l)];
                    let dd = d2[i * m + l] + par * d2[i * m + (m - 1 - l)];
                    a[(i, l)] = dd + d1 / r;
                }
                a[(i, i)] -= (k * k) as f64 / (r * r);
            }
            a /= scale * scale;
            for l in 0..nr {
                a[(0, l)] = if l == 0 { 1.0 } else { 0.0 };
            }
            lus.push(a.lu());
        }
        Self { nr, nt, lus }
    }

    /// Laplacian on the concentric annulus r_in < r < r_out mapped to (s, θ).
    pub fn annulus(g: &AnnulusGrid, r_in: f64, r_out: f64) -> Self {
        let (ns, nt) = (g.n_rings(), g.n_theta());
        let d = &g.dcheb;
        let mut d2 = vec![0.0; ns * ns];
        for i in 0..ns {
            for l in 0..ns {
                let mut s = 0.0;
                for p in 0..ns {
                    s += d[i * ns + p] * d[p * ns + l];
                }
                d2[i * ns + l] = s;
            }
        }
        // r = r_in + σ (r_out - r_in), σ = (1 - s)/2
        let dsdr = -2.0 / (r_out - r_in);
        let mut lus = Vec::with_capacity(nt / 2 + 1);
        for k in 0..=nt / 2 {
            let mut a = DMatrix::<f64>::zeros(ns, ns);
            for i in 0..ns {
                let r = r_in + g.sigma(i) * (r_out - r_in);
                for l in 0..ns {
                    a[(i, l)] = dsdr * dsdr * d2[i * ns + l] + dsdr / r * d[i * ns + l];
                }
                a[(i, i)] -= (k * k) as f64 / (r * r);
            }
            for b in [0, ns - 1] {
                for l in 0..ns {
                    a[(b, l)] = if l == b { 1.0 } else { 0.0 };
                }
            }
            lus.push(a.lu());
        }
        Self { nr: ns, nt, lus }
    }

    /// Solve the reference problem; boundary-ring entries of `rhs` are the
    /// Dirichlet values.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (nr, nt) = (self.nr, self.nt);
        let mut modes: Vec<Vec<Complex64>> = (0..nr)
            .map(|i| fourier::coefficients(&rhs[i * nt..(i + 1) * nt]))
            .collect();
        for k in 0..=nt / 2 {
            let lu = &self.lus[k];
            let re = DVector::from_iterator(nr, (0..nr).map(|i| modes[i][k].re));
            let im = DVector::from_iterator(nr, (0..nr).map(|i| modes[i][k].im));
            let xr = lu.solve(&re).unwrap_or(re);
            let xi = lu.solve(&im).unwrap_or(im);
            for i in 0..nr {
                let c = Complex64::new(xr[i], xi[i]);
                modes[i][k] = c;
                if k != 0 && k != nt / 2 {
                    modes[i][nt - k] = c.conj();
                }
            }
        }
        let mut out = vec![0.0; nr * nt];
        for i in 0..nr {
            out[i * nt..(i + 1) * nt].copy_from_slice(&fourier::inverse(&modes[i]));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_derivatives_of_polynomial_and_exponential() {
        let g = DiskGrid::new(24, 32).unwrap();
        let z = g.coords();
        let f: Vec<f64> = z.iter().map(|p| p[0].powi(3) * p[1] + (p[1]).exp()).collect();
        let [d1, d2] = g.d_comp(&f);
        for (k, p) in z.iter().enumerate() {
            let e1 = 3.0 * p[0].powi(2) * p[1];
            let e2 = p[0].powi(3) + p[1].exp();
            assert!((d1[k] - e1).abs() < 1e-11, "{k}");
            assert!((d2[k] - e2).abs() < 1e-11, "{k}");
        }
    }

    #[test]
    fn disk_quadrature_area_and_moment() {
        let g = DiskGrid::new(20, 32).unwrap();
        let z = g.coords();
        let a: f64 = g.weights().iter().sum();
        assert!((a - PI).abs() < 1e-13);
        let m: f64 = z
            .iter()
            .zip(g.weights())
            .map(|(p, w)| w * (p[0] * p[0] + p[1]).exp())
            .sum();
        // reference from a fine grid
        let gf = DiskGrid::new(60, 48).unwrap();
        let mf: f64 = gf
            .coords()
            .iter()
            .zip(gf.weights())
            .map(|(p, w)| w * (p[0] * p[0] + p[1]).exp())
            .sum();
        assert!((m - mf).abs() < 1e-11);
    }

    #[test]
    fn annulus_quadrature_area() {
        let g = AnnulusGrid::new(9, 16).unwrap();
        let a: f64 = g.weights().iter().sum();
        assert!((a - 4.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn disk_mode_solver_recovers_polynomial() {
        let g = DiskGrid::new(24, 16).unwrap();
        let z = g.coords();
        // u = x^2 y + y^3 - 1, Δu = 2y + 6y = 8y
        let exact: Vec<f64> = z.iter().map(|p| p[0] * p[0] * p[1] + p[1].powi(3) - 1.0).collect();
        let mut rhs: Vec<f64> = z.iter().map(|p| 8.0 * p[1]).collect();
        for j in 0..16 {
            rhs[j] = exact[j];
        }
        let u = ModeSolver::disk(&g, 1.0).solve(&rhs);
        for k in 0..u.len() {
            assert!((u[k] - exact[k]).abs() < 1e-11, "{k}: {} {}", u[k], exact[k]);
        }
    }

    #[test]
    fn annulus_mode_solver_recovers_log() {
        let g = AnnulusGrid::new(24, 16).unwrap();
        let nt = 16;
        let mut rhs = vec![0.0; 24 * nt];
        for i in 0..24 {
            let r = 1.0 + g.sigma(i);
            for j in 0..nt {
                let th = g.theta()[j];
                let v = r.ln() + (r - 1.0 / r) * th.cos();
                if i == 0 || i == 23 {
                    rhs[i * nt + j] = v;
                }
            }
        }
        let u = ModeSolver::annulus(&g, 1.0, 2.0).solve(&rhs);
        for i in 0..24 {
            let r = 1.0 + g.sigma(i);
            for j in 0..nt {
                let th = g.theta()[j];
                let v = r.ln() + (r - 1.0 / r) * th.cos();
                assert!((u[i * nt + j] - v).abs() < 1e-12);
            }
        }
    }
}
