//! Closed boundary curves and their geometry: normals, second fundamental
//! form, injectivity radii, nearest-point distance and the cutoff co-metric.

use crate::error::{Error, Result};
use crate::spectral::fourier;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{Read, Write};

/// Default ε₁ for the normal-variation radius ι₁.
pub const DEFAULT_EPS1: f64 = 0.5;

/// A closed curve sampled at uniformly spaced parameter values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedCurve {
    pub positions: Vec<[f64; 2]>,
    pub is_fixed: bool,
}

impl ClosedCurve {
    /// Build and validate a counter-clockwise, simple curve.
    pub fn new(positions: Vec<[f64; 2]>, is_fixed: bool) -> Result<Self> {
        let c = Self {
            positions,
            is_fixed,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn from_fn(n: usize, is_fixed: bool, f: impl Fn(f64) -> [f64; 2]) -> Result<Self> {
        Self::new(fourier::angles(n).into_iter().map(f).collect(), is_fixed)
    }

    pub fn circle(center: [f64; 2], radius: f64, n: usize, is_fixed: bool) -> Result<Self> {
        Self::from_fn(n, is_fixed, |t| {
            [center[0] + radius * t.cos(), center[1] + radius * t.sin()]
        })
    }

    pub fn ellipse(a: f64, b: f64, n: usize) -> Result<Self> {
        Self::from_fn(n, false, |t| [a * t.cos(), b * t.sin()])
    }

    pub fn n_nodes(&self) -> usize {
        self.positions.len()
    }

    pub fn params(&self) -> Vec<f64> {
        fourier::angles(self.n_nodes())
    }

    fn component(&self, c: usize) -> Vec<f64> {
        self.positions.iter().map(|p| p[c]).collect()
    }

    /// Shoelace signed area.
    pub fn signed_area(&self) -> f64 {
        let n = self.n_nodes();
        let mut a = 0.0;
        for i in 0..n {
            let p = self.positions[i];
            let q = self.positions[(i + 1) % n];
            a += p[0] * q[1] - q[0] * p[1];
        }
        0.5 * a
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_nodes();
        if n < 8 {
            return Err(Error::Resolution(format!("curve needs at least 8 nodes, got {n}")));
        }
        if self.positions.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::Geometry("non-finite curve node".into()));
        }
        let seg = |i: usize| (self.positions[i], self.positions[(i + 1) % n]);
        let lens: Vec<f64> = (0..n)
            .map(|i| {
                let (p, q) = seg(i);
                (q[0] - p[0]).hypot(q[1] - p[1])
            })
            .collect();
        let perim: f64 = lens.iter().sum();
        if lens.iter().any(|&l| l < 1e-12 * perim) {
            return Err(Error::Resolution("degenerate node spacing".into()));
        }
        for i in 0..n {
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let (a, b) = seg(i);
                let (c, d) = seg(j);
                if segments_cross(a, b, c, d) {
                    return Err(Error::Geometry(format!(
                        "curve self-intersects between segments {i} and {j}"
                    )));
                }
            }
        }
        if self.signed_area() <= 0.0 {
            return Err(Error::Geometry("curve must enclose positive signed area".into()));
        }
        Ok(())
    }

    /// Trigonometric interpolant of the curve.
    pub fn interpolant(&self) -> CurveInterpolant {
        CurveInterpolant {
            cx: fourier::coefficients(&self.component(0)),
            cy: fourier::coefficients(&self.component(1)),
        }
    }

    /// Resample to `m` nodes through the trigonometric interpolant.
    pub fn resampled(&self, m: usize) -> Result<ClosedCurve> {
        let x = fourier::resample(&self.component(0), m);
        let y = fourier::resample(&self.component(1), m);
        ClosedCurve::new(x.into_iter().zip(y).map(|(a, b)| [a, b]).collect(), self.is_fixed)
    }

    /// Write as CSV with header `param,x,y`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["param", "x", "y"])
            .map_err(|e| Error::Parse(e.to_string()))?;
        for (t, p) in self.params().iter().zip(&self.positions) {
            wr.write_record([t.to_string(), p[0].to_string(), p[1].to_string()])
                .map_err(|e| Error::Parse(e.to_string()))?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Read a `param,x,y` CSV; parameters must be uniform.
    pub fn read_csv<R: Read>(r: R, is_fixed: bool) -> Result<ClosedCurve> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["param", "x", "y"] {
            return Err(Error::Parse(format!("expected header param,x,y, got {headers:?}")));
        }
        let mut params = Vec::new();
        let mut pts = Vec::new();
        for rec in rd.records() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let v: Vec<f64> = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Parse(e.to_string())))
                .collect::<Result<_>>()?;
            params.push(v[0]);
            pts.push([v[1], v[2]]);
        }
        let n = pts.len();
        for (j, t) in params.iter().enumerate() {
            if (t - 2.0 * PI * j as f64 / n as f64).abs() > 1e-9 {
                return Err(Error::Parse("curve parameters must be uniform on [0, 2π)".into()));
            }
        }
        ClosedCurve::new(pts, is_fixed)
    }
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn segments_cross(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    (d1 * d2 < 0.0) && (d3 * d4 < 0.0)
}

/// Fourier coefficients of a curve, evaluable at arbitrary parameter values.
#[derive(Debug, Clone)]
pub struct CurveInterpolant {
    cx: Vec<Complex64>,
    cy: Vec<Complex64>,
}

impl CurveInterpolant {
    pub fn eval(&self, t: f64, order: u32) -> [f64; 2] {
        [
            fourier::evaluate(&self.cx, t, order),
            fourier::evaluate(&self.cy, t, order),
        ]
    }
}

/// Geometry of a boundary curve in the Euclidean frame.
///
/// Normals point out of the enclosed region; for the wall W the vacuum-side
/// normal is the negative of `normal` (see [`InterfaceGeometry::domain_normal`]).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InterfaceGeometry {
    pub is_fixed: bool,
    pub positions: Vec<[f64; 2]>,
    /// Unit tangent, counter-clockwise.
    pub tangent: Vec<[f64; 2]>,
    /// Outward unit normal N^a (equal to N_a in the Euclidean frame).
    pub normal: Vec<[f64; 2]>,
    /// Induced metric γ_ab = δ_ab − N_a N_b.
    pub gamma: Vec<[[f64; 2]; 2]>,
    /// Second fundamental form θ(τ, τ); θ_ab = θ τ_a τ_b.
    pub theta: Vec<f64>,
    /// Mean curvature tr θ.
    pub mean_curvature: Vec<f64>,
    /// |dX/dt| at each node.
    pub speed: Vec<f64>,
    /// Arc-length quadrature weights.
    pub arc_weights: Vec<f64>,
    pub iota0: f64,
    pub iota1: f64,
    pub eps1: f64,
    pub k_cal: f64,
}

impl InterfaceGeometry {
    pub fn n_nodes(&self) -> usize {
        self.positions.len()
    }

    /// Normal used in the Gauss formula of the adjacent domain: outward from
    /// Ω⁺ on Γ, which is also the direction into Ω⁻, and into Ω⁻ on W.
    pub fn domain_normal(&self, k: usize) -> [f64; 2] {
        let n = self.normal[k];
        if self.is_fixed {
            [-n[0], -n[1]]
        } else {
            n
        }
    }

    pub fn theta_tensor(&self, k: usize) -> [[f64; 2]; 2] {
        let t = self.tangent[k];
        let th = self.theta[k];
        [
            [th * t[0] * t[0], th * t[0] * t[1]],
            [th * t[1] * t[0], th * t[1] * t[1]],
        ]
    }

    pub fn max_abs_theta(&self) -> f64 {
        self.theta.iter().fold(0.0, |m, t| m.max(t.abs()))
    }

    pub fn length(&self) -> f64 {
        self.arc_weights.iter().sum()
    }
}

pub fn compute_geometry(curve: &ClosedCurve) -> Result<InterfaceGeometry> {
    compute_geometry_with(curve, DEFAULT_EPS1)
}

pub fn compute_geometry_with(curve: &ClosedCurve, eps1: f64) -> Result<InterfaceGeometry> {
    curve.validate()?;
    if !(eps1 > 0.0 && eps1 < 2.0) {
        return Err(Error::Config(format!("eps1 must lie in (0, 2), got {eps1}")));
    }
    let n = curve.n_nodes();
    let x = curve.component(0);
    let y = curve.component(1);
    let x1 = fourier::derivative(&x, 1);
    let y1 = fourier::derivative(&y, 1);
    let x2 = fourier::derivative(&x, 2);
    let y2 = fourier::derivative(&y, 2);
    let mut tangent = Vec::with_capacity(n);
    let mut normal = Vec::with_capacity(n);
    let mut gamma = Vec::with_capacity(n);
    let mut theta = Vec::with_capacity(n);
    let mut speed = Vec::with_capacity(n);
    for k in 0..n {
        let sp = x1[k].hypot(y1[k]);
        let t = [x1[k] / sp, y1[k] / sp];
        let nn = [t[1], -t[0]];
        tangent.push(t);
        normal.push(nn);
        gamma.push([
            [1.0 - nn[0] * nn[0], -nn[0] * nn[1]],
            [-nn[1] * nn[0], 1.0 - nn[1] * nn[1]],
        ]);
        theta.push((x1[k] * y2[k] - y1[k] * x2[k]) / sp.powi(3));
        speed.push(sp);
    }
    let dt = 2.0 * PI / n as f64;
    let arc_weights = speed.iter().map(|s| s * dt).collect();
    let iota0 = injectivity_radius(&curve.positions, &normal, &theta);
    let iota1 = normal_variation_radius(curve, eps1);
    let max_theta = theta.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    Ok(InterfaceGeometry {
        is_fixed: curve.is_fixed,
        positions: curve.positions.clone(),
        tangent,
        normal,
        gamma,
        mean_curvature: theta.clone(),
        theta,
        speed,
        arc_weights,
        iota0,
        iota1,
        eps1,
        k_cal: max_theta.max(1.0 / iota0),
    })
}

/// ι₀ from the curvature bound and pairwise normal-line crossings.
fn injectivity_radius(pos: &[[f64; 2]], normal: &[[f64; 2]], theta: &[f64]) -> f64 {
    let n = pos.len();
    let max_theta = theta.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let mut best = if max_theta > 0.0 { 1.0 / max_theta } else { f64::INFINITY };
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (normal[i], normal[j]);
            let d = [pos[j][0] - pos[i][0], pos[j][1] - pos[i][1]];
            let det = -a[0] * b[1] + a[1] * b[0];
            let chord = d[0].hypot(d[1]);
            if det.abs() < 1e-12 {
                // parallel normals: a bottleneck if the chord runs along them
                let off = (d[0] * a[1] - d[1] * a[0]).abs();
                if off < 1e-9 * chord.max(1e-300) {
                    best = best.min(0.5 * chord);
                }
                continue;
            }
            // t a - s b = d
            let t = (-d[0] * b[1] + d[1] * b[0]) / det;
            let s = (a[0] * d[1] - a[1] * d[0]) / det;
            best = best.min(t.abs().max(s.abs()));
        }
    }
    best
}

/// ι₁(ε₁): infimum of |x̄₁ − x̄₂| over pairs whose normals differ by more
/// than ε₁, on a four-times refined sampling.
fn normal_variation_radius(curve: &ClosedCurve, eps1: f64) -> f64 {
    let m = 4 * curve.n_nodes();
    let ip = curve.interpolant();
    let mut pts = Vec::with_capacity(m);
    let mut nor = Vec::with_capacity(m);
    for t in fourier::angles(m) {
        let p = ip.eval(t, 0);
        let d = ip.eval(t, 1);
        let s = d[0].hypot(d[1]);
        pts.push(p);
        nor.push([d[1] / s, -d[0] / s]);
    }
    let mut best = f64::INFINITY;
    for i in 0..m {
        for j in i + 1..m {
            let dn = (nor[i][0] - nor[j][0]).hypot(nor[i][1] - nor[j][1]);
            if dn > eps1 {
                let dx = (pts[i][0] - pts[j][0]).hypot(pts[i][1] - pts[j][1]);
                best = best.min(dx);
            }
        }
    }
    best
}

/// Nearest-point data for one query point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nearest {
    /// Distance d ≥ 0 to the curve.
    pub d: f64,
    /// Nearest boundary point x̄.
    pub point: [f64; 2],
    /// Curve parameter of x̄.
    pub param: f64,
    /// Outward unit normal at x̄.
    pub normal: [f64; 2],
    /// Outside the tubular neighbourhood of half-width ι₀, or the minimiser
    /// is not unique.
    pub far: bool,
}

/// Distance to `curve` for each point, with the nearest boundary point.
pub fn signed_distance(curve: &ClosedCurve, points: &[[f64; 2]]) -> Result<Vec<Nearest>> {
    let geom = compute_geometry(curve)?;
    Ok(nearest_points(curve, geom.iota0, points))
}

/// As [`signed_distance`] with a precomputed ι₀.
pub fn nearest_points(curve: &ClosedCurve, iota0: f64, points: &[[f64; 2]]) -> Vec<Nearest> {
    let ip = curve.interpolant();
    let m = 8 * curve.n_nodes();
    let ts = fourier::angles(m);
    let samples: Vec<[f64; 2]> = ts.iter().map(|&t| ip.eval(t, 0)).collect();
    points
        .iter()
        .map(|p| nearest_one(&ip, &ts, &samples, iota0, *p))
        .collect()
}

fn newton_param(ip: &CurveInterpolant, p: [f64; 2], mut t: f64, h: f64) -> f64 {
    for _ in 0..30 {
        let x = ip.eval(t, 0);
        let d1 = ip.eval(t, 1);
        let d2 = ip.eval(t, 2);
        let r = [x[0] - p[0], x[1] - p[1]];
        let f = r[0] * d1[0] + r[1] * d1[1];
        let fp = d1[0] * d1[0] + d1[1] * d1[1] + r[0] * d2[0] + r[1] * d2[1];
        if fp <= 0.0 {
            break;
        }
        let step = (f / fp).clamp(-h, h);
        t -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    t.rem_euclid(2.0 * PI)
}

fn nearest_one(
    ip: &CurveInterpolant,
    ts: &[f64],
    samples: &[[f64; 2]],
    iota0: f64,
    p: [f64; 2],
) -> Nearest {
    let m = samples.len();
    let dist2: Vec<f64> = samples
        .iter()
        .map(|s| (s[0] - p[0]).powi(2) + (s[1] - p[1]).powi(2))
        .collect();
    // local minima of the sampled squared distance
    let mut minima: Vec<usize> = (0..m)
        .filter(|&i| dist2[i] <= dist2[(i + m - 1) % m] && dist2[i] <= dist2[(i + 1) % m])
        .collect();
    minima.sort_by(|&a, &b| dist2[a].total_cmp(&dist2[b]));
    let h = 2.0 * PI / m as f64;
    let mut candidates: Vec<(f64, f64)> = minima
        .iter()
        .take(4)
        .map(|&i| {
            let t = newton_param(ip, p, ts[i], h);
            let x = ip.eval(t, 0);
            ((x[0] - p[0]).hypot(x[1] - p[1]), t)
        })
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (d, t) = candidates[0];
    let all_equal = minima.len() == m;
    let ambiguous = all_equal
        || candidates.iter().skip(1).any(|&(d2, t2)| {
            let sep = (t2 - t).rem_euclid(2.0 * PI).min((t - t2).rem_euclid(2.0 * PI));
            sep > 4.0 * h && (d2 - d).abs() <= 1e-9 * (1.0 + d)
        });
    let x = ip.eval(t, 0);
    let dx = ip.eval(t, 1);
    let s = dx[0].hypot(dx[1]);
    Nearest {
        d,
        point: x,
        param: t,
        normal: [dx[1] / s, -dx[0] / s],
        far: ambiguous || d > iota0 * (1.0 + 1e-6),
    }
}

/// Orthogonal projection Π onto the tangent line: every index contracted
/// with γ. `t` holds rank-r Cartesian components per boundary node in the
/// storage order of [`crate::tensor::TensorField`].
pub fn project_tangential(
    t: &crate::tensor::TensorField,
    geom: &InterfaceGeometry,
) -> Result<crate::tensor::TensorField> {
    if t.n != geom.n_nodes() {
        return Err(Error::Shape(format!(
            "boundary tensor has {} nodes, geometry has {}",
            t.n,
            geom.n_nodes()
        )));
    }
    let r = t.rank;
    let mut out = t.clone();
    for slot in 0..r {
        let src = out.clone();
        for c in 0..t.n_comp() {
            let a = (c >> (r - 1 - slot)) & 1;
            for k in 0..t.n {
                let mut v = 0.0;
                for b in 0..2 {
                    let cb = (c & !(1 << (r - 1 - slot))) | (b << (r - 1 - slot));
                    v += geom.gamma[k][a][b] * src.get(cb, k);
                }
                out.comp_mut(c)[k] = v;
            }
        }
    }
    Ok(out)
}

/// The C^∞ plateau profile: 1 for d < d0/4, 0 for d > d0/2.
pub fn eta_profile(d: f64, d0: f64) -> f64 {
    let lo = 0.25 * d0;
    let hi = 0.5 * d0;
    if d <= lo {
        return 1.0;
    }
    if d >= hi {
        return 0.0;
    }
    let s = (hi - d) / (hi - lo);
    let f = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    f(s) / (f(s) + f(1.0 - s))
}

/// q^{ij} = δ^{ij} − η(d)² n^i n^j on a set of interior points.
#[derive(Debug, Clone)]
pub struct CutoffCometric {
    pub d0: f64,
    pub dist: Vec<f64>,
    pub eta: Vec<f64>,
    pub normal: Vec<[f64; 2]>,
    pub q_upper: Vec<[[f64; 2]; 2]>,
}

impl CutoffCometric {
    /// Q-contraction of two rank-r Cartesian tensors at node k: one q per index.
    pub fn contract(&self, k: usize, r: usize, a: &[f64], b: &[f64]) -> f64 {
        // a, b hold the 2^r components at node k
        let q = self.q_upper[k];
        let nc = 1usize << r;
        let mut s = 0.0;
        for ca in 0..nc {
            if a[ca] == 0.0 {
                continue;
            }
            for cb in 0..nc {
                let mut w = 1.0;
                for slot in 0..r {
                    let ia = (ca >> (r - 1 - slot)) & 1;
                    let ib = (cb >> (r - 1 - slot)) & 1;
                    w *= q[ia][ib];
                }
                s += w * a[ca] * b[cb];
            }
        }
        s
    }
}

pub fn cutoff_cometric(
    curve: &ClosedCurve,
    geom: &InterfaceGeometry,
    points: &[[f64; 2]],
    d0: f64,
) -> Result<CutoffCometric> {
    if !(d0 > 0.0) || d0 >= geom.iota0 {
        return Err(Error::Config(format!(
            "cutoff width d0 = {d0} must lie in (0, iota0 = {})",
            geom.iota0
        )));
    }
    let near = nearest_points(curve, geom.iota0, points);
    let mut dist = Vec::with_capacity(points.len());
    let mut eta = Vec::with_capacity(points.len());
    let mut normal = Vec::with_capacity(points.len());
    let mut q_upper = Vec::with_capacity(points.len());
    for nr in &near {
        let e = eta_profile(nr.d, d0);
        let n = nr.normal;
        dist.push(nr.d);
        eta.push(e);
        normal.push(n);
        let e2 = e * e;
        q_upper.push([
            [1.0 - e2 * n[0] * n[0], -e2 * n[0] * n[1]],
            [-e2 * n[1] * n[0], 1.0 - e2 * n[1] * n[1]],
        ]);
    }
    Ok(CutoffCometric {
        d0,
        dist,
        eta,
        normal,
        q_upper,
    })
}

/// JSON geometry report: per-node arrays and scalar summaries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeometryReport {
    pub n_nodes: usize,
    pub is_fixed: bool,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub normal_x: Vec<f64>,
    pub normal_y: Vec<f64>,
    pub theta: Vec<f64>,
    pub iota0: f64,
    pub iota1: f64,
    pub eps1: f64,
    #[serde(rename = "K")]
    pub k_cal: f64,
}

impl From<&InterfaceGeometry> for GeometryReport {
    fn from(g: &InterfaceGeometry) -> Self {
        Self {
            n_nodes: g.n_nodes(),
            is_fixed: g.is_fixed,
            x: g.positions.iter().map(|p| p[0]).collect(),
            y: g.positions.iter().map(|p| p[1]).collect(),
            normal_x: g.normal.iter().map(|p| p[0]).collect(),
            normal_y: g.normal.iter().map(|p| p[1]).collect(),
            theta: g.theta.clone(),
            iota0: g.iota0,
            iota1: g.iota1,
            eps1: g.eps1,
            k_cal: g.k_cal,
        }
    }
}
