//! Synthetic test data: a family of smooth domains, analytic flows and
//! seeded band-limited fields.

use crate::error::{Error, Result};
use crate::kinematics::{pullback_metric, FlowMap, MetricState};
use crate::spectral::Frame;
use crate::tensor::{Domain, TensorField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// Seeded generator, decorrelated per check by `salt`.
pub fn rng(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ salt)
}

/// Σ a_k cos(k·x + φ_k) over a few integer wavevectors with |k|∞ ≤ kmax.
#[derive(Debug, Clone)]
pub struct BandLimited {
    pub terms: Vec<([f64; 2], f64, f64)>,
}

impl BandLimited {
    pub fn random(rng: &mut ChaCha8Rng, kmax: i32, n_terms: usize) -> Self {
        let terms = (0..n_terms)
            .map(|_| {
                let k = [
                    rng.gen_range(-kmax..=kmax) as f64,
                    rng.gen_range(-kmax..=kmax) as f64,
                ];
                let amp = rng.gen_range(-1.0..1.0) / (1.0 + k[0].abs() + k[1].abs());
                let phase = rng.gen_range(0.0..std::f64::consts::TAU);
                (k, amp, phase)
            })
            .collect();
        Self { terms }
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        self.terms
            .iter()
            .map(|(k, a, p)| a * (k[0] * x[0] + k[1] * x[1] + p).cos())
            .sum()
    }

    pub fn sample(&self, frame: &Frame) -> Vec<f64> {
        (0..frame.n_nodes())
            .map(|k| self.eval([frame.pos[0][k], frame.pos[1][k]]))
            .collect()
    }
}

/// Random band-limited Cartesian vector field sampled on a frame.
pub fn random_vector(frame: &Frame, rng: &mut ChaCha8Rng, kmax: i32) -> [Vec<f64>; 2] {
    let a = BandLimited::random(rng, kmax, 6);
    let b = BandLimited::random(rng, kmax, 6);
    [a.sample(frame), b.sample(frame)]
}

/// Smooth, orientation-preserving deformation of the unit disk.
pub fn disk_shape(z: [f64; 2]) -> [f64; 2] {
    [
        z[0] + 0.15 * z[0] * z[0] - 0.1 * z[1] * z[1],
        z[1] + 0.1 * z[0] * z[1],
    ]
}

/// Deformed disk with `n` nodes across the diameter and `n` angles.
pub fn disk_family(n: usize) -> Result<Frame> {
    Frame::mapped_disk(n, n, disk_shape)
}

/// Off-centre, three-lobed inner boundary of the vacuum test annulus.
pub fn annulus_inner(theta: f64) -> [f64; 2] {
    let r = 1.0 + 0.08 * (3.0 * theta).cos();
    [0.15 + r * theta.cos(), 0.05 + r * theta.sin()]
}

pub const ANNULUS_WALL: f64 = 2.0;

/// Annulus between [`annulus_inner`] and the wall circle, `n/2` rings.
pub fn annulus_family(n: usize) -> Result<Frame> {
    let gamma: Vec<[f64; 2]> = crate::spectral::fourier::angles(n)
        .into_iter()
        .map(annulus_inner)
        .collect();
    Frame::blended_annulus((n / 2).max(4), &gamma, ANNULUS_WALL)
}

/// A time-dependent particle map x(t, y) with its velocity ∂ₜx(t, y).
pub trait Flow: Sync {
    fn position(&self, t: f64, y: [f64; 2]) -> [f64; 2];
    fn velocity(&self, t: f64, y: [f64; 2]) -> [f64; 2];
}

/// x = y + amp·sin t·V(y) for a fixed smooth V; not volume preserving.
#[derive(Debug, Clone, Copy)]
pub struct ShearFlow {
    pub amp: f64,
}

impl ShearFlow {
    fn shape(y: [f64; 2]) -> [f64; 2] {
        [
            0.2 * y[1].sin() + 0.1 * y[0] * y[1],
            0.15 * y[0].cos() - 0.05 * y[1] * y[1],
        ]
    }
}

impl Default for ShearFlow {
    fn default() -> Self {
        Self { amp: 1.0 }
    }
}

impl Flow for ShearFlow {
    fn position(&self, t: f64, y: [f64; 2]) -> [f64; 2] {
        let v = Self::shape(y);
        let s = self.amp * t.sin();
        [y[0] + s * v[0], y[1] + s * v[1]]
    }
    fn velocity(&self, t: f64, y: [f64; 2]) -> [f64; 2] {
        let v = Self::shape(y);
        let s = self.amp * t.cos();
        [s * v[0], s * v[1]]
    }
}

/// Rotation about the origin at angular speed ω.
#[derive(Debug, Clone, Copy)]
pub struct RigidRotation {
    pub omega: f64,
}

impl Flow for RigidRotation {
    fn position(&self, t: f64, y: [f64; 2]) -> [f64; 2] {
        let (s, c) = (self.omega * t).sin_cos();
        [c * y[0] - s * y[1], s * y[0] + c * y[1]]
    }
    fn velocity(&self, t: f64, y: [f64; 2]) -> [f64; 2] {
        let x = self.position(t, y);
        [-self.omega * x[1], self.omega * x[0]]
    }
}

/// x = eᵗ y, so v = x.
#[derive(Debug, Clone, Copy)]
pub struct RadialExpansion;

impl Flow for RadialExpansion {
    fn position(&self, t: f64, y: [f64; 2]) -> [f64; 2] {
        [t.exp() * y[0], t.exp() * y[1]]
    }
    fn velocity(&self, t: f64, y: [f64; 2]) -> [f64; 2] {
        self.position(t, y)
    }
}

/// Nodes of a frame as points.
pub fn points(frame: &Frame) -> Vec<[f64; 2]> {
    (0..frame.n_nodes())
        .map(|k| [frame.pos[0][k], frame.pos[1][k]])
        .collect()
}

/// Evaluate a Cartesian vector function at the nodes of a frame.
pub fn sample_vector(frame: &Frame, f: impl Fn([f64; 2]) -> [f64; 2]) -> [Vec<f64>; 2] {
    let v: Vec<[f64; 2]> = points(frame).into_iter().map(f).collect();
    [v.iter().map(|p| p[0]).collect(), v.iter().map(|p| p[1]).collect()]
}

pub fn flow_map(flow: &dyn Flow, labels: &Arc<Frame>, domain: Domain, t: f64) -> Result<FlowMap> {
    let pos = sample_vector(labels, |y| flow.position(t, y));
    FlowMap::new(domain, labels.clone(), pos, t)
}

/// Covariant velocity u_a = ∂ₜx^i ∂x^i/∂y^a on a map of `flow` at its time.
pub fn flow_velocity(flow: &dyn Flow, map: &FlowMap) -> TensorField {
    let v = sample_vector(&map.labels, |y| flow.velocity(map.t, y));
    map.to_covariant([&v[0], &v[1]])
}

/// Largest |g₁₂ − g₂₁| relative to max |g|.
pub fn metric_asymmetry(m: &MetricState) -> f64 {
    let scale = m.g.iter().flatten().flatten().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    m.g[0][1]
        .iter()
        .zip(&m.g[1][0])
        .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()))
        / scale
}

/// Pulled-back metric, optionally corrupted by an antisymmetric part, and
/// rejected unless symmetric to 1e-12.
pub fn checked_metric(map: &FlowMap, corrupt: bool) -> Result<MetricState> {
    let mut m = pullback_metric(map)?;
    if corrupt {
        let mut g = m.g.clone();
        for (k, v) in g[0][1].iter_mut().enumerate() {
            *v += 0.05 * (1.0 + (k % 7) as f64 / 7.0);
        }
        m = MetricState::from_components(map.labels.clone(), g)?;
    }
    let asym = metric_asymmetry(&m);
    if asym > 1e-12 {
        return Err(Error::Invariant(format!(
            "metric is not symmetric: relative |g12 - g21| = {asym:e}"
        )));
    }
    Ok(m)
}
