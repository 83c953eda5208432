//! Residuals of exact identities: Gauss, time derivatives of the metric,
//! commutators of D_t with covariant derivatives, boundary evolution, the
//! boundary projection identities and the pressure equation.

use super::fields::{checked_metric, flow_map, flow_velocity, sample_vector, Flow};
use crate::energy::derivative_stack;
use crate::error::Result;
use crate::geometry::{compute_geometry, ClosedCurve};
use crate::kinematics::{
    covariant_derivative, divergence, material_derivative_field, pullback_metric,
    symmetric_gradient, FlowMap, MetricState,
};
use crate::plasma::{pressure_problem, pressure_rhs, pressure_solve, EllipticSolver, PlasmaDerivatives, PlasmaState};
use crate::spectral::{fourier, Frame, Grid};
use crate::tensor::{index_tuples, Domain, TensorField};
use std::sync::Arc;

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Root mean square of all components over the label domain.
pub fn rms(frame: &Frame, t: &TensorField) -> f64 {
    let w = frame.area_weights();
    let area: f64 = w.iter().sum();
    let s: f64 = (0..t.n_comp())
        .map(|c| t.comp(c).iter().zip(&w).map(|(v, w)| w * v * v).sum::<f64>())
        .sum();
    (s / area).sqrt()
}

fn g_inv(m: &MetricState, k: usize) -> [[f64; 2]; 2] {
    [
        [m.g_inv[0][0][k], m.g_inv[0][1][k]],
        [m.g_inv[1][0][k], m.g_inv[1][1][k]],
    ]
}

fn nabla_pow(t: &TensorField, m: &MetricState, r: usize) -> Result<TensorField> {
    let mut out = t.clone();
    for _ in 0..r {
        out = covariant_derivative(&out, m)?;
    }
    Ok(out)
}

/// Raise the last index with g^{ab}.
fn raise_last(t: &TensorField, m: &MetricState) -> TensorField {
    let mut out = t.clone();
    for c in 0..t.n_comp() {
        let base = c & !1;
        let e = c & 1;
        let dst = out.comp_mut(c);
        for (k, v) in dst.iter_mut().enumerate() {
            *v = m.g_inv[e][0][k] * t.get(base, k) + m.g_inv[e][1][k] * t.get(base | 1, k);
        }
    }
    out
}

/// g^{ab} T_{ab…} over the first two indices.
fn trace_first(t: &TensorField, m: &MetricState) -> TensorField {
    let r = t.rank;
    let rest = 1usize << (r - 2);
    let mut out = TensorField::zeros(r - 2, t.domain, t.n);
    for c in 0..rest {
        let dst = out.comp_mut(c);
        for (k, v) in dst.iter_mut().enumerate() {
            let gi = g_inv(m, k);
            let mut s = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    s += gi[a][b] * t.get(((a << 1 | b) * rest) | c, k);
                }
            }
            *v = s;
        }
    }
    out
}

/// h^{ab} = g^{ac} h_cd g^{db} at node k from h_ab.
fn raise_both(h: &TensorField, m: &MetricState, k: usize) -> [[f64; 2]; 2] {
    let gi = g_inv(m, k);
    let mut out = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                for d in 0..2 {
                    out[a][b] += gi[a][c] * h.get(c << 1 | d, k) * gi[d][b];
                }
            }
        }
    }
    out
}

fn metric_field(m: &MetricState, domain: Domain) -> Result<TensorField> {
    TensorField::from_components(
        2,
        domain,
        vec![m.g[0][0].clone(), m.g[0][1].clone(), m.g[1][0].clone(), m.g[1][1].clone()],
    )
}

fn inverse_field(m: &MetricState, domain: Domain) -> Result<TensorField> {
    TensorField::from_components(
        2,
        domain,
        vec![
            m.g_inv[0][0].clone(),
            m.g_inv[0][1].clone(),
            m.g_inv[1][0].clone(),
            m.g_inv[1][1].clone(),
        ],
    )
}

fn centred(series: Vec<(f64, TensorField)>) -> Result<TensorField> {
    Ok(material_derivative_field(&series)?.1)
}

/// Boundary rings of a frame with the `is_fixed` flag of each curve.
fn boundary_rings(frame: &Frame) -> Vec<(usize, bool)> {
    match frame.grid.as_ref() {
        Grid::Disk(_) => vec![(0, false)],
        Grid::Annulus(g) => vec![(0, false), (g.n_rings() - 1, true)],
    }
}

/// |∫ ∇_a F^a dμ_g − sign ∮ N_a F^a dμ_γ| for a Cartesian field F, with the
/// conormal outward from Ω⁺ on Γ and inward on W, and sign −1 on Ω⁻.
pub fn gauss_residual(
    map: &FlowMap,
    metric: &MetricState,
    field: &dyn Fn([f64; 2]) -> [f64; 2],
) -> Result<f64> {
    let x = &map.current;
    let v = sample_vector(x, field);
    let f = map.to_covariant([&v[0], &v[1]]);
    let lhs = metric.integrate(&divergence(&f, metric)?);
    let nt = x.grid.n_theta();
    let mut flux = 0.0;
    for (i, fixed) in boundary_rings(x) {
        let geom = compute_geometry(&ClosedCurve::new(x.ring(i), fixed)?)?;
        for j in 0..nt {
            let n = geom.domain_normal(j);
            let k = i * nt + j;
            flux += geom.arc_weights[j] * (n[0] * v[0][k] + n[1] * v[1][k]);
        }
    }
    let sign = if map.domain == Domain::Vacuum { -1.0 } else { 1.0 };
    Ok((lhs - sign * flux).abs())
}

/// Residuals of the metric rates D_t g_ab = 2h_ab, D_t g^{ab} = −2h^{ab} and
/// D_t dμ_g = tr h dμ_g by centred differences at t₀ ± dt.
#[derive(Debug, Clone, Copy)]
pub struct MetricRate {
    pub metric: f64,
    pub inverse: f64,
    pub volume: f64,
}

impl MetricRate {
    pub fn max(&self) -> f64 {
        self.metric.max(self.inverse).max(self.volume)
    }
}

pub fn metric_rate(
    flow: &dyn Flow,
    labels: &Arc<Frame>,
    t0: f64,
    dt: f64,
    corrupt: bool,
) -> Result<MetricRate> {
    let dom = Domain::Plasma;
    let mut gs = Vec::new();
    let mut gis = Vec::new();
    let mut vols = Vec::new();
    let mut mid = None;
    for t in [t0 - dt, t0, t0 + dt] {
        let map = flow_map(flow, labels, dom, t)?;
        let m = checked_metric(&map, corrupt)?;
        gs.push((t, metric_field(&m, dom)?));
        gis.push((t, inverse_field(&m, dom)?));
        vols.push((t, TensorField::scalar(dom, m.volume_element())));
        if t == t0 {
            mid = Some((flow_velocity(flow, &map), m));
        }
    }
    let (u, m) = mid.expect("middle level");
    let two_h = symmetric_gradient(&u, &m)?;
    let dg = centred(gs)?;
    let dgi = centred(gis)?;
    let dvol = centred(vols)?;
    let vol = m.volume_element();
    let n = u.n;
    let mut r = MetricRate {
        metric: dg.max_diff(&two_h),
        inverse: 0.0,
        volume: 0.0,
    };
    let h = two_h.scaled(0.5);
    for k in 0..n {
        let hu = raise_both(&h, &m, k);
        for a in 0..2 {
            for b in 0..2 {
                r.inverse = r.inverse.max((dgi.get(a << 1 | b, k) + 2.0 * hu[a][b]).abs());
            }
        }
        let gi = g_inv(&m, k);
        let tr: f64 = (0..4).map(|c| gi[c >> 1][c & 1] * h.get(c, k)).sum();
        r.volume = r.volume.max((dvol.data[k] - tr * vol[k]).abs());
    }
    Ok(r)
}

fn test_scalar(t: f64, x: [f64; 2]) -> f64 {
    (x[0] + 0.5 * t).sin() * (0.3 * x[1]).exp() + 0.2 * x[0] * x[1] * x[1]
}

fn test_covector(t: f64, x: [f64; 2]) -> [f64; 2] {
    [(x[1] - t).cos() + 0.3 * x[0] * x[0], x[0] * (t + x[1]).sin()]
}

/// Residuals of the commutators of D_t with covariant differentiation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Commutators {
    /// [D_t, ∇]q = 0.
    pub grad: f64,
    /// [D_t, ∇_a]T_b = −(∇_b∇_a u^d)T_d.
    pub covector: f64,
    /// [D_t, g^{ab}∇_a]T_b = −2h^{ab}∇_aT_b − (Δu^e)T_e.
    pub div: f64,
    /// [D_t, Δ]q = −2h^{ab}∇_a∇_b q − (Δu^e)∇_e q.
    pub laplacian: f64,
    /// [D_t, ∇^r]q against the symmetrised sum, r = 2.
    pub second: f64,
    /// Same for r = 3.
    pub third: f64,
}

fn permutations(r: usize) -> Vec<Vec<usize>> {
    if r == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(r - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, r - 1);
            out.push(q);
        }
    }
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// ((∇^{s+1}u)·∇^{r−s}q)_{a₁…a_r} averaged over all permutations of the
/// free indices; `du` carries the raised velocity index last.
fn sym_dot(du: &TensorField, dq: &TensorField, r: usize, s: usize) -> TensorField {
    let perms = permutations(r);
    let norm = 1.0 / perms.len() as f64;
    let mut out = TensorField::zeros(r, du.domain, du.n);
    for (c, a) in index_tuples(r).iter().enumerate() {
        let dst = out.comp_mut(c);
        for p in &perms {
            let pa: Vec<usize> = p.iter().map(|&i| a[i]).collect();
            for d in 0..2 {
                let mut iu = pa[..=s].to_vec();
                iu.push(d);
                let mut iq = vec![d];
                iq.extend_from_slice(&pa[s + 1..]);
                let cu = du.comp(TensorField::flat(&iu));
                let cq = dq.comp(TensorField::flat(&iq));
                for k in 0..dst.len() {
                    dst[k] += norm * cu[k] * cq[k];
                }
            }
        }
    }
    out
}

/// −Σ_{s=1}^{r−1} C(r, s+1) (∇^{s+1}u)·∇^{r−s}q.
pub fn higher_commutator(u: &TensorField, q: &TensorField, m: &MetricState, r: usize) -> Result<TensorField> {
    let mut out = TensorField::zeros(r, q.domain, q.n);
    for s in 1..r {
        let du = raise_last(&nabla_pow(u, m, s + 1)?, m);
        let dq = nabla_pow(q, m, r - s)?;
        out = out.axpy(-binomial(r, s + 1), &sym_dot(&du, &dq, r, s));
    }
    Ok(out)
}

pub fn commutators(
    flow: &dyn Flow,
    labels: &Arc<Frame>,
    t0: f64,
    dt: f64,
    corrupt: bool,
) -> Result<Commutators> {
    let dom = Domain::Plasma;
    struct Level {
        q: TensorField,
        w: TensorField,
        dq: TensorField,
        dw: TensorField,
        divw: TensorField,
        lap: TensorField,
        d2q: TensorField,
        d3q: TensorField,
    }
    let mut levels = Vec::new();
    let mut mid = None;
    for t in [t0 - dt, t0, t0 + dt] {
        let map = flow_map(flow, labels, dom, t)?;
        let m = checked_metric(&map, corrupt)?;
        let x = &map.current;
        let q = TensorField::scalar(
            dom,
            (0..x.n_nodes()).map(|k| test_scalar(t, [x.pos[0][k], x.pos[1][k]])).collect(),
        );
        let wc = sample_vector(x, |p| test_covector(t, p));
        let w = map.to_covariant([&wc[0], &wc[1]]);
        let dq = covariant_derivative(&q, &m)?;
        let d2q = covariant_derivative(&dq, &m)?;
        let lv = Level {
            dw: covariant_derivative(&w, &m)?,
            divw: TensorField::scalar(dom, divergence(&w, &m)?),
            lap: trace_first(&d2q, &m),
            d3q: covariant_derivative(&d2q, &m)?,
            q,
            w,
            dq,
            d2q,
        };
        levels.push((t, lv));
        if t == t0 {
            mid = Some((flow_velocity(flow, &map), m));
        }
    }
    let (u, m) = mid.expect("middle level");
    let series = |f: &dyn Fn(&Level) -> &TensorField| -> Vec<(f64, TensorField)> {
        levels.iter().map(|(t, l)| (*t, f(l).clone())).collect()
    };
    let mid_level = &levels[1].1;
    let dtq = centred(series(&|l| &l.q))?;
    let dtw = centred(series(&|l| &l.w))?;
    let n = u.n;

    let h = symmetric_gradient(&u, &m)?.scaled(0.5);
    let ddu = raise_last(&nabla_pow(&u, &m, 2)?, &m);
    // Δu^e
    let lap_u = trace_first(&ddu, &m);

    let lhs = centred(series(&|l| &l.dw))?.axpy(-1.0, &covariant_derivative(&dtw, &m)?);
    let w0 = &mid_level.w;
    let mut rhs = TensorField::zeros(2, dom, n);
    for a in 0..2 {
        for b in 0..2 {
            let dst = rhs.comp_mut(a << 1 | b);
            for (k, v) in dst.iter_mut().enumerate() {
                *v = -(0..2)
                    .map(|d| ddu.get(TensorField::flat(&[b, a, d]), k) * w0.get(d, k))
                    .sum::<f64>();
            }
        }
    }
    let mut out = Commutators {
        grad: rms(labels, &centred(series(&|l| &l.dq))?.axpy(-1.0, &covariant_derivative(&dtq, &m)?)),
        covector: rms(labels, &lhs.axpy(-1.0, &rhs)),
        ..Default::default()
    };

    let div_lhs = centred(series(&|l| &l.divw))?;
    let div_dtw = divergence(&dtw, &m)?;
    let lap_lhs = centred(series(&|l| &l.lap))?;
    let lap_dtq = trace_first(&nabla_pow(&dtq, &m, 2)?, &m);
    let dw0 = &mid_level.dw;
    let d2q0 = &mid_level.d2q;
    let dq0 = &mid_level.dq;
    let mut e_div = vec![0.0; n];
    let mut e_lap = vec![0.0; n];
    for k in 0..n {
        let hu = raise_both(&h, &m, k);
        let contract = |t: &TensorField| -> f64 {
            (0..4).map(|c| hu[c >> 1][c & 1] * t.get(c, k)).sum()
        };
        let rhs_div = -2.0 * contract(dw0) - (0..2).map(|e| lap_u.get(e, k) * w0.get(e, k)).sum::<f64>();
        e_div[k] = div_lhs.data[k] - div_dtw[k] - rhs_div;
        let rhs_lap = -2.0 * contract(d2q0) - (0..2).map(|e| lap_u.get(e, k) * dq0.get(e, k)).sum::<f64>();
        e_lap[k] = lap_lhs.data[k] - lap_dtq.data[k] - rhs_lap;
    }
    out.div = rms(labels, &TensorField::scalar(dom, e_div));
    out.laplacian = rms(labels, &TensorField::scalar(dom, e_lap));

    let q0 = &mid_level.q;
    let lhs2 = centred(series(&|l| &l.d2q))?.axpy(-1.0, &nabla_pow(&dtq, &m, 2)?);
    out.second = rms(labels, &lhs2.axpy(-1.0, &higher_commutator(&u, q0, &m, 2)?));
    let lhs3 = centred(series(&|l| &l.d3q))?.axpy(-1.0, &nabla_pow(&dtq, &m, 3)?);
    out.third = rms(labels, &lhs3.axpy(-1.0, &higher_commutator(&u, q0, &m, 3)?));
    Ok(out)
}

/// Residuals of D_t N_a = h_NN N_a and D_t dμ_γ = (tr h − h_NN) dμ_γ on the
/// interface ring of a disk, by centred differences at fixed label.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryEvolution {
    pub normal: f64,
    pub area: f64,
}

pub fn boundary_evolution(
    flow: &dyn Flow,
    labels: &Arc<Frame>,
    t0: f64,
    dt: f64,
    corrupt: bool,
) -> Result<BoundaryEvolution> {
    let dom = Domain::Interface;
    let nt = labels.grid.n_theta();
    let mut normals = Vec::new();
    let mut speeds = Vec::new();
    let mut mid = None;
    for t in [t0 - dt, t0, t0 + dt] {
        let map = flow_map(flow, labels, Domain::Plasma, t)?;
        let m = checked_metric(&map, corrupt)?;
        let geom = compute_geometry(&ClosedCurve::new(map.current.ring(0), false)?)?;
        let mut na = [vec![0.0; nt], vec![0.0; nt]];
        for j in 0..nt {
            let n = geom.normal[j];
            for (a, v) in na.iter_mut().enumerate() {
                v[j] = map.f[0][a][j] * n[0] + map.f[1][a][j] * n[1];
            }
        }
        normals.push((t, TensorField::vector(dom, na.clone())));
        speeds.push((t, TensorField::scalar(dom, geom.speed.clone())));
        if t == t0 {
            mid = Some((flow_velocity(flow, &map), m, na, geom.speed));
        }
    }
    let (u, m, na, speed) = mid.expect("middle level");
    let h = symmetric_gradient(&u, &m)?.scaled(0.5);
    let dn = centred(normals)?;
    let ds = centred(speeds)?;
    let mut out = BoundaryEvolution { normal: 0.0, area: 0.0 };
    for j in 0..nt {
        let gi = g_inv(&m, j);
        let nu = [
            gi[0][0] * na[0][j] + gi[0][1] * na[1][j],
            gi[1][0] * na[0][j] + gi[1][1] * na[1][j],
        ];
        let mut hnn = 0.0;
        let mut tr = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                let hab = h.get(a << 1 | b, j);
                hnn += hab * nu[a] * nu[b];
                tr += gi[a][b] * hab;
            }
        }
        for (a, v) in na.iter().enumerate() {
            out.normal = out.normal.max((dn.get(a, j) - hnn * v[j]).abs());
        }
        out.area = out.area.max((ds.data[j] / speed[j] - (tr - hnn)).abs());
    }
    Ok(out)
}

/// Residuals of the tangential identities on the interface ring of `frame`:
/// ∇²q(τ,τ) = ∂_s²q + θ∇_N q and
/// ∇³q(τ,τ,τ) = ∂_s³q − 2θ²∂_s q + (∂_sθ)∇_N q + 3θ∂_s∇_N q.
#[derive(Debug, Clone, Copy)]
pub struct Projection {
    pub second: f64,
    pub third: f64,
}

pub fn projection(frame: &Frame, q: &[f64]) -> Result<Projection> {
    let nt = frame.grid.n_theta();
    let geom = compute_geometry(&ClosedCurve::new(frame.ring(0), false)?)?;
    let st = derivative_stack(frame, q, 3);
    let along = |v: &[f64]| -> Vec<f64> {
        fourier::derivative(v, 1)
            .iter()
            .zip(&geom.speed)
            .map(|(d, s)| d / s)
            .collect()
    };
    let f = q[..nt].to_vec();
    let fs = along(&f);
    let fss = along(&fs);
    let fsss = along(&fss);
    let qn: Vec<f64> = (0..nt)
        .map(|j| geom.normal[j][0] * st[1][0][j] + geom.normal[j][1] * st[1][1][j])
        .collect();
    let qn_s = along(&qn);
    let th_s = along(&geom.theta);
    let mut out = Projection { second: 0.0, third: 0.0 };
    for j in 0..nt {
        let tau = geom.tangent[j];
        let mut h2 = 0.0;
        for c in 0..4 {
            h2 += tau[c >> 1] * tau[c & 1] * st[2][c][j];
        }
        let mut h3 = 0.0;
        for c in 0..8 {
            h3 += tau[c >> 2] * tau[(c >> 1) & 1] * tau[c & 1] * st[3][c][j];
        }
        let th = geom.theta[j];
        let r2 = fss[j] + th * qn[j];
        let r3 = fsss[j] - 2.0 * th * th * fs[j] + th_s[j] * qn[j] + 3.0 * th * qn_s[j];
        out.second = out.second.max((h2 - r2).abs());
        out.third = out.third.max((h3 - r3).abs());
    }
    Ok(out)
}

/// Exact data for the pressure check: v = ∇⊥(e^{x₁}cos x₂),
/// H = ∇⊥(e^{x₂}cos x₁), q = (μe^{2x₂} − e^{2x₁})/2.
pub fn mms_fields(x: [f64; 2], mu: f64) -> ([f64; 2], [f64; 2], f64) {
    let (e1, e2) = (x[0].exp(), x[1].exp());
    let v = [-e1 * x[1].sin(), -e1 * x[1].cos()];
    let h = [e2 * x[0].cos(), e2 * x[0].sin()];
    (v, h, 0.5 * (mu * e2 * e2 - e1 * e1))
}

/// Plasma state on `map` with Cartesian velocity and field from closures.
pub fn plasma_on_map(map: FlowMap, v: [Vec<f64>; 2], h: [Vec<f64>; 2], mu: f64) -> PlasmaState {
    let u = map.to_covariant([&v[0], &v[1]]);
    let beta = map.to_covariant([&h[0], &h[1]]);
    let n = map.n_nodes();
    PlasmaState {
        map,
        u,
        beta,
        q_plus: vec![0.0; n],
        mu,
        h0: h,
        pressure_time: None,
    }
}

/// max |q⁺ − q_exact| after solving the pressure problem for the
/// manufactured fields on a deformed map.
pub fn pressure_mms(labels: &Arc<Frame>, flow: &dyn Flow, t: f64, mu: f64, corrupt: bool) -> Result<f64> {
    let map = flow_map(flow, labels, Domain::Plasma, t)?;
    let m = checked_metric(&map, corrupt)?;
    let x = map.current.clone();
    let nt = x.grid.n_theta();
    let data: Vec<_> = super::fields::points(&x).into_iter().map(|p| mms_fields(p, mu)).collect();
    let v = [data.iter().map(|d| d.0[0]).collect(), data.iter().map(|d| d.0[1]).collect()];
    let h = [data.iter().map(|d| d.1[0]).collect(), data.iter().map(|d| d.1[1]).collect()];
    let exact: Vec<f64> = data.iter().map(|d| d.2).collect();
    let state = plasma_on_map(map, v, h, mu);
    let d = PlasmaDerivatives::compute(&state, &m)?;
    let prob = pressure_problem(&state, &m, &d, &exact[..nt])?;
    let (q, _) = pressure_solve(&prob, &x, &EllipticSolver::for_frame(&x), None)?;
    Ok(max_abs(q.iter().zip(&exact).map(|(a, b)| a - b)))
}

/// max over interior nodes of |Δq⁺ + ∇_a u^b∇_b u^a − μ∇_aβ^b∇_bβ^a|, with
/// the Laplacian taken covariantly on the labels.
pub fn pressure_identity(state: &PlasmaState) -> Result<f64> {
    let m = pullback_metric(&state.map)?;
    let d = PlasmaDerivatives::compute(state, &m)?;
    let rhs = pressure_rhs(&d, &m, state.mu);
    let q = TensorField::scalar(Domain::Plasma, state.q_plus.clone());
    let lap = trace_first(&nabla_pow(&q, &m, 2)?, &m);
    let nt = state.map.labels.grid.n_theta();
    Ok(max_abs((nt..state.n_nodes()).map(|k| lap.data[k] - rhs[k])))
}
