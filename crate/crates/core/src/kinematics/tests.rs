use super::*;
use crate::spectral::Frame;
use crate::tensor::{Domain, TensorField};
use std::sync::Arc;

fn labels(nd: usize, nt: usize) -> Arc<Frame> {
    Arc::new(Frame::disk(nd, nt, 1.0).unwrap())
}

fn map_from<F: Fn([f64; 2]) -> [f64; 2]>(lab: &Arc<Frame>, f: F, t: f64) -> FlowMap {
    let n = lab.n_nodes();
    let mut pos = [vec![0.0; n], vec![0.0; n]];
    for k in 0..n {
        let x = f([lab.pos[0][k], lab.pos[1][k]]);
        pos[0][k] = x[0];
        pos[1][k] = x[1];
    }
    FlowMap::new(Domain::Plasma, lab.clone(), pos, t).unwrap()
}

fn shear(t: f64) -> impl Fn([f64; 2]) -> [f64; 2] {
    move |y| [y[0] + t * y[1], y[1]]
}

// det = 1, non-constant metric
fn wavy(eps: f64) -> impl Fn([f64; 2]) -> [f64; 2] {
    move |y| [y[0] + eps * (2.0 * y[1]).sin(), y[1] + eps * (y[0] + eps * (2.0 * y[1]).sin()).cos()]
}

fn max_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn translation_step() {
    let lab = labels(16, 16);
    let m = FlowMap::identity(Domain::Plasma, lab.clone());
    let next = advance_map(&m, |_, _| [1.0, 0.0], 0.1, 1e-12).unwrap();
    for k in 0..lab.n_nodes() {
        assert!((next.current.pos[0][k] - lab.pos[0][k] - 0.1).abs() < 1e-14);
        assert!((next.current.pos[1][k] - lab.pos[1][k]).abs() < 1e-14);
    }
    assert!((next.t - 0.1).abs() < 1e-15);
}

#[test]
fn zero_velocity_is_fixed_point() {
    let lab = labels(16, 16);
    let m = FlowMap::identity(Domain::Plasma, lab.clone());
    let next = advance_map(&m, |_, _| [0.0, 0.0], 0.3, 1e-12).unwrap();
    assert_eq!(next.current.pos, lab.pos);
}

#[test]
fn rotation_step_matches_exact_solution() {
    let lab = labels(16, 16);
    let w = 2.0;
    let dt = 0.05;
    let m = FlowMap::identity(Domain::Plasma, lab.clone());
    let next = advance_map(&m, |_, x| [-w * x[1], w * x[0]], dt, 1e-6).unwrap();
    let (c, s) = ((w * dt).cos(), (w * dt).sin());
    let mut err: f64 = 0.0;
    for k in 0..lab.n_nodes() {
        let (x, y) = (lab.pos[0][k], lab.pos[1][k]);
        err = err.max((next.current.pos[0][k] - (c * x - s * y)).abs());
        err = err.max((next.current.pos[1][k] - (s * x + c * y)).abs());
    }
    // local error (ω dt)⁵/120 at unit radius
    assert!(err < 1.5 * (w * dt).powi(5) / 120.0, "{err}");
}

#[test]
fn rotation_keeps_unit_determinant() {
    let lab = labels(12, 12);
    let mut m = FlowMap::identity(Domain::Plasma, lab);
    for _ in 0..1000 {
        m = advance_map(&m, |_, x| [-x[1], x[0]], 0.01, 1e-10).unwrap();
    }
    assert!(m.det_drift() <= 1e-10, "{}", m.det_drift());
}

#[test]
fn compressive_flow_is_rejected() {
    let lab = labels(12, 12);
    let m = FlowMap::identity(Domain::Plasma, lab);
    let r = advance_map(&m, |_, x| [x[0], x[1]], 0.1, 1e-8);
    assert!(matches!(r, Err(Error::Incompressibility { .. })));
}

#[test]
fn identity_metric_is_flat() {
    let lab = labels(16, 16);
    let g = pullback_metric(&FlowMap::identity(Domain::Plasma, lab)).unwrap();
    g.validate(1e-12).unwrap();
    for k in 0..g.n_nodes() {
        assert!((g.g[0][0][k] - 1.0).abs() < 1e-13 && g.g[0][1][k].abs() < 1e-13);
        for c in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    assert!(g.chr[c][a][b][k].abs() < 1e-11);
                }
            }
        }
    }
}

#[test]
fn rotation_metric_is_flat() {
    let lab = labels(16, 16);
    let (c, s) = (0.3f64.cos(), 0.3f64.sin());
    let m = map_from(&lab, |y| [c * y[0] - s * y[1], s * y[0] + c * y[1]], 0.0);
    let g = pullback_metric(&m).unwrap();
    for k in 0..g.n_nodes() {
        assert!((g.g[0][0][k] - 1.0).abs() < 1e-12);
        assert!((g.g[1][1][k] - 1.0).abs() < 1e-12);
        assert!(g.g[0][1][k].abs() < 1e-12);
    }
}

#[test]
fn shear_metric() {
    let lab = labels(16, 16);
    let t = 0.7;
    let g = pullback_metric(&map_from(&lab, shear(t), t)).unwrap();
    g.validate(1e-12).unwrap();
    for k in 0..g.n_nodes() {
        assert!((g.g[0][0][k] - 1.0).abs() < 1e-12);
        assert!((g.g[0][1][k] - t).abs() < 1e-12);
        assert!((g.g[1][1][k] - (1.0 + t * t)).abs() < 1e-12);
    }
}

#[test]
fn christoffels_agree_with_pushforward_route() {
    let lab = labels(24, 32);
    let m = map_from(&lab, wavy(0.1), 0.0);
    let g = pullback_metric(&m).unwrap();
    let chr = christoffel_pushforward(&m);
    let mut scale: f64 = 0.0;
    for c in 0..2 {
        for a in 0..2 {
            for b in 0..2 {
                scale = scale.max(chr[c][a][b].iter().fold(0.0, |s, v| s.max(v.abs())));
                assert!(max_err(&g.chr[c][a][b], &chr[c][a][b]) < 1e-9);
            }
        }
    }
    assert!(scale > 0.05);
}

#[test]
fn gradient_of_coordinate() {
    let lab = labels(16, 16);
    let g = pullback_metric(&FlowMap::identity(Domain::Plasma, lab.clone())).unwrap();
    let q = TensorField::scalar(Domain::Plasma, lab.pos[0].clone());
    let d = covariant_derivative(&q, &g).unwrap();
    for k in 0..q.n {
        assert!((d.get(0, k) - 1.0).abs() < 1e-12 && d.get(1, k).abs() < 1e-12);
    }
}

#[test]
fn flat_second_derivatives_commute() {
    let lab = labels(20, 24);
    let g = pullback_metric(&FlowMap::identity(Domain::Plasma, lab.clone())).unwrap();
    let u = TensorField::vector(
        Domain::Plasma,
        [
            (0..lab.n_nodes()).map(|k| (lab.pos[0][k] * lab.pos[1][k]).sin()).collect(),
            (0..lab.n_nodes()).map(|k| lab.pos[0][k].exp() * lab.pos[1][k]).collect(),
        ],
    );
    let dd = covariant_derivative(&covariant_derivative(&u, &g).unwrap(), &g).unwrap();
    for c in 0..2 {
        assert!(max_err(dd.at(&[0, 1, c]), dd.at(&[1, 0, c])) < 1e-9);
    }
}

#[test]
fn covariant_hessian_matches_finite_differences() {
    // Q(x) = q(y(x)); ∇_a∇_b q = F^i_a F^j_b ∂_i∂_j Q because the metric is flat.
    let lab = labels(24, 32);
    let eps = 0.1;
    let fwd = wavy(eps);
    let m = map_from(&lab, &fwd, 0.0);
    let g = pullback_metric(&m).unwrap();
    let qf = |y: [f64; 2]| y[0] * y[1];
    let q = TensorField::scalar(
        Domain::Plasma,
        (0..lab.n_nodes()).map(|k| qf([lab.pos[0][k], lab.pos[1][k]])).collect(),
    );
    let hess = covariant_derivative(&covariant_derivative(&q, &g).unwrap(), &g).unwrap();
    // invert x(y) by Newton
    let inv = |x: [f64; 2], y0: [f64; 2]| {
        let mut y = y0;
        for _ in 0..50 {
            let r = fwd(y);
            let h = 1e-7;
            let a = fwd([y[0] + h, y[1]]);
            let b = fwd([y[0], y[1] + h]);
            let j = [[(a[0] - r[0]) / h, (b[0] - r[0]) / h], [(a[1] - r[1]) / h, (b[1] - r[1]) / h]];
            let d = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            let e = [x[0] - r[0], x[1] - r[1]];
            y[0] += (j[1][1] * e[0] - j[0][1] * e[1]) / d;
            y[1] += (-j[1][0] * e[0] + j[0][0] * e[1]) / d;
        }
        y
    };
    let h = 1e-3;
    let mut err: f64 = 0.0;
    for k in (0..lab.n_nodes()).step_by(7) {
        let y0 = [lab.pos[0][k], lab.pos[1][k]];
        let x0 = fwd(y0);
        let qq = |dx: f64, dy: f64| qf(inv([x0[0] + dx, x0[1] + dy], y0));
        let c = qq(0.0, 0.0);
        let hxx = (qq(h, 0.0) - 2.0 * c + qq(-h, 0.0)) / (h * h);
        let hyy = (qq(0.0, h) - 2.0 * c + qq(0.0, -h)) / (h * h);
        let hxy = (qq(h, h) - qq(h, -h) - qq(-h, h) + qq(-h, -h)) / (4.0 * h * h);
        let hx = [[hxx, hxy], [hxy, hyy]];
        for a in 0..2 {
            for b in 0..2 {
                let mut s = 0.0;
                for i in 0..2 {
                    for j in 0..2 {
                        s += m.f[i][a][k] * m.f[j][b][k] * hx[i][j];
                    }
                }
                err = err.max((s - hess.get(TensorField::flat(&[a, b]), k)).abs());
            }
        }
    }
    assert!(err < 1e-5, "{err}");
}

#[test]
fn material_derivative_examples() {
    let f = TensorField::scalar(Domain::Plasma, vec![1.0, -2.0, 3.5]);
    let series: Vec<_> = (0..3).map(|i| (0.1 * i as f64, f.clone())).collect();
    let (t, d) = material_derivative_field(&series).unwrap();
    assert!((t - 0.1).abs() < 1e-15 && d.max_abs() == 0.0);

    let series: Vec<_> = (0..2)
        .map(|i| {
            let t = 0.5 + 0.25 * i as f64;
            (t, f.scaled(t))
        })
        .collect();
    let (_, d) = material_derivative_field(&series).unwrap();
    assert!(d.max_diff(&f) < 1e-14);

    assert!(matches!(
        material_derivative_field(&series[..1]),
        Err(Error::InsufficientHistory(_))
    ));
}

fn metric_tensor(g: &MetricState) -> TensorField {
    TensorField::from_components(
        2,
        Domain::Plasma,
        vec![g.g[0][0].clone(), g.g[0][1].clone(), g.g[1][0].clone(), g.g[1][1].clone()],
    )
    .unwrap()
}

#[test]
fn metric_rate_equals_symmetric_gradient_for_shear() {
    let lab = labels(16, 16);
    let (t, dt) = (0.4, 1e-3);
    let series: Vec<_> = [t - dt, t, t + dt]
        .iter()
        .map(|&s| (s, metric_tensor(&pullback_metric(&map_from(&lab, shear(s), s)).unwrap())))
        .collect();
    let (_, dg) = material_derivative_field(&series).unwrap();
    let m = map_from(&lab, shear(t), t);
    let metric = pullback_metric(&m).unwrap();
    // v = (x₂, 0)
    let u = m.to_covariant([&m.current.pos[1], &vec![0.0; m.n_nodes()]]);
    let rhs = symmetric_gradient(&u, &metric).unwrap();
    assert!(dg.max_diff(&rhs) < 1e-9, "{}", dg.max_diff(&rhs));
}

#[test]
fn perp_gradient_examples() {
    let lab = labels(16, 16);
    let g = pullback_metric(&FlowMap::identity(Domain::Plasma, lab.clone())).unwrap();
    let q = TensorField::scalar(Domain::Plasma, lab.pos[0].clone());
    let p = perp_gradient(&q, &g).unwrap();
    for k in 0..q.n {
        assert!(p.get(0, k).abs() < 1e-12 && (p.get(1, k) + 1.0).abs() < 1e-12);
    }
    let q = TensorField::scalar(
        Domain::Plasma,
        (0..q.n).map(|k| 0.5 * (lab.pos[0][k].powi(2) + lab.pos[1][k].powi(2))).collect(),
    );
    let p = perp_gradient(&q, &g).unwrap();
    for k in 0..q.n {
        assert!((p.get(0, k) - lab.pos[1][k]).abs() < 1e-12);
        assert!((p.get(1, k) + lab.pos[0][k]).abs() < 1e-12);
    }
}

#[test]
fn perp_gradient_of_harmonic_function_on_annulus() {
    let lab = Arc::new(Frame::annulus(24, 32, 1.0, 2.0).unwrap());
    let g = pullback_metric(&FlowMap::identity(Domain::Vacuum, lab.clone())).unwrap();
    let q = TensorField::scalar(
        Domain::Vacuum,
        (0..lab.n_nodes())
            .map(|k| {
                let (x, y) = (lab.pos[0][k], lab.pos[1][k]);
                x * x - y * y + x / (x * x + y * y)
            })
            .collect(),
    );
    let p = perp_gradient(&q, &g).unwrap();
    let div = divergence(&p, &g).unwrap();
    let curl = lab.curl([p.comp(0), p.comp(1)]);
    let md = div.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mc = curl.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(md < 1e-9 && mc < 1e-9, "{md} {mc}");
}

#[test]
fn perp_gradient_is_pullback_of_eulerian_perp() {
    let lab = labels(24, 32);
    let fwd = wavy(0.1);
    let m = map_from(&lab, &fwd, 0.0);
    let g = pullback_metric(&m).unwrap();
    let q = TensorField::scalar(
        Domain::Plasma,
        (0..lab.n_nodes()).map(|k| (lab.pos[0][k] + 2.0 * lab.pos[1][k]).sin()).collect(),
    );
    // Eulerian gradient through the current frame
    let [qx, qy] = m.current.grad(&q.data);
    let euler = TensorField::vector(Domain::Plasma, [qy, qx.iter().map(|v| -v).collect()]);
    let expected = pull_back(&m, &euler);
    let got = perp_gradient(&q, &g).unwrap();
    assert!(got.max_diff(&expected) < 1e-9, "{}", got.max_diff(&expected));
    // round trip
    assert!(push_forward(&m, &expected).max_diff(&euler) < 1e-12);
}

#[test]
fn contraction_is_invariant() {
    let lab = labels(16, 16);
    let m = map_from(&lab, shear(0.5), 0.5);
    let g = pullback_metric(&m).unwrap();
    let n = lab.n_nodes();
    let a: Vec<f64> = (0..n).map(|k| lab.pos[0][k].cos()).collect();
    let b: Vec<f64> = (0..n).map(|k| lab.pos[1][k] + 0.3).collect();
    let e = TensorField::from_components(2, Domain::Plasma, vec![a.clone(), b.clone(), b.clone(), a.clone()]).unwrap();
    let cov = pull_back(&m, &e);
    let s = contract_full(&cov, &cov, &g).unwrap();
    for k in 0..n {
        let euclid = 2.0 * a[k] * a[k] + 2.0 * b[k] * b[k];
        assert!((s[k] - euclid).abs() < 1e-11);
    }
    let v = TensorField::vector(Domain::Plasma, [a.clone(), b.clone()]);
    let up = raise_index(&pull_back(&m, &v), &g);
    // u^a = ∂y^a/∂x^i v^i
    for k in 0..n {
        let e0 = m.finv[0][0][k] * a[k] + m.finv[0][1][k] * b[k];
        assert!((up[0][k] - e0).abs() < 1e-12);
    }
}

mod extension_tests {
    use super::*;

    #[test]
    fn zero_velocity_extends_to_zero() {
        let vac = Frame::annulus(12, 32, 1.0, 2.0).unwrap();
        let z = vec![0.0; 32];
        let (v, rep) = extend_velocity_to_vacuum([&z, &z], &vac, 1e-3).unwrap();
        assert_eq!(v.max_abs(), 0.0);
        assert_eq!(rep.sup_ratio, 0.0);
    }

    #[test]
    fn rotation_extends_azimuthally() {
        let vac = Frame::annulus(12, 32, 1.0, 2.0).unwrap();
        let th = crate::spectral::fourier::angles(32);
        let ux: Vec<f64> = th.iter().map(|t| -t.sin()).collect();
        let uy: Vec<f64> = th.iter().map(|t| t.cos()).collect();
        let (v, rep) = extend_velocity_to_vacuum([&ux, &uy], &vac, 1e-3).unwrap();
        assert!(rep.trace_error < 1e-12 && rep.max_divergence < 1e-10, "{rep:?}");
        assert!(rep.wall_speed < 1e-12);
        for k in 0..vac.n_nodes() {
            let (x, y) = (vac.pos[0][k], vac.pos[1][k]);
            let r = x.hypot(y);
            // radial component vanishes
            assert!((v.get(0, k) * x + v.get(1, k) * y).abs() / r < 1e-12);
        }
        // the stream-function oracle: ψ(r) = −χ(σ)σ(R_W − 1), v_φ = −ψ'(r)
        for i in 0..12 {
            let k = i * 32;
            let r = vac.pos[0][k];
            let sg = r - 1.0;
            let dpsi = -(cutoff(sg) + sg * (6.0 * sg * sg - 6.0 * sg));
            assert!((v.get(1, k) + dpsi).abs() < 1e-11);
        }
    }

    #[test]
    fn translation_normal_trace() {
        let vac = Frame::annulus(12, 32, 1.0, 2.5).unwrap();
        let th = crate::spectral::fourier::angles(32);
        let one = vec![1.0; 32];
        let zero = vec![0.0; 32];
        let (v, rep) = extend_velocity_to_vacuum([&one, &zero], &vac, 1e-3).unwrap();
        for (j, t) in th.iter().enumerate() {
            let vn = v.get(0, j) * t.cos() + v.get(1, j) * t.sin();
            assert!((vn - t.cos()).abs() < 1e-12);
        }
        assert!(rep.net_flux.abs() < 1e-12 && rep.max_divergence < 1e-9);
    }

    #[test]
    fn touching_wall_fails() {
        let vac = Frame::annulus(12, 32, 1.0, 1.0005).unwrap();
        let z = vec![0.0; 32];
        assert!(matches!(
            extend_velocity_to_vacuum([&z, &z], &vac, 1e-3),
            Err(Error::Geometry(_))
        ));
    }
}

#[test]
fn map_extension_agrees_on_identity() {
    let vac = Arc::new(Frame::annulus(16, 32, 1.0, 2.0).unwrap());
    let map = FlowMap::identity(Domain::Vacuum, vac.clone());
    let ug: [Vec<f64>; 2] = [
        (0..32).map(|j| (0.3 * vac.pos[1][j]).sin()).collect(),
        (0..32).map(|j| vac.pos[0][j] * vac.pos[1][j]).collect(),
    ];
    let (a, _) = extend_velocity_to_vacuum([&ug[0], &ug[1]], &vac, 1e-3).unwrap();
    let (b, rep) = extend_velocity_on_map([&ug[0], &ug[1]], &map, 1e-3).unwrap();
    assert!(a.max_diff(&b) < 1e-11);
    assert!(rep.trace_error < 1e-10 && rep.wall_speed < 1e-12);
}
