use super::*;
use crate::kinematics::extend_velocity_to_vacuum;
use crate::spectral::AnnulusGrid;
use std::f64::consts::PI;

fn concentric(ns: usize, nt: usize) -> Arc<Frame> {
    Arc::new(Frame::annulus(ns, nt, 1.0, 2.0).unwrap())
}

/// Annulus between the circle |z − (cx,0)| = 1 and |z| = 2.
fn offset(ns: usize, nt: usize, cx: f64) -> Frame {
    let g = AnnulusGrid::new(ns, nt).unwrap();
    let mut pos = [vec![0.0; ns * nt], vec![0.0; ns * nt]];
    for i in 0..ns {
        let sg = g.sigma(i);
        for j in 0..nt {
            let th = g.theta()[j];
            let k = i * nt + j;
            pos[0][k] = (1.0 - sg) * (cx + th.cos()) + sg * 2.0 * th.cos();
            pos[1][k] = (1.0 - sg) * th.sin() + sg * 2.0 * th.sin();
        }
    }
    Frame::new(Arc::new(Grid::Annulus(g)), pos).unwrap()
}

fn rel_l2(frame: &Frame, a: &[Vec<f64>; 2], b: &[Vec<f64>; 2]) -> f64 {
    let n = frame.n_nodes();
    let num: Vec<f64> = (0..n).map(|k| (a[0][k] - b[0][k]).powi(2) + (a[1][k] - b[1][k]).powi(2)).collect();
    let den: Vec<f64> = (0..n).map(|k| b[0][k].powi(2) + b[1][k].powi(2)).collect();
    (frame.integrate(&num) / frame.integrate(&den)).sqrt()
}

fn azimuthal(frame: &Frame, c: f64) -> [Vec<f64>; 2] {
    let n = frame.n_nodes();
    let mut f = [vec![0.0; n], vec![0.0; n]];
    for k in 0..n {
        let (x, y) = (frame.pos[0][k], frame.pos[1][k]);
        let r2 = x * x + y * y;
        f[0][k] = -c * y / r2;
        f[1][k] = c * x / r2;
    }
    f
}

#[test]
fn concentric_circulation_gives_azimuthal_field() {
    let f = concentric(24, 32);
    let s = EllipticSolver::for_frame(&f);
    let c = 0.7;
    let h = solve_harmonic_field(&f, HarmonicSpec::Circulation(2.0 * PI * c), &s).unwrap();
    assert!(rel_l2(&f, &h.field, &azimuthal(&f, c)) < 1e-10);
    assert!(h.residuals.max() < 1e-9, "{:?}", h.residuals);
    assert!((h.circulation - 2.0 * PI * c).abs() < 1e-12);
    // ψ = −c ln r, so the flux is −c ln 2
    assert!((h.flux + c * 2f64.ln()).abs() < 1e-10);
    let back = solve_harmonic_field(&f, HarmonicSpec::Flux(h.flux), &s).unwrap();
    assert!(rel_l2(&f, &back.field, &h.field) < 1e-13);
}

#[test]
fn zero_circulation_gives_zero_field() {
    let f = concentric(16, 16);
    let s = EllipticSolver::for_frame(&f);
    let h = solve_harmonic_field(&f, HarmonicSpec::Circulation(0.0), &s).unwrap();
    assert!(h.field.iter().flatten().all(|v| *v == 0.0));
}

#[test]
fn offset_annulus_matches_bipolar_closed_form() {
    let cx = 0.3;
    let f = offset(32, 64, cx);
    let s = EllipticSolver::for_frame(&f);
    // common inverse points p, q of both circles on the real axis
    let (c1, r1, c2, r2) = (cx, 1.0, 0.0, 2.0);
    let sum = (c2 * c2 - r2 * r2 - c1 * c1 + r1 * r1) / (c2 - c1);
    let prod = r1 * r1 + c1 * sum - c1 * c1;
    let disc = (sum * sum - 4.0 * prod).sqrt();
    let (p, q) = ((sum - disc) / 2.0, (sum + disc) / 2.0);
    let lfun = |x: f64, y: f64| 0.5 * (((x - p).powi(2) + y * y) / ((x - q).powi(2) + y * y)).ln();
    let lg = lfun(cx + 1.0, 0.0);
    let lw = lfun(2.0, 0.0);
    assert!((lfun(cx, 1.0) - lg).abs() < 1e-12 && (lfun(0.0, -2.0) - lw).abs() < 1e-12);
    let h = solve_harmonic_field(&f, HarmonicSpec::Flux(1.0), &s).unwrap();
    let err = (0..f.n_nodes()).fold(0.0f64, |m, k| {
        let ex = (lfun(f.pos[0][k], f.pos[1][k]) - lg) / (lw - lg);
        m.max((h.psi[k] - ex).abs())
    });
    assert!(err < 1e-9, "{err}");
    assert!(h.residuals.max() < 1e-7, "{:?}", h.residuals);
    let h = solve_harmonic_field(&f, HarmonicSpec::Circulation(2.0 * PI), &s).unwrap();
    for ring in [0, 10, 31] {
        let c = circulation([&h.field[0], &h.field[1]], &f, ring).unwrap();
        assert!((c - 2.0 * PI).abs() < 1e-8, "{ring} {c}");
    }
}

#[test]
fn circulation_examples() {
    let f = concentric(16, 32);
    let n = f.n_nodes();
    let z = [vec![0.0; n], vec![0.0; n]];
    assert_eq!(circulation([&z[0], &z[1]], &f, 3).unwrap(), 0.0);
    // gradient of a single-valued function
    let g = f.grad(&(0..n).map(|k| f.pos[0][k] * f.pos[1][k] + f.pos[0][k].sin()).collect::<Vec<_>>());
    assert!(circulation([&g[0], &g[1]], &f, 5).unwrap().abs() < 1e-12);
    let a = azimuthal(&f, 1.3);
    for ring in 0..16 {
        assert!((circulation([&a[0], &a[1]], &f, ring).unwrap() - 2.0 * PI * 1.3).abs() < 1e-12);
    }
    assert!(matches!(circulation([&a[0], &a[1]], &f, 16), Err(Error::Geometry(_))));
}

#[test]
fn electric_field_separation_of_variables() {
    let f = concentric(24, 32);
    let s = EllipticSolver::for_frame(&f);
    let (c, v) = (0.8, 0.3);
    let ug = [vec![v; 32], vec![0.0; 32]];
    let (ext, _) = extend_velocity_to_vacuum([&ug[0], &ug[1]], &f, 1e-3).unwrap();
    let vel = [ext.comp(0).to_vec(), ext.comp(1).to_vec()];
    let w = azimuthal(&f, c);
    let data = mixed_problem_data(&f, [&vel[0], &vel[1]], [&w[0], &w[1]]).unwrap();
    for j in 0..32 {
        let phi = 2.0 * PI * j as f64 / 32.0;
        assert!((data.f1[j] + c * v * phi.cos()).abs() < 1e-12);
    }
    let e = solve_electric_field(&f, &data, &s, None).unwrap();
    let mut num = vec![0.0; f.n_nodes()];
    let mut den = vec![0.0; f.n_nodes()];
    for k in 0..f.n_nodes() {
        let (x, y) = (f.pos[0][k], f.pos[1][k]);
        let r = x.hypot(y);
        let ex = c * v * (r / 3.0 - 4.0 / (3.0 * r)) * (x / r);
        num[k] = (e.xi[k] - ex).powi(2);
        den[k] = ex * ex;
    }
    assert!((f.integrate(&num) / f.integrate(&den)).sqrt() < 1e-10);
    assert!(e.oblique_l2 < 1e-9, "{}", e.oblique_l2);
    assert!(e.laplace_residual < 1e-8);
}

#[test]
fn electric_field_trivial_cases() {
    let f = concentric(16, 16);
    let s = EllipticSolver::for_frame(&f);
    let n = f.n_nodes();
    let z = [vec![0.0; n], vec![0.0; n]];
    let w = azimuthal(&f, 1.0);
    let d = mixed_problem_data(&f, [&z[0], &z[1]], [&w[0], &w[1]]).unwrap();
    assert!(solve_electric_field(&f, &d, &s, None).unwrap().xi.iter().all(|v| *v == 0.0));
    let u: Vec<Vec<f64>> = (0..2).map(|c| (0..n).map(|k| f.pos[c][k].sin()).collect()).collect();
    let d = mixed_problem_data(&f, [&u[0], &u[1]], [&z[0], &z[1]]).unwrap();
    assert!(solve_electric_field(&f, &d, &s, None).unwrap().xi.iter().all(|v| *v == 0.0));
}

#[test]
fn static_vacuum_is_unchanged() {
    let lab = concentric(16, 16);
    let s = EllipticSolver::for_frame(&lab);
    let st = VacuumState::initial(lab, HarmonicSpec::Circulation(2.0 * PI), 1.0, &s).unwrap();
    let opts = VacuumOptions {
        mode: VacuumMode::Evolved,
        ..Default::default()
    };
    let mut cur = st.clone();
    for _ in 0..5 {
        cur = evolve_vacuum(&cur, 0.1, &opts, &s, |_, _| Ok([vec![0.0; 16], vec![0.0; 16]]))
            .unwrap()
            .0;
    }
    assert!(cur.varpi.max_diff(&st.varpi) < 1e-13);
    assert!(cur.xi.iter().all(|v| *v == 0.0));
    // ϖ = 0 stays zero
    let z = VacuumState::initial(concentric(16, 16), HarmonicSpec::Flux(0.0), 1.0, &s).unwrap();
    let (z1, _) = evolve_vacuum(&z, 0.1, &opts, &s, |_, _| Ok([vec![0.0; 16], vec![0.0; 16]])).unwrap();
    assert_eq!(z1.varpi.max_abs(), 0.0);
}

#[test]
fn rotating_interface_keeps_azimuthal_field() {
    let lab = concentric(24, 48);
    let s = EllipticSolver::for_frame(&lab);
    let c = 1.0;
    let w = 0.5;
    let rot = |_: f64, fr: &Frame| -> Result<[Vec<f64>; 2]> {
        Ok([
            (0..48).map(|j| -w * fr.pos[1][j]).collect(),
            (0..48).map(|j| w * fr.pos[0][j]).collect(),
        ])
    };
    for mode in [VacuumMode::ConstrainedFlux, VacuumMode::Evolved] {
        let opts = VacuumOptions {
            mode,
            ..Default::default()
        };
        let mut cur = VacuumState::initial(lab.clone(), HarmonicSpec::Circulation(2.0 * PI * c), 1.0, &s).unwrap();
        let mut rep = None;
        for _ in 0..20 {
            let (n, r) = evolve_vacuum(&cur, 0.025, &opts, &s, rot).unwrap();
            cur = n;
            rep = Some(r);
        }
        let f = cur.field();
        assert!(rel_l2(&cur.map.current, &f, &azimuthal(&cur.map.current, c)) < 1e-7, "{mode:?}");
        assert!((cur.circulation - 2.0 * PI * c).abs() < 1e-7);
        let r = rep.unwrap().residuals;
        assert!(r.max() < 1e-7, "{mode:?} {r:?}");
        // Γ turned by the angle ωt
        let p = [cur.map.current.pos[0][0], cur.map.current.pos[1][0]];
        assert!((p[1].atan2(p[0]) - 0.25).abs() < 1e-7);
    }
}

#[test]
fn projection_keeps_harmonic_fields() {
    let f = concentric(16, 16);
    let s = EllipticSolver::for_frame(&f);
    let a = azimuthal(&f, 2.0);
    let (p, corr) = project_harmonic(&f, &a, &s).unwrap();
    assert!(corr < 1e-10 && rel_l2(&f, &p, &a) < 1e-10);
}

#[test]
fn perp_xi_check_cases() {
    let lab = concentric(16, 16);
    let map = FlowMap::identity(Domain::Vacuum, lab.clone());
    let m = pullback_metric(&map).unwrap();
    let n = lab.n_nodes();
    let u = TensorField::vector(Domain::Vacuum, [vec![0.0; n], vec![0.0; n]]);
    let xi: Vec<f64> = (0..n).map(|k| lab.pos[0][k] / (lab.pos[0][k].powi(2) + lab.pos[1][k].powi(2))).collect();
    let series = vec![(0.0, xi.clone(), m.clone()), (0.1, xi.clone(), m.clone()), (0.2, xi, m.clone())];
    assert_eq!(evolve_perp_xi_check(&series, &u, 2).unwrap(), 0.0);
    let zero = vec![(0.0, vec![0.0; n], m.clone()), (0.1, vec![0.0; n], m.clone())];
    assert_eq!(evolve_perp_xi_check(&zero, &u, 2).unwrap(), 0.0);
    assert!(matches!(
        evolve_perp_xi_check(&zero[..1], &u, 2),
        Err(Error::InsufficientHistory(_))
    ));
}

#[test]
fn disk_frame_is_rejected() {
    let f = Frame::disk(12, 12, 1.0).unwrap();
    let s = EllipticSolver::for_frame(&f);
    assert!(matches!(
        solve_harmonic_field(&f, HarmonicSpec::Flux(1.0), &s),
        Err(Error::Shape(_))
    ));
}
