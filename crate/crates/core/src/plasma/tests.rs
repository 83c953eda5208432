use super::*;
use crate::geometry::{compute_geometry, ClosedCurve};
use crate::kinematics::pull_back;

fn disk(nd: usize, nt: usize) -> Arc<Frame> {
    Arc::new(Frame::disk(nd, nt, 1.0).unwrap())
}

fn field(f: &Frame, g: impl Fn(f64, f64) -> [f64; 2]) -> [Vec<f64>; 2] {
    let n = f.n_nodes();
    let mut out = [vec![0.0; n], vec![0.0; n]];
    for k in 0..n {
        let v = g(f.pos[0][k], f.pos[1][k]);
        out[0][k] = v[0];
        out[1][k] = v[1];
    }
    out
}

fn zpinch(lab: &Arc<Frame>, mu: f64) -> PlasmaState {
    let n = lab.n_nodes();
    PlasmaState::initial(
        lab.clone(),
        [vec![0.0; n], vec![0.0; n]],
        field(lab, |x, y| [-y, x]),
        mu,
    )
}

fn solve_pressure(s: &mut PlasmaState, qm: &[f64]) -> PressureStats {
    let metric = pullback_metric(&s.map).unwrap();
    let d = PlasmaDerivatives::compute(s, &metric).unwrap();
    let p = pressure_problem(s, &metric, &d, qm).unwrap();
    let solver = EllipticSolver::for_frame(&s.map.current);
    let (q, st) = pressure_solve(&p, &s.map.current, &solver, None).unwrap();
    s.q_plus = q;
    s.pressure_time = Some(s.t());
    st
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[test]
fn constant_boundary_pressure() {
    let lab = disk(16, 16);
    let n = lab.n_nodes();
    let mut s = PlasmaState::initial(lab, [vec![0.0; n], vec![0.0; n]], [vec![0.0; n], vec![0.0; n]], 1.0);
    let st = solve_pressure(&mut s, &vec![5.0; 16]);
    assert!(s.q_plus.iter().all(|q| (q - 5.0).abs() < 1e-12));
    assert!(st.residual < 1e-10);
}

#[test]
fn rotation_pressure() {
    let lab = disk(16, 16);
    let n = lab.n_nodes();
    let w = 1.7;
    let mut s = PlasmaState::initial(lab.clone(), field(&lab, |x, y| [-w * y, w * x]), [vec![0.0; n], vec![0.0; n]], 1.0);
    solve_pressure(&mut s, &vec![0.0; 16]);
    for k in 0..n {
        let r2 = lab.pos[0][k].powi(2) + lab.pos[1][k].powi(2);
        assert!((s.q_plus[k] - w * w * (r2 - 1.0) / 2.0).abs() < 1e-11);
    }
}

#[test]
fn zpinch_pressure_and_force_balance() {
    let lab = disk(16, 16);
    let mu = 1.3;
    let mut s = zpinch(&lab, mu);
    solve_pressure(&mut s, &vec![0.0; 16]);
    for k in 0..lab.n_nodes() {
        let r2 = lab.pos[0][k].powi(2) + lab.pos[1][k].powi(2);
        assert!((s.q_plus[k] - mu * (1.0 - r2) / 2.0).abs() < 1e-11);
    }
    let metric = pullback_metric(&s.map).unwrap();
    assert!(momentum_rhs(&s, &metric).unwrap().max_abs() < 1e-10);
}

#[test]
fn stale_pressure_is_a_sequencing_error() {
    let lab = disk(12, 12);
    let s = zpinch(&lab, 1.0);
    let metric = pullback_metric(&s.map).unwrap();
    assert!(matches!(momentum_rhs(&s, &metric), Err(Error::Sequencing(_))));
}

#[test]
fn trivial_right_sides_vanish() {
    let lab = disk(12, 12);
    let n = lab.n_nodes();
    let z = [vec![0.0; n], vec![0.0; n]];
    let mut s = PlasmaState::initial(lab.clone(), z.clone(), z.clone(), 1.0);
    s.q_plus = vec![2.5; n];
    s.pressure_time = Some(0.0);
    let metric = pullback_metric(&s.map).unwrap();
    assert!(momentum_rhs(&s, &metric).unwrap().max_abs() < 1e-12);
    // u = 0 with a field, and β = 0 with a flow
    let s1 = PlasmaState::initial(lab.clone(), z.clone(), field(&lab, |x, y| [y * y, x]), 1.0);
    assert!(induction_rhs(&s1, &metric).unwrap().max_abs() == 0.0);
    let s2 = PlasmaState::initial(lab.clone(), field(&lab, |x, y| [y.sin(), x]), z, 1.0);
    assert!(induction_rhs(&s2, &metric).unwrap().max_abs() == 0.0);
}

#[test]
fn right_sides_match_eulerian_oracle_on_deformed_map() {
    let lab = disk(24, 32);
    let eps = 0.08;
    let n = lab.n_nodes();
    let fwd = |y: [f64; 2]| [y[0] + eps * (2.0 * y[1]).sin(), y[1] + eps * (y[0] + eps * (2.0 * y[1]).sin()).cos()];
    let mut pos = [vec![0.0; n], vec![0.0; n]];
    for k in 0..n {
        let x = fwd([lab.pos[0][k], lab.pos[1][k]]);
        pos[0][k] = x[0];
        pos[1][k] = x[1];
    }
    let map = FlowMap::new(Domain::Plasma, lab.clone(), pos, 0.0).unwrap();
    let cur = map.current.clone();
    let vf = field(&cur, |x, y| [y.sin(), x.cos()]);
    let hf = field(&cur, |x, y| [y, x * x]);
    let mu = 0.7;
    let s = PlasmaState {
        u: map.to_covariant([&vf[0], &vf[1]]),
        beta: map.to_covariant([&hf[0], &hf[1]]),
        q_plus: (0..n).map(|k| cur.pos[0][k] * cur.pos[1][k]).collect(),
        mu,
        h0: hf.clone(),
        pressure_time: Some(0.0),
        map,
    };
    let metric = pullback_metric(&s.map).unwrap();
    let mut mom = [vec![0.0; n], vec![0.0; n]];
    let mut ind = [vec![0.0; n], vec![0.0; n]];
    for k in 0..n {
        let (x, y) = (cur.pos[0][k], cur.pos[1][k]);
        let v = [y.sin(), x.cos()];
        let h = [y, x * x];
        // jv[i][k] = ∂_k V_i
        let jv = [[0.0, y.cos()], [-x.sin(), 0.0]];
        let jh = [[0.0, 1.0], [2.0 * x, 0.0]];
        let dq = [y, x];
        for i in 0..2 {
            let mut m = -dq[i];
            let mut b = 0.0;
            for kk in 0..2 {
                m += mu * h[kk] * jh[i][kk] + v[kk] * jv[kk][i];
                b += h[kk] * jv[i][kk] + h[kk] * jv[kk][i];
            }
            mom[i][k] = m;
            ind[i][k] = b;
        }
    }
    let mom = pull_back(&s.map, &TensorField::vector(Domain::Plasma, mom));
    let ind = pull_back(&s.map, &TensorField::vector(Domain::Plasma, ind));
    let m = momentum_rhs(&s, &metric).unwrap();
    let b = induction_rhs(&s, &metric).unwrap();
    assert!(m.max_diff(&mom) < 1e-7, "{}", m.max_diff(&mom));
    assert!(b.max_diff(&ind) < 1e-7, "{}", b.max_diff(&ind));
}

#[test]
fn taylor_sign_cases() {
    let nt = 32;
    let lab = disk(16, nt);
    let curve = ClosedCurve::circle([0.0, 0.0], 1.0, nt, false).unwrap();
    let geom = compute_geometry(&curve).unwrap();
    let mu = 1.5;
    // Z-pinch
    let q: Vec<f64> = (0..lab.n_nodes())
        .map(|k| mu * (1.0 - lab.pos[0][k].powi(2) - lab.pos[1][k].powi(2)) / 2.0)
        .collect();
    let ts = taylor_sign(&lab, &q, None, &geom).unwrap();
    assert!((ts.margin - mu).abs() < 1e-10 && ts.status == TaylorStatus::Holds);
    assert!(ts.dn_p.iter().all(|d| (d + mu).abs() < 1e-10));
    // static column with an azimuthal vacuum field c/r
    let c = 0.8;
    let vac = Frame::annulus(24, nt, 1.0, 2.0).unwrap();
    let qm: Vec<f64> = (0..vac.n_nodes())
        .map(|k| mu * c * c / (2.0 * (vac.pos[0][k].powi(2) + vac.pos[1][k].powi(2))))
        .collect();
    let qp = vec![mu * c * c / 2.0; lab.n_nodes()];
    let ts = taylor_sign(&lab, &qp, Some((&vac, &qm)), &geom).unwrap();
    assert!(ts.dn_p.iter().all(|d| (d - mu * c * c).abs() < 1e-9), "{:?}", &ts.dn_p[..3]);
    assert_eq!(ts.status, TaylorStatus::Violated);
    // nothing at all
    let ts = taylor_sign(&lab, &vec![0.0; lab.n_nodes()], None, &geom).unwrap();
    assert_eq!(ts.status, TaylorStatus::Degenerate);
}

#[test]
fn zpinch_is_stationary() {
    let lab = disk(16, 16);
    let s0 = zpinch(&lab, 1.0);
    let solver = EllipticSolver::for_frame(&lab);
    let mut s = s0.clone();
    let zero = vec![0.0; 16];
    for _ in 0..100 {
        s = step_plasma(&s, 0.01, &solver, CleaningOptions::default(), 1e-10, |_| Ok(zero.clone()))
            .unwrap()
            .0;
    }
    let mut dev: f64 = s.u.max_abs();
    dev = dev.max(s.beta.max_diff(&s0.beta));
    for k in 0..lab.n_nodes() {
        let r2 = lab.pos[0][k].powi(2) + lab.pos[1][k].powi(2);
        dev = dev.max((s.q_plus[k] - (1.0 - r2) / 2.0).abs());
        dev = dev.max((s.map.current.pos[0][k] - lab.pos[0][k]).abs());
    }
    assert!(dev <= 1e-8, "{dev}");
}

#[test]
fn zero_state_stays_zero() {
    let lab = disk(12, 12);
    let n = lab.n_nodes();
    let z = [vec![0.0; n], vec![0.0; n]];
    let mut s = PlasmaState::initial(lab.clone(), z.clone(), z, 1.0);
    let solver = EllipticSolver::for_frame(&lab);
    for _ in 0..10 {
        s = step_plasma(&s, 0.05, &solver, CleaningOptions::default(), 1e-10, |_| Ok(vec![0.0; 12]))
            .unwrap()
            .0;
    }
    assert_eq!(s.u.max_abs(), 0.0);
    assert_eq!(s.beta.max_abs(), 0.0);
    assert_eq!(max_abs(&s.q_plus), 0.0);
}

#[test]
fn rigid_rotation_is_preserved() {
    let lab = disk(16, 16);
    let n = lab.n_nodes();
    let w = 1.0;
    let z = [vec![0.0; n], vec![0.0; n]];
    let solver = EllipticSolver::for_frame(&lab);
    let err_after = |dt: f64| {
        let mut s = PlasmaState::initial(lab.clone(), field(&lab, |x, y| [-w * y, w * x]), z.clone(), 1.0);
        let steps = (0.5 / dt).round() as usize;
        for _ in 0..steps {
            s = step_plasma(&s, dt, &solver, CleaningOptions::default(), 1e-8, |_| Ok(vec![0.0; 16]))
                .unwrap()
                .0;
        }
        let v = s.velocity();
        let mut e: f64 = 0.0;
        for k in 0..n {
            let (x, y) = (s.map.current.pos[0][k], s.map.current.pos[1][k]);
            e = e.max((v[0][k] + w * y).abs()).max((v[1][k] - w * x).abs());
            // speed profile against the label radius
            let r0 = lab.pos[0][k].hypot(lab.pos[1][k]);
            e = e.max((v[0][k].hypot(v[1][k]) - w * r0).abs());
        }
        e
    };
    let e1 = err_after(0.05);
    let e2 = err_after(0.025);
    assert!(e1 < 1e-6, "{e1}");
    assert!(e2 < e1 / 8.0 || e2 < 1e-11, "{e1} {e2}");
}

#[test]
fn filter_removes_ring_noise_only() {
    let lab = disk(16, 16);
    let mu = 1.0;
    let mut s = zpinch(&lab, mu);
    let solver = EllipticSolver::for_frame(&lab);
    let opts = CleaningOptions { velocity: false, magnetic: true, filter_order: DEFAULT_FILTER_ORDER };
    let mut smooth = s.clone();
    let rep = clean(&mut smooth, &solver, opts).unwrap();
    assert!(rep.filter < 1e-14, "{}", rep.filter);
    // top-mode noise on the interface ring
    let mut pos = s.map.current.pos.clone();
    for j in 0..16 {
        pos[0][j] += 1e-6 * if j % 2 == 0 { 1.0 } else { -1.0 };
    }
    s.map = s.map.with_positions(pos, 0.0).unwrap();
    let rep = clean(&mut s, &solver, opts).unwrap();
    assert!((rep.filter - 1e-6).abs() < 1e-12);
    assert!(s.map.current.pos[0].iter().zip(&lab.pos[0]).all(|(a, b)| (a - b).abs() < 1e-12));
}
