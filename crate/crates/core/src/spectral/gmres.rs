//! Restarted, left-preconditioned GMRES for matrix-free operators.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct GmresOptions {
    pub tol: f64,
    /// Absolute floor on the preconditioned residual.
    pub atol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            tol: 1e-13,
            atol: 0.0,
            restart: 40,
            max_iter: 400,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GmresStats {
    pub iterations: usize,
    /// Final preconditioned residual relative to ‖M⁻¹b‖ (absolute when b = 0).
    pub residual: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solve A x = b starting from `x0`.
pub fn gmres<A, M>(
    apply: A,
    precond: M,
    b: &[f64],
    x0: Vec<f64>,
    opts: GmresOptions,
) -> Result<(Vec<f64>, GmresStats)>
where
    A: Fn(&[f64]) -> Vec<f64>,
    M: Fn(&[f64]) -> Vec<f64>,
{
    let pb = precond(b);
    let pbn = norm(&pb);
    let scale = if pbn > 0.0 { pbn } else { 1.0 };
    let mut x = x0;
    let mut total = 0;
    loop {
        let ax = apply(&x);
        let r0: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let r = precond(&r0);
        let beta = norm(&r);
        if beta / scale <= opts.tol || beta <= opts.atol {
            return Ok((
                x,
                GmresStats {
                    iterations: total,
                    residual: beta / scale,
                },
            ));
        }
        if total >= opts.max_iter {
            return Err(Error::Elliptic {
                residual: beta / scale,
                iterations: total,
            });
        }
        let m = opts.restart;
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            let mut w = precond(&apply(&v[k]));
            for (i, vi) in v.iter().enumerate() {
                let hik = dot(&w, vi);
                h[i][k] = hik;
                w.iter_mut().zip(vi).for_each(|(wj, vj)| *wj -= hik * vj);
            }
            // one reorthogonalisation pass keeps the basis clean at tight tolerances
            for (i, vi) in v.iter().enumerate() {
                let c = dot(&w, vi);
                h[i][k] += c;
                w.iter_mut().zip(vi).for_each(|(wj, vj)| *wj -= c * vj);
            }
            let hn = norm(&w);
            h[k + 1][k] = hn;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let den = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            if den == 0.0 {
                cs[k] = 1.0;
                sn[k] = 0.0;
            } else {
                cs[k] = h[k][k] / den;
                sn[k] = h[k + 1][k] / den;
            }
            h[k][k] = cs[k] * h[k][k] + sn[k] * h[k + 1][k];
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total += 1;
            k_used = k + 1;
            let done = g[k + 1].abs() / scale <= opts.tol * 0.5
                || g[k + 1].abs() <= opts.atol * 0.5
                || total >= opts.max_iter;
            if hn > 0.0 {
                v.push(w.iter().map(|wj| wj / hn).collect());
            }
            if done || hn == 0.0 {
                break;
            }
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            x.iter_mut().zip(&v[j]).for_each(|(xi, vi)| *xi += yj * vi);
        }
    }
}
