//! Chebyshev–Gauss–Lobatto nodes, differentiation matrices and quadrature.

use std::f64::consts::PI;

/// Nodes x_j = cos(jπ/n), j = 0..=n (descending from 1 to -1).
pub fn nodes(n: usize) -> Vec<f64> {
    (0..=n).map(|j| (j as f64 * PI / n as f64).cos()).collect()
}

/// Dense row-major differentiation matrix on `nodes(n)`, size (n+1)².
pub fn diff_matrix(n: usize) -> Vec<f64> {
    let m = n + 1;
    let c = |j: usize| {
        let s = if j % 2 == 0 { 1.0 } else { -1.0 };
        if j == 0 || j == n {
            2.0 * s
        } else {
            s
        }
    };
    let mut d = vec![0.0; m * m];
    for i in 0..m {
        let mut row_sum = 0.0;
        for j in 0..m {
            if i != j {
                // x_i - x_j via the sine identity avoids cancellation
                let dx = -2.0
                    * (0.5 * (i + j) as f64 * PI / n as f64).sin()
                    * (0.5 * (i as f64 - j as f64) * PI / n as f64).sin();
                let v = c(i) / c(j) / dx;
                d[i * m + j] = v;
                row_sum += v;
            }
        }
        d[i * m + i] = -row_sum;
    }
    d
}

/// Clenshaw–Curtis weights for ∫_{-1}^{1} f dx on `nodes(n)`.
pub fn clenshaw_curtis(n: usize) -> Vec<f64> {
    let mut w = vec![0.0; n + 1];
    let theta: Vec<f64> = (0..=n).map(|j| j as f64 * PI / n as f64).collect();
    let inner = 1..n;
    let mut v = vec![1.0; n.saturating_sub(1)];
    if n % 2 == 0 {
        w[0] = 1.0 / (n * n - 1) as f64;
        w[n] = w[0];
        for k in 1..n / 2 {
            for (idx, j) in inner.clone().enumerate() {
                v[idx] -= 2.0 * (2.0 * k as f64 * theta[j]).cos() / (4 * k * k - 1) as f64;
            }
        }
        for (idx, j) in inner.clone().enumerate() {
            v[idx] -= (n as f64 * theta[j]).cos() / (n * n - 1) as f64;
        }
    } else {
        w[0] = 1.0 / (n * n) as f64;
        w[n] = w[0];
        for k in 1..=(n - 1) / 2 {
            for (idx, j) in inner.clone().enumerate() {
                v[idx] -= 2.0 * (2.0 * k as f64 * theta[j]).cos() / (4 * k * k - 1) as f64;
            }
        }
    }
    for (idx, j) in inner.enumerate() {
        w[j] = 2.0 * v[idx] / n as f64;
    }
    w
}

/// Interpolatory weights on `nodes(n)` for ∫_0^1 f(x) x dx.
///
/// The full grid spans [-1, 1]; only the integral over the right half is
/// taken, which is what the double-covered disk quadrature needs.
pub fn half_moment_weights(n: usize) -> Vec<f64> {
    let x = nodes(n);
    // ∫_0^1 T_j(x) dx
    let int_t = |j: i64| -> f64 {
        let a = 1 + j;
        let b = 1 - j;
        let term = |k: i64| -> f64 {
            if k == 0 {
                0.0
            } else {
                (1.0 - (k as f64 * PI / 2.0).cos()) / k as f64
            }
        };
        0.5 * (term(a) + term(b))
    };
    // moments m_k = ∫_0^1 x T_k(x) dx
    let moments: Vec<f64> = (0..=n as i64)
        .map(|k| {
            if k == 0 {
                int_t(1)
            } else {
                0.5 * (int_t(k + 1) + int_t((k - 1).abs()))
            }
        })
        .collect();
    let half = |j: usize| if j == 0 || j == n { 0.5 } else { 1.0 };
    (0..=n)
        .map(|l| {
            let tl = x[l].clamp(-1.0, 1.0).acos();
            let mut s = 0.0;
            for (k, mk) in moments.iter().enumerate() {
                s += half(k) * (k as f64 * tl).cos() * mk;
            }
            2.0 / n as f64 * half(l) * s
        })
        .collect()
}

/// Multiply a row-major square matrix `d` (size m) into every column of the
/// row-major block `f` (m rows, `cols` columns).
pub fn apply_rows(d: &[f64], m: usize, f: &[f64], cols: usize, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..m {
        let orow = &mut out[i * cols..(i + 1) * cols];
        for l in 0..m {
            let c = d[i * m + l];
            if c == 0.0 {
                continue;
            }
            let frow = &f[l * cols..(l + 1) * cols];
            for (o, v) in orow.iter_mut().zip(frow) {
                *o += c * v;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_of_polynomial_is_exact() {
        let n = 12;
        let x = nodes(n);
        let d = diff_matrix(n);
        let f: Vec<f64> = x.iter().map(|t| t.powi(5) - 2.0 * t).collect();
        for i in 0..=n {
            let df: f64 = (0..=n).map(|j| d[i * (n + 1) + j] * f[j]).sum();
            let exact = 5.0 * x[i].powi(4) - 2.0;
            assert!((df - exact).abs() < 1e-11, "{i}: {df} vs {exact}");
        }
    }

    #[test]
    fn clenshaw_curtis_integrates_exp() {
        for n in [8usize, 9, 16] {
            let x = nodes(n);
            let w = clenshaw_curtis(n);
            let s: f64 = x.iter().zip(&w).map(|(t, w)| w * t.exp()).sum();
            let exact = 1f64.exp() - (-1f64).exp();
            assert!((s - exact).abs() < 1e-9, "n={n}: {s}");
        }
    }

    #[test]
    fn half_moments_integrate_smooth_functions() {
        let n = 31;
        let x = nodes(n);
        let w = half_moment_weights(n);
        let s1: f64 = w.iter().sum();
        assert!((s1 - 0.5).abs() < 1e-14);
        // ∫_0^1 x cos(x) dx = cos 1 + sin 1 - 1
        let s: f64 = x.iter().zip(&w).map(|(t, w)| w * t.cos()).sum();
        let exact = 1f64.cos() + 1f64.sin() - 1.0;
        assert!((s - exact).abs() < 1e-14, "{s} vs {exact}");
    }
}
