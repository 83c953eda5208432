//! Trigonometric interpolation on uniform periodic grids.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

/// Row-major first-derivative matrix on `m` uniform nodes in [0, 2π), m even.
pub fn diff_matrix(m: usize) -> Vec<f64> {
    let h = 2.0 * PI / m as f64;
    let mut d = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            if i != j {
                let k = i as isize - j as isize;
                let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                d[i * m + j] = 0.5 * sign / (0.5 * k as f64 * h).tan();
            }
        }
    }
    d
}

/// Complex Fourier coefficients c_k with f(θ_j) = Σ_k c_k e^{ikθ_j},
/// stored in FFT order (k = 0, 1, .., m/2, -(m/2-1), .., -1).
pub fn coefficients(values: &[f64]) -> Vec<Complex64> {
    let m = values.len();
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let s = 1.0 / m as f64;
    buf.iter_mut().for_each(|c| *c *= s);
    buf
}

/// Signed wavenumber of FFT slot `idx` for length `m`.
pub fn wavenumber(idx: usize, m: usize) -> isize {
    if idx <= m / 2 {
        idx as isize
    } else {
        idx as isize - m as isize
    }
}

/// Evaluate the real trigonometric interpolant at `theta`.
///
/// The Nyquist mode is split symmetrically so the result is real.
pub fn evaluate(coeffs: &[Complex64], theta: f64, order: u32) -> f64 {
    let m = coeffs.len();
    let mut s = 0.0;
    for (idx, c) in coeffs.iter().enumerate() {
        let k = wavenumber(idx, m);
        if m % 2 == 0 && idx == m / 2 {
            // cos(kθ) part of the Nyquist mode only
            let kf = k as f64;
            let base = c.re * (kf * theta).cos();
            s += match order % 4 {
                0 => base,
                1 => -c.re * kf * (kf * theta).sin(),
                2 => -kf * kf * base,
                _ => c.re * kf.powi(3) * (kf * theta).sin(),
            };
            continue;
        }
        let kf = k as f64;
        let e = Complex64::new(0.0, kf * theta).exp();
        let fac = Complex64::new(0.0, kf).powu(order);
        s += (c * fac * e).re;
    }
    s
}

/// Spectral derivative of given order of periodic samples.
pub fn derivative(values: &[f64], order: u32) -> Vec<f64> {
    let m = values.len();
    let mut c = coefficients(values);
    for (idx, ck) in c.iter_mut().enumerate() {
        let k = wavenumber(idx, m) as f64;
        if m % 2 == 0 && idx == m / 2 && order % 2 == 1 {
            *ck = Complex64::new(0.0, 0.0);
        } else {
            *ck *= Complex64::new(0.0, k).powu(order);
        }
    }
    inverse(&c)
}

/// Real samples from coefficients in FFT order.
pub fn inverse(coeffs: &[Complex64]) -> Vec<f64> {
    let m = coeffs.len();
    let mut buf = coeffs.to_vec();
    FftPlanner::new().plan_fft_inverse(m).process(&mut buf);
    buf.iter().map(|c| c.re).collect()
}

/// Resample periodic samples from `values.len()` to `m` uniform nodes.
pub fn resample(values: &[f64], m: usize) -> Vec<f64> {
    let n = values.len();
    if n == m {
        return values.to_vec();
    }
    let c = coefficients(values);
    let mut out = vec![Complex64::new(0.0, 0.0); m];
    let kk = n.min(m) as isize;
    let slot = |k: isize| if k >= 0 { k as usize } else { (m as isize + k) as usize };
    for (idx, ck) in c.iter().enumerate() {
        let k = wavenumber(idx, n);
        if 2 * k.abs() < kk {
            out[slot(k)] += ck;
        } else if 2 * k.abs() == kk {
            if n < m {
                // split the source Nyquist mode between ±n/2
                out[slot(k)] += ck * 0.5;
                out[slot(-k)] += ck * 0.5;
            } else {
                out[m / 2] += ck;
            }
        }
    }
    inverse(&out)
}

/// Primitive of zero-mean periodic samples (mean is removed first).
pub fn integrate(values: &[f64]) -> Vec<f64> {
    let m = values.len();
    let mut c = coefficients(values);
    for (idx, ck) in c.iter_mut().enumerate() {
        let k = wavenumber(idx, m);
        if k == 0 || (m % 2 == 0 && idx == m / 2) {
            *ck = Complex64::new(0.0, 0.0);
        } else {
            *ck /= Complex64::new(0.0, k as f64);
        }
    }
    inverse(&c)
}

/// Exponential filter of periodic samples with η = |k|/(m/2): modes with
/// η ≤ 1/2 pass unchanged, higher modes are scaled by exp(−36 ξ^order) with
/// ξ = 2η − 1, so the top mode is damped to machine precision.
pub fn exp_filter(values: &[f64], order: u32) -> Vec<f64> {
    let m = values.len();
    let mut c = coefficients(values);
    let kmax = (m / 2) as f64;
    for (idx, ck) in c.iter_mut().enumerate() {
        let eta = wavenumber(idx, m).unsigned_abs() as f64 / kmax;
        if eta > 0.5 {
            *ck *= (-36.0 * (2.0 * eta - 1.0).powi(order as i32)).exp();
        }
    }
    inverse(&c)
}

/// Uniform angles θ_j = 2πj/m.
pub fn angles(m: usize) -> Vec<f64> {
    (0..m).map(|j| 2.0 * PI * j as f64 / m as f64).collect()
}
