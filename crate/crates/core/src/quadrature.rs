//! One-dimensional quadrature rules.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, dp)
}

/// Composite Gauss–Legendre rule with `panels` equal panels of `order` points.
pub fn composite_gauss<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        let mut s = 0.0;
        for (xi, wi) in x.iter().zip(&w) {
            s += wi * f(mid + 0.5 * h * xi);
        }
        total += 0.5 * h * s;
    }
    total
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptiveResult {
    pub value: f64,
    pub panels: usize,
    pub change: f64,
}

/// Composite Gauss–Legendre with panel doubling until two successive values
/// agree to `tol` (absolute, scaled by `max(1, |value|)`).
pub fn integrate_doubling<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    start_panels: usize,
    tol: f64,
) -> Result<AdaptiveResult> {
    const ORDER: usize = 16;
    const MAX_PANELS: usize = 1 << 16;
    let mut panels = start_panels.max(1);
    let mut prev = composite_gauss(f, a, b, panels, ORDER);
    while panels < MAX_PANELS {
        panels *= 2;
        let next = composite_gauss(f, a, b, panels, ORDER);
        let change = (next - prev).abs();
        if change <= tol * next.abs().max(1.0) {
            return Ok(AdaptiveResult {
                value: next,
                panels,
                change,
            });
        }
        prev = next;
    }
    Err(Error::InvalidParameter(format!(
        "quadrature did not converge to {tol:e} with {MAX_PANELS} panels"
    )))
}

/// Midpoints of `m` equal cells on `[0, len]`.
pub fn midpoints(len: f64, m: usize) -> Vec<f64> {
    let h = len / m as f64;
    (0..m).map(|i| (i as f64 + 0.5) * h).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two_and_integrate_polynomials() {
        for n in 1..20 {
            let (x, w) = gauss_legendre(n);
            let s: f64 = w.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n}");
            // exact up to degree 2n - 1
            let deg = 2 * n - 1;
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32 - 1)).sum();
            let exact = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert!((q - exact).abs() < 1e-13, "n={n} {q} {exact}");
        }
    }

    #[test]
    fn doubling_converges_on_oscillatory_integrand() {
        let k = 100.0;
        let r = integrate_doubling(&|s: f64| (PI * k * s).sin() * s.exp(), 0.0, 1.0, 4, 1e-12).unwrap();
        // closed form of ∫ e^s sin(ws) over [0,1]
        let w = PI * k;
        let e = 1f64.exp();
        let exact = (e * (w.sin() - w * w.cos()) + w) / (1.0 + w * w);
        assert!((r.value - exact).abs() < 1e-13);
    }

    #[test]
    fn midpoint_cells() {
        assert_eq!(midpoints(2.0, 4), vec![0.25, 0.75, 1.25, 1.75]);
    }
}
