//! Gauss-Legendre rules, used to average generator output distributions
//! over the uniform noise angles.

use std::f64::consts::PI;

/// Nodes and weights of the `order`-point Gauss-Legendre rule on `[low, high]`.
/// Weights sum to `high - low`.
pub fn gauss_legendre(order: usize, low: f64, high: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "quadrature order must be positive");
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let n = order as f64;
    let half = (high - low) / 2.0;
    let mid = (high + low) / 2.0;
    for i in 0..(order + 1) / 2 {
        // Newton on P_n starting from the Chebyshev-like guess.
        let mut x = (PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(order, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(order, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = mid - half * x;
        nodes[order - 1 - i] = mid + half * x;
        weights[i] = w * half;
        weights[order - 1 - i] = w * half;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
