/// Composite trapezoid rule over an arbitrary nondecreasing grid.
pub fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    debug_assert_eq!(grid.len(), values.len());
    grid.windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// Trapezoid weights for `grid`, so that `sum(w_i f_i)` is the trapezoid rule.
pub fn trapezoid_weights(grid: &[f64]) -> Vec<f64> {
    let mut w = vec![0.0; grid.len()];
    for i in 1..grid.len() {
        let h = 0.5 * (grid[i] - grid[i - 1]);
        w[i - 1] += h;
        w[i] += h;
    }
    w
}

// 5-point Gauss-Legendre on [-1, 1]; exact through degree 9.
const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Gauss-Legendre nodes and weights, five per interval between consecutive
/// distinct breakpoints.
pub fn gauss_legendre_panels(breaks: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, wt) in GL5_NODES.iter().zip(GL5_WEIGHTS.iter()) {
            nodes.push(mid + half * x);
            weights.push(half * wt);
        }
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_exact_for_degree_nine() {
        let (x, w) = gauss_legendre_panels(&[0.0, 0.5, 2.0]);
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(9)).sum();
        assert!((integral - 2f64.powi(10) / 10.0).abs() < 1e-10);
    }

    #[test]
    fn trapezoid_linear_exact() {
        let g = [0.0, 0.3, 1.0, 2.5];
        let v: Vec<f64> = g.iter().map(|t| 2.0 * t + 1.0).collect();
        assert!((trapezoid(&g, &v) - (2.5f64 * 2.5 + 2.5)).abs() < 1e-14);
        let w = trapezoid_weights(&g);
        let s: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        assert!((s - trapezoid(&g, &v)).abs() < 1e-14);
    }
}
