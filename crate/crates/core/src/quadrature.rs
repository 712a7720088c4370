//! Tensor-product Gauss–Legendre rules on axis-aligned boxes.

use std::f64::consts::PI;

/// An `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes are the roots of `P_n`, refined by Newton's method from the
    /// Chebyshev-type initial guesses.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "quadrature order must be at least 1");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let half = n.div_ceil(2);
        for i in 0..half {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[half - 1] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Average of `f` over `Π [lo_i, hi_i]`, i.e. the integral divided by the
    /// box volume. Costs `n^d` evaluations.
    pub fn box_average<F: FnMut(&[f64]) -> f64>(&self, lo: &[f64], hi: &[f64], mut f: F) -> f64 {
        let d = lo.len();
        let n = self.order();
        let mut idx = vec![0usize; d];
        let mut x = vec![0.0; d];
        let mut total = 0.0;
        loop {
            let mut w = 1.0;
            for a in 0..d {
                let (l, h) = (lo[a], hi[a]);
                x[a] = 0.5 * (l + h) + 0.5 * (h - l) * self.nodes[idx[a]];
                // weights on [-1, 1] sum to 2
                w *= 0.5 * self.weights[idx[a]];
            }
            total += w * f(&x);
            // odometer over the tensor grid
            let mut a = d;
            loop {
                if a == 0 {
                    return total;
                }
                a -= 1;
                idx[a] += 1;
                if idx[a] < n {
                    break;
                }
                idx[a] = 0;
            }
        }
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_rule() {
        let gl = GaussLegendre::new(2);
        let r = 1.0 / 3f64.sqrt();
        assert!((gl.nodes()[0] + r).abs() < 1e-15);
        assert!((gl.nodes()[1] - r).abs() < 1e-15);
        assert!((gl.weights()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn weights_sum_to_two_and_nodes_sorted() {
        for n in 1..=20 {
            let gl = GaussLegendre::new(n);
            let s: f64 = gl.weights().iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n = {n}: {s}");
            assert!(gl.nodes().windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn exact_up_to_degree_2n_minus_1() {
        for n in 1..=10 {
            let gl = GaussLegendre::new(n);
            for p in 0..(2 * n) {
                // average of x^p over [0, 1] is 1 / (p + 1)
                let avg = gl.box_average(&[0.0], &[1.0], |x| x[0].powi(p as i32));
                assert!((avg - 1.0 / (p as f64 + 1.0)).abs() < 1e-13, "n = {n}, p = {p}");
            }
        }
    }

    #[test]
    fn tensor_product_in_two_dimensions() {
        let gl = GaussLegendre::new(8);
        // average of x y² over [0, 2] × [1, 3] is 1 · 13/3
        let avg = gl.box_average(&[0.0, 1.0], &[2.0, 3.0], |x| x[0] * x[1] * x[1]);
        assert!((avg - 13.0 / 3.0).abs() < 1e-13);
        let cos_avg = gl.box_average(&[0.0, 0.0], &[0.5, 0.5], |x| (x[0] + x[1]).cos());
        // ∫∫ cos(x+y) over [0,1/2]² = 2cos(1/2) - cos(1) - 1, divided by 1/4
        let exact = 4.0 * (2.0 * 0.5f64.cos() - 1f64.cos() - 1.0);
        assert!((cos_avg - exact).abs() < 1e-14);
    }
}
