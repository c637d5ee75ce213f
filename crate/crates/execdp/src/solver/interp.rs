//! Monotone piecewise-cubic Hermite interpolation with local slopes.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    /// `xs` strictly increasing, at least one node. Outside the node range the
    /// interpolant is held flat at the end values.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        assert_eq!(xs.len(), ys.len());
        assert!(!xs.is_empty());
        let n = xs.len();
        let mut slopes = vec![0.0; n];
        if n >= 2 {
            let d: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])).collect();
            slopes[0] = d[0];
            slopes[n - 1] = d[n - 2];
            for i in 1..n - 1 {
                // Weighted harmonic mean: stays within the monotone region and
                // depends only on the two adjacent secants.
                slopes[i] = if d[i - 1] * d[i] <= 0.0 {
                    0.0
                } else {
                    let (h0, h1) = (xs[i] - xs[i - 1], xs[i + 1] - xs[i]);
                    let (w1, w2) = (2.0 * h1 + h0, h1 + 2.0 * h0);
                    (w1 + w2) / (w1 / d[i - 1] + w2 / d[i])
                };
            }
        }
        Self { xs, ys, slopes }
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if n == 1 || x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let i = self.xs.partition_point(|v| *v <= x) - 1;
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[i] + h10 * h * self.slopes[i] + h01 * self.ys[i + 1] + h11 * h * self.slopes[i + 1]
    }
}

impl MonotoneCubic {
    /// First derivative; zero outside the node range.
    pub fn derivative(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if n == 1 || x < self.xs[0] || x > self.xs[n - 1] {
            return 0.0;
        }
        let i = (self.xs.partition_point(|v| *v <= x).max(1) - 1).min(n - 2);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let d00 = 6.0 * t2 - 6.0 * t;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d11 = 3.0 * t2 - 2.0 * t;
        (d00 * (self.ys[i] - self.ys[i + 1])) / h + d10 * self.slopes[i] + d11 * self.slopes[i + 1]
    }
}

/// Log-spaced grid of `n` nodes on [lo, hi].
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![hi];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut g: Vec<f64> = (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect();
    g[0] = lo;
    g[n - 1] = hi;
    g
}
