//! Quadratic least-squares surrogates over a two-dimensional market state.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::interp::MonotoneCubic;
use crate::models::MarketState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    /// (P/P̃, X)
    PriceRatio,
    /// (P, O)
    PriceVolume,
}

/// Maps a state to the standardized quadratic basis (1, u, v, u², uv, v²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    pub kind: StateKind,
    pub center: [f64; 2],
    pub scale: [f64; 2],
}

impl FeatureMap {
    pub fn coords(kind: StateKind, s: &MarketState) -> [f64; 2] {
        match kind {
            StateKind::PriceRatio => [s.price / s.no_impact_price, s.aux],
            StateKind::PriceVolume => [s.price, s.aux],
        }
    }

    /// Centers and scales from sample coordinates; degenerate directions get unit scale.
    pub fn fit(kind: StateKind, pts: &[[f64; 2]]) -> Self {
        let n = pts.len().max(1) as f64;
        let mut center = [0.0; 2];
        let mut scale = [1.0; 2];
        for d in 0..2 {
            let m = pts.iter().map(|p| p[d]).sum::<f64>() / n;
            let v = pts.iter().map(|p| (p[d] - m).powi(2)).sum::<f64>() / n;
            center[d] = m;
            let s = v.sqrt();
            scale[d] = if s > 1e-12 * m.abs().max(1.0) { s } else { 1.0 };
        }
        Self { kind, center, scale }
    }

    pub fn basis_of(&self, c: [f64; 2]) -> [f64; 6] {
        let u = (c[0] - self.center[0]) / self.scale[0];
        let v = (c[1] - self.center[1]) / self.scale[1];
        [1.0, u, v, u * u, u * v, v * v]
    }

    pub fn basis(&self, s: &MarketState) -> [f64; 6] {
        self.basis_of(Self::coords(self.kind, s))
    }
}

/// Least squares via SVD; rank-deficient designs get the minimum-norm solution.
pub fn least_squares(rows: &[[f64; 6]], y: &[f64]) -> [f64; 6] {
    let n = rows.len();
    let a = DMatrix::from_fn(n, 6, |i, j| rows[i][j]);
    let b = DVector::from_column_slice(y);
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let x = svd
        .solve(&b, 1e-10 * smax.max(f64::MIN_POSITIVE))
        .unwrap_or_else(|_| DVector::zeros(6));
    let mut out = [0.0; 6];
    out.copy_from_slice(x.as_slice());
    out
}

pub fn dot(c: &[f64; 6], phi: &[f64; 6]) -> f64 {
    c.iter().zip(phi).map(|(a, b)| a * b).sum()
}

/// Value and policy surrogates for one stage, one quadratic fit per W node.
#[derive(Debug, Clone, PartialEq)]
pub struct Surrogate {
    pub w_grid: Vec<f64>,
    pub features: FeatureMap,
    pub value_coefs: Vec<[f64; 6]>,
    pub fraction_coefs: Vec<[f64; 6]>,
}

impl Surrogate {
    /// Fits per-node surfaces; `samples[j]` holds (coords, value, fraction)
    /// for W node j. Nodes with too few samples borrow the nearest fitted node.
    pub fn fit(kind: StateKind, w_grid: Vec<f64>, samples: &[Vec<([f64; 2], f64, f64)>]) -> Option<Self> {
        let all: Vec<[f64; 2]> = samples.iter().flatten().map(|s| s.0).collect();
        let features = FeatureMap::fit(kind, &all);
        let mut fits: Vec<Option<([f64; 6], [f64; 6])>> = samples
            .iter()
            .map(|node| {
                if node.len() < 6 {
                    return None;
                }
                let rows: Vec<[f64; 6]> = node.iter().map(|s| features.basis_of(s.0)).collect();
                let v: Vec<f64> = node.iter().map(|s| s.1).collect();
                let f: Vec<f64> = node.iter().map(|s| s.2).collect();
                Some((least_squares(&rows, &v), least_squares(&rows, &f)))
            })
            .collect();
        let known: Vec<usize> = (0..fits.len()).filter(|&j| fits[j].is_some()).collect();
        if known.is_empty() {
            return None;
        }
        for j in 0..fits.len() {
            if fits[j].is_none() {
                let near = *known.iter().min_by_key(|&&k| k.abs_diff(j)).unwrap();
                fits[j] = fits[near];
            }
        }
        let (value_coefs, fraction_coefs) = fits.into_iter().map(|f| f.unwrap()).unzip();
        Some(Self { w_grid, features, value_coefs, fraction_coefs })
    }

    /// Value at state coordinates `c` and residual `w`; zero at w = 0 and
    /// monotone-cubic in W between nodes. Slopes are local, so only the four
    /// nodes around `w` are evaluated.
    pub fn value(&self, c: [f64; 2], w: f64) -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        let phi = self.features.basis_of(c);
        // Node 0 is the prepended (0, 0); node j ≥ 1 is w_grid[j − 1].
        let n = self.w_grid.len() + 1;
        let x_at = |j: usize| if j == 0 { 0.0 } else { self.w_grid[j - 1] };
        let y_at = |j: usize| if j == 0 { 0.0 } else { dot(&self.value_coefs[j - 1], &phi).max(0.0) };
        if w >= x_at(n - 1) {
            return y_at(n - 1);
        }
        let i = self.w_grid.partition_point(|v| *v <= w);
        let lo = i.saturating_sub(1);
        let hi = (i + 2).min(n - 1);
        let xs: Vec<f64> = (lo..=hi).map(x_at).collect();
        let ys: Vec<f64> = (lo..=hi).map(y_at).collect();
        MonotoneCubic::new(xs, ys).eval(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_quadratic() {
        let fm = FeatureMap { kind: StateKind::PriceVolume, center: [0.0, 0.0], scale: [1.0, 1.0] };
        let truth = [1.0, -2.0, 0.5, 0.25, 3.0, -1.0];
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..7 {
            for j in 0..7 {
                let phi = fm.basis_of([i as f64 * 0.3 - 1.0, j as f64 * 0.2 - 0.5]);
                y.push(dot(&truth, &phi));
                rows.push(phi);
            }
        }
        let c = least_squares(&rows, &y);
        for (a, b) in c.iter().zip(&truth) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn degenerate_direction_is_harmless() {
        let pts: Vec<[f64; 2]> = (0..20).map(|i| [1.0, i as f64]).collect();
        let fm = FeatureMap::fit(StateKind::PriceRatio, &pts);
        assert_eq!(fm.scale[0], 1.0);
        let rows: Vec<[f64; 6]> = pts.iter().map(|p| fm.basis_of(*p)).collect();
        let y: Vec<f64> = pts.iter().map(|p| 2.0 + p[1]).collect();
        let c = least_squares(&rows, &y);
        for (r, t) in rows.iter().zip(&y) {
            assert!((dot(&c, r) - t).abs() < 1e-9);
        }
    }

    #[test]
    fn local_value_matches_full_spline() {
        let w_grid = vec![1.0, 2.0, 4.0, 8.0, 16.0];
        let samples: Vec<Vec<([f64; 2], f64, f64)>> = w_grid
            .iter()
            .map(|w| (0..12).map(|k| ([k as f64 * 0.1, (k % 5) as f64], w * w * (1.0 + 0.1 * k as f64), 0.5)).collect())
            .collect();
        let sur = Surrogate::fit(StateKind::PriceVolume, w_grid.clone(), &samples).unwrap();
        let c = [0.35, 2.0];
        let phi = sur.features.basis_of(c);
        let mut xs = vec![0.0];
        let mut ys = vec![0.0];
        for (w, coef) in w_grid.iter().zip(&sur.value_coefs) {
            xs.push(*w);
            ys.push(dot(coef, &phi).max(0.0));
        }
        let full = MonotoneCubic::new(xs, ys);
        for k in 0..200 {
            let w = 0.1 * k as f64;
            assert!((sur.value(c, w) - full.eval(w)).abs() < 1e-12 * full.eval(w).max(1.0), "w = {w}");
        }
    }
}
