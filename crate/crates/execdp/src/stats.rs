//! Normal-distribution kernels: Mills-ratio terms, one-sided truncated means,
//! the normal–lognormal mixture expectation, and Gauss quadrature rules.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
/// Below this point ψ is evaluated by continued fraction.
const PSI_BRANCH: f64 = -8.0;
const CF_TERMS: usize = 80;
const MAX_GH_ORDER: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub mu: f64,
    pub sigma: f64,
}

impl Gaussian {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        let g = Self { mu, sigma };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(Error::Domain(format!("gaussian mean must be finite, got {}", self.mu)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Domain(format!(
                "gaussian sigma must be positive and finite, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

pub fn norm_pdf(u: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * u * u).exp()
}

pub fn norm_cdf(u: f64) -> f64 {
    0.5 * libm::erfc(-u / SQRT_2)
}

/// Continued fraction 1/(x + 2/(x + 3/(x + ...))), valid for large positive x.
fn tail_cf(x: f64) -> f64 {
    let mut acc = x;
    for k in (2..=CF_TERMS).rev() {
        acc = x + k as f64 / acc;
    }
    1.0 / acc
}

/// Ratio φ(u)/Φ(u), finite for every finite u.
pub fn mills_ratio(u: f64) -> f64 {
    if u < PSI_BRANCH {
        let x = -u;
        x + tail_cf(x)
    } else {
        norm_pdf(u) / norm_cdf(u)
    }
}

/// ψ(u) = u + φ(u)/Φ(u), which equals E[Z + u | Z + u > 0] for standard normal Z.
pub fn mills_psi(u: f64) -> Result<f64> {
    if !u.is_finite() {
        return Err(Error::Domain(format!("mills_psi needs a finite argument, got {u}")));
    }
    Ok(psi(u))
}

/// Unchecked ψ for hot loops; callers guarantee a finite argument.
#[inline]
pub fn psi(u: f64) -> f64 {
    if u < PSI_BRANCH {
        tail_cf(-u)
    } else {
        u + norm_pdf(u) / norm_cdf(u)
    }
}

/// ψ'(u) = 1 − (ψ(u) − u)ψ(u), which lies in (0, 1).
#[inline]
pub fn psi_prime(u: f64) -> f64 {
    let p = psi(u);
    let g = if u < PSI_BRANCH { p - u } else { norm_pdf(u) / norm_cdf(u) };
    (1.0 - g * p).clamp(0.0, 1.0)
}

/// E[Y | Y > 0] = σ ψ(μ/σ).
pub fn truncated_mean_positive(y: Gaussian) -> Result<f64> {
    y.validate()?;
    Ok(y.sigma * psi(y.mu / y.sigma))
}

/// Partial expectation E[Y 1{Y>0}] and probability P(Y>0) for Y ~ N(m, s²).
#[inline]
pub fn positive_part_moments(m: f64, s: f64) -> (f64, f64) {
    let u = m / s;
    let p = norm_cdf(u);
    (m * p + s * norm_pdf(u), p)
}

/// E[a e^B + k | a e^B + k > 0] with B ~ N(μ, σ²) and k < 0.
pub fn lognormal_shifted_mean(b: Gaussian, a: f64, k: f64) -> Result<f64> {
    b.validate()?;
    if !(k < 0.0) {
        return Err(Error::UnsupportedRegime(format!("shift k must be negative, got {k}")));
    }
    if !(a > 0.0) {
        return Err(Error::EmptyEvent(format!(
            "a e^B + k > 0 is impossible with a = {a}, k = {k}"
        )));
    }
    let d2 = (b.mu - (-k / a).ln()) / b.sigma;
    let d1 = d2 + b.sigma;
    let p = norm_cdf(d2);
    if p <= 0.0 {
        return Err(Error::EmptyEvent("conditioning probability underflows".into()));
    }
    Ok(a * (b.mu + 0.5 * b.sigma * b.sigma).exp() * norm_cdf(d1) / p + k)
}

/// Numerator and denominator of E[e^X Y + k | e^X Y + k > 0].
fn mixture_moments(x: Gaussian, y: Gaussian, k: f64) -> (f64, f64) {
    let lo = -9.0;
    let mut hi = 9.0;
    // Point where the conditional mean of e^X Y + k crosses zero, if any.
    let mut crit = None;
    if y.mu > 0.0 {
        let z = ((-k / y.mu).ln() - x.mu) / x.sigma;
        if z.is_finite() {
            hi = f64::max(hi, (z + 9.0).min(60.0));
            if z > lo && z < hi {
                crit = Some(z);
            }
        }
    }
    let mut breaks: Vec<f64> = Vec::new();
    let n_uniform = ((hi - lo) / 0.5).ceil() as usize;
    for i in 0..=n_uniform {
        breaks.push(lo + (hi - lo) * i as f64 / n_uniform as f64);
    }
    if let Some(z) = crit {
        // Transition width of Φ(u(z)) near the crossing, in z units.
        let width = (y.sigma / (y.mu * x.sigma)).clamp(1e-9, 0.5);
        breaks.push(z);
        let mut d = width;
        while d < 0.5 {
            breaks.push(z - d);
            breaks.push(z + d);
            d *= 2.0;
        }
    }
    breaks.retain(|b| *b >= lo && *b <= hi);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-14);

    let rule = gauss_legendre(12);
    let (mut num, mut den) = (0.0, 0.0);
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (t, wt) in rule.nodes.iter().zip(&rule.weights) {
            let z = mid + half * t;
            let e = (x.mu + x.sigma * z).exp();
            let (pe, p) = positive_part_moments(e * y.mu + k, e * y.sigma);
            let f = wt * half * norm_pdf(z);
            num += f * pe;
            den += f * p;
        }
    }
    (num, den)
}

/// E[e^X Y + k | e^X Y + k > 0] for independent Gaussians X, Y and k < 0.
///
/// Conditional on X the variable is Gaussian, so the truncated moments are exact
/// in Y and the remaining one-dimensional integral over X is done by composite
/// Gauss–Legendre with breakpoints around the zero crossing.
pub fn nln_mixture_expectation(x: Gaussian, y: Gaussian, k: f64) -> Result<f64> {
    x.validate()?;
    y.validate()?;
    if !(k < 0.0) {
        return Err(Error::UnsupportedRegime(format!(
            "mixture expectation is only defined here for k < 0, got {k}"
        )));
    }
    let (num, den) = mixture_moments(x, y, k);
    if !(den > 0.0) {
        return Err(Error::EmptyEvent("conditioning probability underflows".into()));
    }
    Ok((num / den).max(0.0))
}

/// P(e^X Y + k > 0) computed with the same quadrature as the mixture mean.
pub fn nln_mixture_probability(x: Gaussian, y: Gaussian, k: f64) -> Result<f64> {
    x.validate()?;
    y.validate()?;
    Ok(mixture_moments(x, y, k).1)
}

/// The published split-at-the-median closed form for the mixture mean.
///
/// It conditions X on its sign and treats the two halves as if they were
/// independent of Y's truncation; it does not equal the conditional mean in
/// general and is kept only for comparison.
pub fn nln_mixture_split_form(x: Gaussian, y: Gaussian, k: f64) -> Result<f64> {
    x.validate()?;
    y.validate()?;
    if !(k < 0.0) {
        return Err(Error::UnsupportedRegime(format!("k must be negative, got {k}")));
    }
    let (mx, sx, my, sy) = (x.mu, x.sigma, y.mu, y.sigma);
    let c_hi = norm_cdf((mx + sx * sx) / sx);
    let c_lo = norm_cdf(mx / sx);
    let zk = (k + my) / sy;
    let z0 = my / sy;
    let g = sy * INV_SQRT_2PI;
    let left = (c_hi / c_lo)
        * (my * (norm_cdf(-zk) - norm_cdf(-z0)) - g * ((-0.5 * zk * zk).exp() - (-0.5 * z0 * z0).exp()));
    let right = ((1.0 - c_hi) / (1.0 - c_lo)) * (my * (1.0 - norm_cdf(-zk)) + g * (-0.5 * zk * zk).exp());
    Ok(k + (mx + 0.5 * sx * sx).exp() * (left + right))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// E[f(N(μ, σ²))] under the Gauss–Hermite convention.
    pub fn expect<F: FnMut(f64) -> f64>(&self, mu: f64, sigma: f64, mut f: F) -> f64 {
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(SQRT_2 * sigma * x + mu);
        }
        acc / PI.sqrt()
    }

    /// Standard-normal abscissae and probability weights (weights sum to 1).
    pub fn standard_normal(&self) -> (Vec<f64>, Vec<f64>) {
        let s = PI.sqrt();
        (
            self.nodes.iter().map(|x| SQRT_2 * x).collect(),
            self.weights.iter().map(|w| w / s).collect(),
        )
    }
}

/// Gauss–Hermite rule for weight e^{-x²}; exact for polynomials of degree ≤ 2n−1.
pub fn gauss_hermite(n: usize) -> Result<QuadratureRule> {
    if n == 0 || n > MAX_GH_ORDER {
        return Err(Error::Domain(format!(
            "gauss_hermite order must be in 1..={MAX_GH_ORDER}, got {n}"
        )));
    }
    let pim4 = PI.powf(-0.25);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = 2.0 / (pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    // Ascending order.
    nodes.reverse();
    weights.reverse();
    Ok(QuadratureRule { nodes, weights })
}

/// Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> QuadratureRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    QuadratureRule { nodes, weights }
}
