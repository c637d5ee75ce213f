//! Scalar root finding and bounded minimization.

use crate::error::{Error, Result};

const GOLDEN: f64 = 0.381_966_011_250_105_1;

/// Brent's method on a bracket with a sign change.
pub fn brent_root<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, xtol: f64, max_iter: usize) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoConvergence { lo, hi, residual: fa.abs().min(fb.abs()) });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    Err(Error::NoConvergence { lo: b.min(c), hi: b.max(c), residual: fb.abs() })
}

/// Golden-section search for a minimum of a unimodal function on [lo, hi].
pub fn golden_min<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, xtol: f64) -> (f64, f64) {
    let (mut a, mut b) = (lo, hi);
    let mut x1 = a + GOLDEN * (b - a);
    let mut x2 = b - GOLDEN * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > xtol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = a + GOLDEN * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = b - GOLDEN * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Global minimum on [lo, hi]: uniform scan, then golden refinement around the
/// best scan point. Endpoints are always candidates.
pub fn scan_then_golden<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, scan: usize, xtol: f64) -> (f64, f64) {
    if hi <= lo {
        let v = f(lo);
        return (lo, v);
    }
    let n = scan.max(2);
    let h = (hi - lo) / n as f64;
    let mut best = (lo, f(lo));
    let mut best_i = 0;
    for i in 1..=n {
        let x = if i == n { hi } else { lo + h * i as f64 };
        let v = f(x);
        if v < best.1 {
            best = (x, v);
            best_i = i;
        }
    }
    let a = if best_i == 0 { lo } else { lo + h * (best_i - 1) as f64 };
    let b = if best_i == n { hi } else { lo + h * (best_i + 1) as f64 };
    let refined = golden_min(&mut f, a, b.min(hi), xtol);
    if refined.1 < best.1 {
        refined
    } else {
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_finds_cubic_root() {
        let r = brent_root(|x| x * x * x - 2.0, 0.0, 2.0, 1e-14, 200).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-13);
    }

    #[test]
    fn brent_requires_sign_change() {
        assert!(brent_root(|x| x * x + 1.0, -1.0, 1.0, 1e-12, 200).is_err());
    }

    #[test]
    fn golden_quadratic() {
        let (x, _) = golden_min(|x| (x - 0.3) * (x - 0.3), 0.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-8);
    }

    #[test]
    fn scan_picks_boundary() {
        let (x, _) = scan_then_golden(|x| -x, 0.0, 1.0, 16, 1e-12);
        assert_eq!(x, 1.0);
    }

    #[test]
    fn scan_escapes_local_minimum() {
        let f = |x: f64| (x - 0.2).powi(2) * (x - 0.9).powi(2) + 0.01 * x;
        let (x, _) = scan_then_golden(f, 0.0, 1.0, 64, 1e-12);
        assert!(x < 0.5, "{x}");
    }
}
