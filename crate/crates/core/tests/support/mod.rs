//! Shared numerical oracles for the integration suites. Everything here
//! recomputes quantities through routes the library does not use: finite
//! differences instead of analytic gradients, interval search instead of
//! closed-form proximal maps.

#![allow(dead_code)]

use vfl_saddle::linalg::Vector;

/// Central finite-difference gradient of `f` at `at`.
pub fn central_diff(f: impl Fn(&Vector<f64>) -> f64, at: &Vector<f64>, h: f64) -> Vector<f64> {
    let mut g = Vec::with_capacity(at.len());
    for i in 0..at.len() {
        let mut hi = at.clone();
        let mut lo = at.clone();
        hi[i] += h;
        lo[i] -= h;
        g.push((f(&hi) - f(&lo)) / (2.0 * h));
    }
    Vector::new(g).unwrap()
}

/// Golden-section search for the minimizer of a unimodal `f` on `[lo, hi]`,
/// narrowed to an interval of width `width`.
pub fn golden_bracket(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, width: f64) -> f64 {
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    while hi - lo > width {
        let m1 = hi - phi * (hi - lo);
        let m2 = lo + phi * (hi - lo);
        if f(m1) < f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    0.5 * (lo + hi)
}

/// Scalar argmin for smooth piecewise-quadratic objectives: golden section
/// to a coarse bracket, then a parabolic vertex through three samples, which
/// is exact on a quadratic piece. The refinement step `h` must stay inside
/// one smooth piece around the minimizer.
pub fn scalar_argmin_smooth(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let c = golden_bracket(&f, lo, hi, 1e-6);
    let h = 1e-4;
    let (fm, fc, fp) = (f(c - h), f(c), f(c + h));
    let denom = fp - 2.0 * fc + fm;
    if denom <= 0.0 {
        return c;
    }
    c - h * (fp - fm) / (2.0 * denom)
}

/// Scalar argmin for convex objectives with a kink at zero (an absolute-value
/// term). Probes the one-sided slopes at the kink: if they bracket zero the
/// kink itself is the minimizer, otherwise the search continues on the
/// smooth side, where the parabolic refinement applies.
pub fn scalar_argmin_kinked(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let h = 1e-7;
    let f0 = f(0.0);
    let right = (f(h) - f0) / h;
    let left = (f0 - f(-h)) / h;
    if left <= 0.0 && right >= 0.0 {
        0.0
    } else if right < 0.0 {
        scalar_argmin_smooth(f, h, hi)
    } else {
        scalar_argmin_smooth(f, lo, -h)
    }
}

/// Max-norm distance between two block lists.
pub fn blocks_distance(a: &[Vector<f64>], b: &[Vector<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(u, v)| u.sub(v).norm_inf()).fold(0.0, f64::max)
}

/// Euclidean distance between block lists, relative to the norm of `b`.
pub fn blocks_relative_error(a: &[Vector<f64>], b: &[Vector<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut err = 0.0;
    let mut scale = 0.0;
    for (u, v) in a.iter().zip(b) {
        err += u.sub(v).norm_sq();
        scale += v.norm_sq();
    }
    (err / scale).sqrt()
}
