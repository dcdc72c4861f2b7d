//! Half-line quadrature for closed-form integrands that behave like powers of
//! `r` at both ends.

use crate::error::{Error, Result};
use crate::radialgrid::gauss_legendre;

/// Which rule to use on the logarithmic variable `s = ln r`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rule {
    /// Trapezoid with step `h`; spectrally accurate for smooth integrands.
    Trapezoid,
    /// Gauss-Legendre panels of 16 points, an independent check on the first.
    GaussPanels,
}

/// `∫_0^∞ f(r) dr` (the caller folds in `r^{N-1}`), over `r ∈ [e^{s0}, e^{s1}]`
/// with power-law tails fitted at both ends.
pub fn half_line(f: impl Fn(f64) -> f64, s0: f64, s1: f64, n: usize, rule: Rule) -> Result<f64> {
    let g = |s: f64| {
        let r = s.exp();
        f(r) * r
    };
    let body = match rule {
        Rule::Trapezoid => {
            let h = (s1 - s0) / n as f64;
            let mut acc = 0.5 * (g(s0) + g(s1));
            for i in 1..n {
                acc += g(s0 + i as f64 * h);
            }
            acc * h
        }
        Rule::GaussPanels => {
            let (x, w) = gauss_legendre(16);
            let panels = n.div_ceil(16).max(1);
            let width = (s1 - s0) / panels as f64;
            let mut acc = 0.0;
            for p in 0..panels {
                let mid = s0 + (p as f64 + 0.5) * width;
                for (xi, wi) in x.iter().zip(&w) {
                    acc += 0.5 * width * wi * g(mid + 0.5 * width * xi);
                }
            }
            acc
        }
    };
    let dh = 1e-3;
    Ok(body + end_tail(g(s0), g(s0 + dh), dh, true)? + end_tail(g(s1), g(s1 - dh), dh, false)?)
}

/// `∫_{e^{s0}}^∞ f(r) dr` with a hard lower limit: trapezoid in `s = ln r`
/// and a fitted tail only beyond `e^{s1}`. `f` must be smooth across `e^{s0}`.
pub fn from_radius(f: impl Fn(f64) -> f64, s0: f64, s1: f64, n: usize) -> Result<f64> {
    let g = |s: f64| {
        let r = s.exp();
        f(r) * r
    };
    let h = (s1 - s0) / n as f64;
    let mut acc = 0.5 * (g(s0) + g(s1));
    for i in 1..n {
        acc += g(s0 + i as f64 * h);
    }
    // Euler-Maclaurin endpoint correction; f is smooth across both limits
    let e = 1e-4;
    let dg = |s: f64| (g(s + e) - g(s - e)) / (2.0 * e);
    let corr = h * h / 12.0 * (dg(s1) - dg(s0));
    let dh = 1e-3;
    Ok(acc * h - corr + end_tail(g(s1), g(s1 - dh), dh, false)?)
}

/// Tail of `∫ g(s) ds` beyond an endpoint with `g ≈ A e^{κ s}`.
pub(crate) fn end_tail(g_end: f64, g_in: f64, dh: f64, left: bool) -> Result<f64> {
    if g_end == 0.0 || !g_end.is_finite() {
        return Ok(0.0);
    }
    if g_in == 0.0 || g_in.signum() != g_end.signum() {
        return Ok(0.0);
    }
    let kappa = (g_end.abs().ln() - g_in.abs().ln()) / dh;
    // kappa is the growth rate moving outward; it must be negative
    if kappa >= 0.0 {
        if g_end.abs() < 1e-300 {
            return Ok(0.0);
        }
        return Err(Error::Tail { exponent: if left { -kappa } else { kappa } });
    }
    Ok(g_end / -kappa)
}
