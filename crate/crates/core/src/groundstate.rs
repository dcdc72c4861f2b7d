//! The explicit ground state `W_a`, its scaling generators, the modulation
//! constants and the two-scale interaction integrals.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::Params;
use crate::quad::{end_tail, from_radius, half_line, Rule};
use crate::radialgrid::{Operators, RadialField, RadialGrid};

/// Closed forms bound to one parameter pack. All powers of `W_a` go through
/// `ln W_a` so extreme radii neither overflow nor underflow early.
#[derive(Clone, Copy, Debug)]
pub struct GroundState {
    pub params: Params,
    ln_c: f64,
    q: f64,
}

/// `ln(1 + e^x)` without overflow.
fn ln1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl GroundState {
    pub fn new(params: Params) -> Self {
        let d = params.dim();
        let b = params.beta;
        let ln_c = (d - 2.0) / 4.0 * (d * (d - 2.0) * b * b).ln();
        Self { params, ln_c, q: (d - 2.0) / 2.0 }
    }

    /// `(ln W, ln s)` with `s = r^{2β}`.
    fn logs(&self, r: f64) -> (f64, f64) {
        let lr = r.ln();
        let ls = 2.0 * self.params.beta * lr;
        (self.ln_c + self.q * (self.params.beta - 1.0) * lr - self.q * ln1p_exp(ls), ls)
    }

    pub fn ln_w(&self, r: f64) -> f64 {
        self.logs(r).0
    }

    /// `W_a(r)`.
    pub fn w(&self, r: f64) -> f64 {
        self.logs(r).0.exp()
    }

    /// `W_a(r)^p`.
    pub fn w_pow(&self, r: f64, p: f64) -> f64 {
        (p * self.logs(r).0).exp()
    }

    /// Checked evaluation for public entry points.
    pub fn try_w(&self, r: f64) -> Result<f64> {
        if r > 0.0 && r.is_finite() {
            Ok(self.w(r))
        } else {
            Err(Error::Domain(format!("W_a needs r > 0, got {r}")))
        }
    }

    /// `ΛW_a = ((N-2)/2 + r∂_r) W_a`.
    pub fn lambda_w(&self, r: f64) -> f64 {
        let (lw, ls) = self.logs(r);
        // (1 - s)/(1 + s) = -tanh(ln s / 2)
        lw.exp() * self.q * self.params.beta * -(0.5 * ls).tanh()
    }

    /// `s/(1+s)`, `s/(1+s)²` and `(1-s)/(1+s)` from `ln s`.
    fn fractions(ls: f64) -> (f64, f64, f64) {
        let sig = 1.0 / (1.0 + (-ls).exp());
        let ch = (0.5 * ls).cosh();
        let bell = if ch.is_finite() { 0.25 / (ch * ch) } else { 0.0 };
        (sig, bell, -(0.5 * ls).tanh())
    }

    /// `r∂_r(ΛW_a)`.
    fn d_lambda_w(&self, r: f64) -> f64 {
        let (lw, ls) = self.logs(r);
        let (sig, bell, odd) = Self::fractions(ls);
        let (b, q) = (self.params.beta, self.q);
        let psi = q * (b - 1.0) - 2.0 * b * q * sig;
        lw.exp() * (psi * q * b * odd - 4.0 * q * b * b * bell)
    }

    /// `Λ₀ΛW_a = (N/2 + r∂_r) ΛW_a`, differentiated analytically.
    pub fn lambda0_lambda_w(&self, r: f64) -> f64 {
        (self.q + 1.0) * self.lambda_w(r) + self.d_lambda_w(r)
    }

    /// `A W_a = (∂_r + c/r) W_a`.
    pub fn a_w(&self, r: f64) -> f64 {
        let (lw, ls) = self.logs(r);
        let (sig, _, _) = Self::fractions(ls);
        -lw.exp() * 2.0 * self.params.beta * self.q * sig / r
    }

    /// `A ΛW_a = -(2qβ²/r) [q s(1-s)/(1+s)² + 2 s/(1+s)²] W_a`.
    pub fn a_lambda_w(&self, r: f64) -> f64 {
        let (lw, ls) = self.logs(r);
        let (sig, bell, odd) = Self::fractions(ls);
        let (b, q) = (self.params.beta, self.q);
        // s(1-s)/(1+s)² = sig * odd
        -lw.exp() * 2.0 * q * b * b * (q * sig * odd + 2.0 * bell) / r
    }

    /// `L_a ΛW_a = ((N+2)/(N-2)) W_a^{4/(N-2)} ΛW_a`, the kernel relation of
    /// the linearized operator.
    pub fn la_lambda_w(&self, r: f64) -> f64 {
        let d = self.params.dim();
        (d + 2.0) / (d - 2.0) * self.w_pow(r, 4.0 / (d - 2.0)) * self.lambda_w(r)
    }

    /// `L_a W_a` from the analytic second derivative; equals `W^{(N+2)/(N-2)}`.
    pub fn la_w_analytic(&self, r: f64) -> f64 {
        let (lw, ls) = self.logs(r);
        let (sig, bell, _) = Self::fractions(ls);
        let (b, q) = (self.params.beta, self.q);
        let psi = q * (b - 1.0) - 2.0 * b * q * sig;
        let dpsi = -4.0 * b * b * q * bell;
        let d = self.params.dim();
        lw.exp() * (-psi * psi - dpsi - (d - 2.0) * psi + self.params.a) / (r * r)
    }

    /// Energy-space scaling `f_(λ)(r) = λ^{-(N-2)/2} f(r/λ)`.
    pub fn scale_h1(&self, lambda: f64, r: f64, f: impl Fn(f64) -> f64) -> f64 {
        lambda.powf(-self.q) * f(r / lambda)
    }

    /// `L²` scaling `g_[λ](r) = λ^{-N/2} g(r/λ)`; also the rule for `A f_(λ)`.
    pub fn scale_l2(&self, lambda: f64, r: f64, f: impl Fn(f64) -> f64) -> f64 {
        lambda.powf(-self.q - 1.0) * f(r / lambda)
    }

    pub fn w_scaled(&self, r: f64, lambda: f64) -> f64 {
        self.scale_h1(lambda, r, |x| self.w(x))
    }

    pub fn lambda_w_scaled(&self, r: f64, lambda: f64) -> f64 {
        self.scale_h1(lambda, r, |x| self.lambda_w(x))
    }

    /// `∫ · dr` on the half line for the integrands used here.
    fn integral(&self, f: impl Fn(f64) -> f64, rule: Rule) -> Result<f64> {
        half_line(f, -60.0, 60.0, 24_000, rule)
    }

    /// Modulation constants and ground-state diagnostics.
    pub fn constants(&self) -> Result<GroundStateConstants> {
        self.constants_with(Rule::Trapezoid)
    }

    pub fn constants_with(&self, rule: Rule) -> Result<GroundStateConstants> {
        let p = &self.params;
        let d = p.dim();
        let b = p.beta;
        let om = p.sphere_area();
        let rn = |r: f64| r.powf(d - 1.0);
        let m = if p.p() > 2.0 {
            om * self.integral(|r| self.lambda_w(r).powi(2) * rn(r), rule)?
        } else {
            f64::INFINITY
        };
        let coupling = om
            * self.integral(
                |r| (-(b + 1.0) * (d - 2.0) / 2.0 * r.ln() + (d + 2.0) / (d - 2.0) * self.ln_w(r)).exp() * rn(r),
                rule,
            )?;
        let kappa0 = (d * (d - 2.0)).powf((d - 2.0) / 4.0) * b.powf(d / 2.0) / 2.0 * coupling;
        let kappa0_alt = d * (d - 2.0).powf((d - 2.0) / 4.0) * b.powf(d / 2.0) / 2.0 * coupling;
        let kappa1 = m * (d * (d - 2.0) * b * b).powf((d - 2.0) / 4.0) * coupling;
        let kappa1_prime_alt = (d * (d - 2.0) * b * b).powf((d - 2.0) / 2.0) * coupling;
        let h1 = om * self.integral(|r| self.a_w(r).powi(2) * rn(r), rule)?;
        let crit = p.critical_power();
        let lp = om * self.integral(|r| self.w_pow(r, crit) * rn(r), rule)?;
        let energy = 0.5 * h1 - (d - 2.0) / (2.0 * d) * lp;
        let a_lw = om * self.integral(|r| self.a_lambda_w(r).powi(2) * rn(r), rule)?;
        let q_exp = p.p() / 2.0;
        Ok(GroundStateConstants {
            m,
            kappa0,
            kappa0_alt,
            kappa1,
            kappa1_prime: kappa1 / m,
            kappa1_prime_alt,
            kappa1_ode: kappa0 * m / q_exp,
            energy_w: energy,
            sobolev_ratio: h1.sqrt() / lp.powf(1.0 / crit),
            h1a_norm_sq: h1,
            a_lambda_w_norm_sq: a_lw,
        })
    }

    /// `‖ΛW_a‖²_{Ḣ¹_a(r≥R)}` over `ℝ^N`.
    pub fn a_lambda_w_tail_sq(&self, r_from: f64) -> Result<f64> {
        let d = self.params.dim();
        let om = self.params.sphere_area();
        let s0 = r_from.ln();
        Ok(om * from_radius(|r| self.a_lambda_w(r).powi(2) * r.powf(d - 1.0), s0, s0 + 60.0, 24_000)?)
    }

    /// `sup |L_a W - W^{(N+2)/(N-2)}| / max(1, W^{(N+2)/(N-2)})` over interior
    /// nodes, for the scaled profile `W_(λ)`.
    pub fn stationarity_residual(&self, grid: &Arc<RadialGrid>, lambda: f64) -> Result<f64> {
        let ops = Operators::new(grid, &self.params)?;
        let w = RadialField::from_fn(grid, |r| self.w_scaled(r, lambda));
        let la = ops.apply_la(&w)?;
        let crit = (self.params.dim() + 2.0) / (self.params.dim() - 2.0);
        let n = grid.len();
        Ok((2..n - 2)
            .map(|i| {
                let rhs = w.values[i].abs().powf(crit);
                (la.values[i] - rhs).abs() / rhs.max(1.0)
            })
            .fold(0.0, f64::max))
    }

    /// Two-scale integral of the given kind at `0 < λ < μ`, over `ℝ^N`.
    pub fn interaction(&self, lambda: f64, mu: f64, kind: InteractionKind) -> Result<f64> {
        if !(lambda > 0.0 && lambda < mu) {
            return Err(Error::Domain(format!("interaction needs 0 < lambda < mu, got {lambda}, {mu}")));
        }
        let p = &self.params;
        let d = p.dim();
        let om = p.sphere_area();
        let rn = |r: f64| r.powf(d - 1.0);
        let s0 = lambda.ln() - 45.0;
        let s1 = mu.ln() + 45.0;
        let n = 40_000;
        let q4 = 4.0 / (d - 2.0);
        let l2 = |scale: f64, r: f64, f: &dyn Fn(f64) -> f64| self.scale_l2(scale, r, f);
        let h1 = |scale: f64, r: f64, f: &dyn Fn(f64) -> f64| self.scale_h1(scale, r, f);
        match kind {
            InteractionKind::AlwAlw => {
                if p.p() < 2.0 {
                    return Err(Error::Domain("the alw-alw integral needs (N-2)beta >= 2".into()));
                }
                let f = |r: f64| {
                    let x = l2(lambda, r, &|x| self.a_lambda_w(x)) * l2(mu, r, &|x| self.a_lambda_w(x));
                    let y = l2(lambda, r, &|x| self.a_w(x)) * l2(mu, r, &|x| self.a_w(x));
                    (x.abs() + y.abs()) * rn(r)
                };
                Ok(om * half_line(f, s0, s1, n, Rule::Trapezoid)?)
            }
            InteractionKind::LwLw => {
                if p.p() <= 2.0 {
                    return Err(Error::Domain("the lw-lw integral needs (N-2)beta > 2 (Lambda W in L2)".into()));
                }
                let f = |r: f64| {
                    let a0 = l2(lambda, r, &|x| self.lambda_w(x));
                    let x = a0 * l2(mu, r, &|x| self.lambda_w(x));
                    let y = a0 * l2(mu, r, &|x| self.lambda0_lambda_w(x));
                    (x.abs() + y.abs()) * rn(r)
                };
                Ok(om * half_line(f, s0, s1, n, Rule::Trapezoid)?)
            }
            InteractionKind::WW4 => {
                let e = 2.0 * d / (d + 2.0);
                let f = |r: f64| {
                    let v = h1(mu, r, &|x| self.w(x)) * lambda.powi(-2) * self.w_pow(r / lambda, q4);
                    v.abs().powf(e) * rn(r)
                };
                Ok((om * half_line(f, s0, s1, n, Rule::Trapezoid)?).powf(1.0 / e))
            }
            InteractionKind::LwLaLw => {
                let f = |r: f64| {
                    let v = l2(mu, r, &|x| self.lambda_w(x)) * l2(lambda, r, &|x| self.la_lambda_w(x));
                    v.abs() * rn(r)
                };
                Ok(om * half_line(f, s0, s1, n, Rule::Trapezoid)?)
            }
            InteractionKind::WnWn => {
                let e = d / (d - 2.0);
                let f = |r: f64| (h1(lambda, r, &|x| self.w(x)) * h1(mu, r, &|x| self.w(x))).powf(e) * rn(r);
                Ok(om * half_line(f, s0, s1, n, Rule::Trapezoid)?)
            }
            InteractionKind::ConeMin => {
                if p.n < 5 {
                    return Err(Error::Domain("the min-cone bound is stated for N >= 5".into()));
                }
                let f = |r: f64| {
                    let wl = h1(lambda, r, &|x| self.w(x));
                    let wm = h1(mu, r, &|x| self.w(x));
                    let a = lambda.powi(-2) * self.w_pow(r / lambda, q4) * wm;
                    let b = mu.powi(-2) * self.w_pow(r / mu, q4) * wl;
                    a.min(b)
                };
                cone_l1l2(&f, 0, d, om, s0, s1)
            }
            InteractionKind::ConeLambda => {
                let pot = |r: f64| lambda.powi(-2) * self.w_pow(r / lambda, q4);
                let f1 = |r: f64| pot(r) * h1(mu, r, &|x| self.lambda_w(x));
                let f2 = |r: f64| pot(r) * l2(mu, r, &|x| self.lambda_w(x));
                Ok(cone_l1l2(&f1, 0, d, om, s0, s1)? + cone_l1l2(&f2, 1, d, om, s0, s1)?)
            }
        }
    }

    /// Least-squares log-log slope of the interaction over
    /// `λ/μ = 2^{-20}, 2^{-24}, …, 2^{-40}`. The window is deep because the
    /// profiles only become scale free for `λ/μ ≪ 1/(N(N-2))` and some
    /// integrands carry a `log(μ/λ)` factor.
    pub fn fit_interaction_exponent(&self, kind: InteractionKind) -> Result<f64> {
        let pts: Vec<(f64, f64)> = (5..=10)
            .map(|j| {
                let ratio = 2f64.powi(-4 * j);
                self.interaction(ratio, 1.0, kind).map(|v| (ratio.ln(), v.ln()))
            })
            .collect::<Result<_>>()?;
        Ok(ls_slope(&pts))
    }

    /// Exponent of the known decay bound for each kind.
    pub fn bound_exponent(&self, kind: InteractionKind) -> f64 {
        let p = self.params.p();
        let b = self.params.beta;
        let n = self.params.n;
        match kind {
            InteractionKind::AlwAlw | InteractionKind::LwLaLw => p / 2.0,
            InteractionKind::LwLw => p / 2.0 - 1.0,
            InteractionKind::WW4 => {
                if n >= 6 {
                    2.0 * b
                } else {
                    p / 2.0
                }
            }
            InteractionKind::WnWn => self.params.dim() * b / 2.0,
            InteractionKind::ConeMin => (self.params.dim() + 2.0) * b / 4.0,
            InteractionKind::ConeLambda => {
                if (self.params.dim() - 6.0) * b <= 0.0 {
                    p / 2.0
                } else {
                    2.0 * b
                }
            }
        }
    }
}

/// `∫_ℝ |t|^{tpow} (ω ∫_{r ≥ |t|} f² r^{N-1} dr)^{1/2} dt` on a log grid.
fn cone_l1l2(f: &dyn Fn(f64) -> f64, tpow: i32, d: f64, om: f64, s0: f64, s1: f64) -> Result<f64> {
    let n = 30_000;
    let h = (s1 - s0) / n as f64;
    let s: Vec<f64> = (0..=n).map(|i| s0 + i as f64 * h).collect();
    let dens: Vec<f64> = s.iter().map(|&si| { let r = si.exp(); f(r).powi(2) * r.powf(d - 1.0) * r }).collect();
    // tail beyond the last node, then cumulative trapezoid inward
    let mut tail = vec![0.0; n + 1];
    tail[n] = end_tail(dens[n], dens[n - 1], h, false)?;
    for i in (0..n).rev() {
        tail[i] = tail[i + 1] + 0.5 * h * (dens[i] + dens[i + 1]);
    }
    let g: Vec<f64> = s.iter().zip(&tail).map(|(&si, &t)| { let r = si.exp(); r.powi(tpow) * (om * t).sqrt() * r }).collect();
    let mut acc = 0.5 * h * (g[0] + g[n]);
    acc += g[1..n].iter().sum::<f64>() * h;
    acc += end_tail(g[0], g[1], h, true)? + end_tail(g[n], g[n - 1], h, false)?;
    // both signs of t
    Ok(2.0 * acc)
}

pub(crate) fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// The interaction integrals of the two-scale estimates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum InteractionKind {
    /// `|A(ΛW)_(λ) A(ΛW)_(μ)| + |A W_(λ) A W_(μ)|`.
    AlwAlw,
    /// `|ΛW_[λ] ΛW_[μ]| + |ΛW_[λ] (Λ₀ΛW)_[μ]|`.
    LwLw,
    /// `‖W_(μ) W_(λ)^{4/(N-2)}‖_{L^{2N/(N+2)}}`.
    WW4,
    /// `|ΛW_[μ] (L_a ΛW)_[λ]|`.
    LwLaLw,
    /// `W_(λ)^{N/(N-2)} W_(μ)^{N/(N-2)}`.
    WnWn,
    /// Cone-restricted `L¹L²` of the smaller cross product (`N ≥ 5`).
    ConeMin,
    /// Cone-restricted `L¹L²` of `W_(λ)^{4/(N-2)} ΛW_(μ)` plus its `t ΛW_[μ]` partner.
    ConeLambda,
}

impl InteractionKind {
    pub const ALL: [InteractionKind; 7] = [
        InteractionKind::AlwAlw,
        InteractionKind::LwLw,
        InteractionKind::WW4,
        InteractionKind::LwLaLw,
        InteractionKind::WnWn,
        InteractionKind::ConeMin,
        InteractionKind::ConeLambda,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            InteractionKind::AlwAlw => "alw-alw",
            InteractionKind::LwLw => "lw-lw",
            InteractionKind::WW4 => "w-w4",
            InteractionKind::LwLaLw => "lw-lalw",
            InteractionKind::WnWn => "wn-wn",
            InteractionKind::ConeMin => "cone-min",
            InteractionKind::ConeLambda => "cone-lambda",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| Error::Validation(format!("unknown interaction kind {s}")))
    }
}

/// Constants attached to `W_a`; integrals are over `ℝ^N`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GroundStateConstants {
    /// `‖ΛW_a‖²_{L²}`; infinite when `ΛW_a ∉ L²`.
    pub m: f64,
    pub kappa0: f64,
    /// `κ₀` with the alternative prefactor `N (N-2)^{(N-2)/4} β^{N/2}/2`.
    pub kappa0_alt: f64,
    pub kappa1: f64,
    /// `κ₁ / m`.
    pub kappa1_prime: f64,
    /// The alternative `κ₁'` with exponent `(N-2)/2`.
    pub kappa1_prime_alt: f64,
    /// `κ₀ m / q`, the value that makes the modulation Hamiltonian exact.
    pub kappa1_ode: f64,
    pub energy_w: f64,
    pub sobolev_ratio: f64,
    pub h1a_norm_sq: f64,
    pub a_lambda_w_norm_sq: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::derive_params;

    fn gs(n: usize, a: f64) -> GroundState {
        GroundState::new(derive_params(n, a).unwrap())
    }

    #[test]
    fn value_at_one() {
        let g = gs(3, 2.0);
        assert!((g.w(1.0) - 27f64.powf(0.25) / 2f64.sqrt()).abs() < 1e-14);
        assert!((g.w(1.0) - 1.61185).abs() < 1e-5);
        assert!(g.try_w(0.0).is_err());
    }

    #[test]
    fn extreme_radii_are_finite() {
        let g = gs(5, 4.0);
        for r in [1e-200, 1e-40, 1e40, 1e200] {
            assert!(g.w(r).is_finite() && g.lambda_w(r).is_finite() && g.a_lambda_w(r).is_finite());
        }
        let lead = (5.0 * 3.0 * g.params.beta.powi(2)).powf(0.75);
        let r: f64 = 1e30;
        assert!((r.powf(-g.params.alpha) * g.w(r) / lead - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lambda_w_matches_finite_difference() {
        for (n, a) in [(3, 2.0), (5, 4.0), (4, 1.0)] {
            let g = gs(n, a);
            let q = (n as f64 - 2.0) / 2.0;
            for &r in &[0.3, 0.9, 1.7, 4.0] {
                let h = 1e-5 * r;
                let dw = (g.w(r + h) - g.w(r - h)) / (2.0 * h);
                let lw = q * g.w(r) + r * dw;
                assert!((lw - g.lambda_w(r)).abs() < 1e-8, "{n} {a} {r}");
                let dl = (g.lambda_w(r + h) - g.lambda_w(r - h)) / (2.0 * h);
                assert!(((q + 1.0) * g.lambda_w(r) + r * dl - g.lambda0_lambda_w(r)).abs() < 1e-8);
                let aw = dw + g.params.c / r * g.w(r);
                assert!((aw - g.a_w(r)).abs() < 1e-8);
                let alw = dl + g.params.c / r * g.lambda_w(r);
                assert!((alw - g.a_lambda_w(r)).abs() < 1e-8, "{} vs {}", alw, g.a_lambda_w(r));
            }
        }
    }

    #[test]
    fn analytic_residual_is_round_off() {
        for (n, a) in [(3, 2.0), (5, 4.0), (3, 0.0), (6, 3.0)] {
            let g = gs(n, a);
            for &r in &[1.0, 0.2, 3.0] {
                let crit = (n as f64 + 2.0) / (n as f64 - 2.0);
                let res = g.la_w_analytic(r) - g.w_pow(r, crit);
                assert!(res.abs() < 1e-12 * g.w_pow(r, crit).max(1.0), "{n} {a} {r}: {res}");
            }
        }
    }

    #[test]
    fn sign_structure() {
        let g = gs(3, 2.0);
        assert_eq!(g.lambda_w(1.0), 0.0);
        assert!(g.lambda_w(0.5) > 0.0 && g.lambda_w(2.0) < 0.0);
    }

    #[test]
    fn classical_mass_diverges() {
        let c = gs(3, 0.0).constants().unwrap();
        assert!(c.m.is_infinite());
    }

    #[test]
    fn energy_identity() {
        // ∫|AW|² = ∫W^{2N/(N-2)} gives E = ‖W‖²/N
        for (n, a) in [(3, 2.0), (5, 4.0)] {
            let c = gs(n, a).constants().unwrap();
            assert!((c.energy_w - c.h1a_norm_sq / n as f64).abs() < 1e-9 * c.h1a_norm_sq);
            assert!((c.kappa1_prime * c.m - c.kappa1).abs() < 1e-12 * c.kappa1);
        }
    }

    #[test]
    fn stationarity_converges_at_second_order() {
        let g = gs(3, 2.0);
        let r1 = g.stationarity_residual(&RadialGrid::log_spaced(3, 1e-2, 1e2, 500).unwrap(), 1.0).unwrap();
        let r2 = g.stationarity_residual(&RadialGrid::log_spaced(3, 1e-2, 1e2, 999).unwrap(), 1.0).unwrap();
        assert!((r1 / r2).log2() > 1.8, "{r1} {r2}");
    }
}
