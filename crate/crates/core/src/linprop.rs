//! Free evolution under `∂_t² + L_a` through the Hankel representation,
//! exterior energies, channel limits and the radiation field.
//!
//! Energies here carry no factor ½: `E(f, g) = ∫ (|A f|² + g²) r^{N-1} dr`.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hankel::{HankelPlan, Kernel};
use crate::nonlinear::{Mode, Scheme};
use crate::params::Params;
use crate::radialgrid::{gauss_legendre, integrate, Operators, RadialField, RadialGrid, StatePair};

/// Oscillation scale per quadrature panel on the light-cone shells.
const PANEL_LENGTH: f64 = 0.5;
const PANEL_ORDER: usize = 12;
/// Beyond the support the solution is negligible; this pads the shells.
const SUPPORT_PAD: f64 = 2.0;
/// Growth of `E_ext` in `t` tolerated as noise, relative to the input energy.
const MONOTONE_TOL: f64 = 1e-4;

/// `∫ (|A f|² + g²) r^{N-1} dr` over `r ≥ r_from`; the fields are taken to
/// vanish beyond the grid.
pub fn pair_energy(params: &Params, s: &StatePair, r_from: f64) -> Result<f64> {
    let grid = s.grid();
    if r_from >= grid.r_max() {
        return Ok(0.0);
    }
    let ops = Operators::new(grid, params)?;
    let af = ops.apply_a(&s.position)?;
    let density = af.zip_with(&s.velocity, |a, g| a * a + g * g)?;
    integrate(&density, r_from, grid.r_max())
}

/// `E_ext(t, R)` for a state already evolved to time `t`.
pub fn exterior_energy(params: &Params, s_t: &StatePair, t: f64, r: f64) -> Result<f64> {
    pair_energy(params, s_t, t.abs() + r)
}

/// Largest node where the data is above `tol` times its peak.
pub fn support_radius(s: &StatePair, tol: f64) -> f64 {
    let x = s.grid().nodes();
    let peak = s.position.sup_norm().max(s.velocity.sup_norm());
    if peak == 0.0 {
        return 0.0;
    }
    (0..x.len())
        .rev()
        .find(|&i| s.position.values[i].abs().max(s.velocity.values[i].abs()) > tol * peak)
        .map_or(0.0, |i| x[i])
}

/// Hankel-side data `(f̃, g̃)` with the machinery to synthesize the free
/// solution anywhere.
#[derive(Clone, Debug)]
pub struct Propagator {
    pub params: Params,
    kernel: Kernel,
    pub rho: Arc<Vec<f64>>,
    pub rho_weights: Arc<Vec<f64>>,
    pub f_hat: Vec<f64>,
    pub g_hat: Vec<f64>,
}

/// `(u, ∂_t u, A u)` at one point of spacetime.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Sample {
    pub u: f64,
    pub ut: f64,
    pub au: f64,
}

impl Propagator {
    /// Transforms `s` so that the solution can be evaluated at radii up to
    /// `reach` without aliasing.
    pub fn new(params: &Params, s: &StatePair, reach: f64) -> Result<Self> {
        let grid = s.grid();
        let x = grid.nodes();
        let dr = x.windows(2).map(|w| w[1] - w[0]).fold(x[0], f64::max);
        let rho_max = PI / (4.0 * dr);
        // the synthesized field repeats with period 2π/Δρ; keep images beyond reach + data
        let span = reach.max(grid.r_max()) + grid.r_max();
        let n_rho = (rho_max * span / PI).ceil() as usize;
        let plan = HankelPlan::new(params, grid, rho_max, n_rho)?;
        let f_hat = plan.fwd(&s.position)?.values;
        let g_hat = plan.fwd(&s.velocity)?.values;
        Ok(Self { params: *params, kernel: Kernel::new(params), rho: plan.rho.clone(), rho_weights: plan.rho_weights.clone(), f_hat, g_hat })
    }

    /// Spectral energy `∫ (ρ² f̃² + g̃²) ρ^{N-1} dρ`, equal to the data energy.
    pub fn energy(&self) -> f64 {
        self.rho
            .iter()
            .zip(self.rho_weights.iter())
            .zip(self.f_hat.iter().zip(&self.g_hat))
            .map(|((q, w), (f, g))| (q * q * f * f + g * g) * w)
            .sum()
    }

    /// The free solution at time `t` and radius `r`.
    pub fn sample(&self, t: f64, r: f64) -> Sample {
        let mut s = Sample::default();
        for ((&q, &w), (&f, &g)) in self.rho.iter().zip(self.rho_weights.iter()).zip(self.f_hat.iter().zip(&self.g_hat)) {
            let (sn, cs) = (t * q).sin_cos();
            let z = r * q;
            let k = self.kernel.value(z) * w;
            let pos = cs * f + sn / q * g;
            s.u += k * pos;
            s.ut += k * (cs * g - q * sn * f);
            s.au += q * self.kernel.a_factor(z) * w * pos;
        }
        s
    }

    pub fn samples(&self, t: f64, radii: &[f64]) -> Vec<Sample> {
        radii.par_iter().map(|&r| self.sample(t, r)).collect()
    }

    /// `(u(t), ∂_t u(t))` on `grid`.
    pub fn state_on(&self, t: f64, grid: &Arc<RadialGrid>) -> Result<StatePair> {
        let s = self.samples(t, grid.nodes());
        StatePair::new(
            RadialField::new(grid.clone(), s.iter().map(|x| x.u).collect())?,
            RadialField::new(grid.clone(), s.iter().map(|x| x.ut).collect())?,
        )
    }

    /// `∫_{from}^{to} (|A u(t)|² + u_t(t)²) r^{N-1} dr` by Gauss-Legendre panels.
    pub fn energy_between(&self, t: f64, from: f64, to: f64) -> f64 {
        if to <= from {
            return 0.0;
        }
        let (gx, gw) = gauss_legendre(PANEL_ORDER);
        let panels = ((to - from) / PANEL_LENGTH).ceil() as usize;
        let h = (to - from) / panels as f64;
        let mut radii = Vec::with_capacity(panels * PANEL_ORDER);
        let mut weights = Vec::with_capacity(panels * PANEL_ORDER);
        for p in 0..panels {
            let mid = from + (p as f64 + 0.5) * h;
            for (x, w) in gx.iter().zip(&gw) {
                let r = mid + 0.5 * h * x;
                radii.push(r);
                weights.push(0.5 * h * w * r.powi(self.params.n as i32 - 1));
            }
        }
        self.samples(t, &radii).iter().zip(&weights).map(|(s, w)| (s.au * s.au + s.ut * s.ut) * w).sum()
    }
}

/// `evolve_linear(s, t)`: the free solution at time `t` on the data's grid.
pub fn evolve_linear(params: &Params, s: &StatePair, t: f64) -> Result<StatePair> {
    Propagator::new(params, s, s.grid().r_max())?.state_on(t, s.grid())
}

/// Least-squares fit `E(t) ≈ E_∞ + Σ_k c_k (|t| + R)^{-k}`.
#[derive(Clone, Debug, Serialize)]
pub struct LimitFit {
    pub limit: f64,
    pub coefficients: Vec<f64>,
    /// Largest fit residual relative to the largest sample.
    pub residual: f64,
}

/// Fits the samples `(s_i, E_i)` with `s_i = |t_i| + R` using `terms`
/// inverse powers.
pub fn fit_limit(samples: &[(f64, f64)], terms: usize) -> Result<LimitFit> {
    let k = terms + 1;
    if samples.len() < k {
        return Err(Error::Validation(format!("{} samples cannot fit {k} coefficients", samples.len())));
    }
    // normal equations in the scaled variable x = s_min / s
    let s_min = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let rows: Vec<Vec<f64>> = samples.iter().map(|&(s, _)| (0..k).map(|j| (s_min / s).powi(j as i32)).collect()).collect();
    let mut ata = vec![vec![0.0; k]; k];
    let mut atb = vec![0.0; k];
    for (row, &(_, e)) in rows.iter().zip(samples) {
        for i in 0..k {
            atb[i] += row[i] * e;
            for j in 0..k {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    let (coef, _) = crate::projection::cholesky_solve(&ata, &atb)?;
    let scale = samples.iter().map(|s| s.1.abs()).fold(0.0, f64::max).max(1e-300);
    let residual = rows
        .iter()
        .zip(samples)
        .map(|(row, &(_, e))| (row.iter().zip(&coef).map(|(a, b)| a * b).sum::<f64>() - e).abs())
        .fold(0.0, f64::max)
        / scale;
    let coefficients = coef[1..].iter().enumerate().map(|(j, c)| c * s_min.powi(j as i32 + 1)).collect();
    Ok(LimitFit { limit: coef[0], coefficients, residual })
}

/// Sampling and extrapolation settings for [`channel_limit`].
#[derive(Clone, Debug, Serialize)]
pub struct ChannelOptions {
    /// Sample times as multiples of the support radius.
    pub schedule: Vec<f64>,
    /// Inverse powers in the extrapolation.
    pub fit_terms: usize,
    /// Relative threshold defining the support radius.
    pub support_tol: f64,
}

impl Default for ChannelOptions {
    fn default() -> Self {
        Self { schedule: vec![2.0, 4.0, 8.0, 16.0, 32.0], fit_terms: 2, support_tol: 1e-12 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ChannelReport {
    pub radius: f64,
    pub support: f64,
    /// `(t, E_ext(t, R))` for `t > 0`.
    pub samples_plus: Vec<(f64, f64)>,
    /// `(t, E_ext(-t, R))` for the same `t > 0`.
    pub samples_minus: Vec<(f64, f64)>,
    pub e_plus: f64,
    pub e_minus: f64,
    pub asymptotic_energy: f64,
    pub fit_residual: f64,
    /// Data energy on `r ≥ R`.
    pub input_energy: f64,
    pub flags: Vec<String>,
}

impl ChannelReport {
    fn assemble(
        radius: f64,
        support: f64,
        plus: Vec<(f64, f64)>,
        minus: Vec<(f64, f64)>,
        terms: usize,
        input_energy: f64,
    ) -> Result<Self> {
        let shell = |v: &[(f64, f64)]| v.iter().map(|&(t, e)| (t + radius, e)).collect::<Vec<_>>();
        let fp = fit_limit(&shell(&plus), terms)?;
        let fm = fit_limit(&shell(&minus), terms)?;
        let mut flags = Vec::new();
        for (name, v) in [("plus", &plus), ("minus", &minus)] {
            let scale = v.iter().map(|s| s.1.abs()).fold(0.0, f64::max);
            if v.windows(2).any(|w| w[1].1 > w[0].1 + MONOTONE_TOL * scale.max(input_energy)) {
                flags.push(format!("{name}: exterior energy is not monotone in t; extrapolation unreliable"));
            }
        }
        Ok(Self {
            radius,
            support,
            e_plus: fp.limit,
            e_minus: fm.limit,
            asymptotic_energy: fp.limit.max(fm.limit),
            fit_residual: fp.residual.max(fm.residual),
            samples_plus: plus,
            samples_minus: minus,
            input_energy,
            flags,
        })
    }
}

/// Exterior-energy channel of rapidly decaying data, both time directions,
/// extrapolated in `1/(|t| + R)`.
pub fn channel_limit(params: &Params, s: &StatePair, r: f64, opts: &ChannelOptions) -> Result<ChannelReport> {
    let support = support_radius(s, opts.support_tol).max(r);
    if support == 0.0 {
        return Err(Error::Validation("channel data vanishes identically".into()));
    }
    let times: Vec<f64> = opts.schedule.iter().map(|m| m * support).collect();
    let t_max = times.iter().cloned().fold(0.0, f64::max);
    let prop = Propagator::new(params, s, t_max + support + SUPPORT_PAD)?;
    let run = |sign: f64| -> Vec<(f64, f64)> {
        times.iter().map(|&t| (t, prop.energy_between(sign * t, t + r, t + support + SUPPORT_PAD))).collect()
    };
    let input = pair_energy(params, s, r)?;
    ChannelReport::assemble(r, support, run(1.0), run(-1.0), opts.fit_terms, input)
}

/// The terminating series solution from `(0, r^e)` when `e = α + 2j - 2`:
/// `u(t) = Σ_n (-1)^n t^{2n+1}/(2n+1)! L_aⁿ r^e`, using
/// `L_a r^γ = -(γ - α)(γ + c) r^{γ-2}`.
#[derive(Clone, Debug)]
pub struct PowerSolution {
    pub params: Params,
    /// `(coefficient, exponent)` of `L_aⁿ r^e` for `n = 0..`.
    pub terms: Vec<(f64, f64)>,
}

impl PowerSolution {
    pub fn new(params: &Params, e: f64) -> Result<Self> {
        let steps = (e - params.alpha) / 2.0;
        if steps < -1e-12 || (steps - steps.round()).abs() > 1e-9 {
            return Err(Error::Validation(format!("exponent {e} is not α + 2j - 2 for j ≥ 1")));
        }
        let mut terms = vec![(1.0, e)];
        let (mut coef, mut g) = (1.0, e);
        for _ in 0..steps.round() as usize {
            coef *= -(g - params.alpha) * (g + params.c);
            g -= 2.0;
            terms.push((coef, g));
        }
        Ok(Self { params: *params, terms })
    }

    /// `∂_t u` and `A u` as power sums in `r` at time `t`.
    fn parts(&self, t: f64) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
        let mut ut = Vec::new();
        let mut au = Vec::new();
        let mut fact = 1.0;
        for (n, &(c, g)) in self.terms.iter().enumerate() {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            if n > 0 {
                fact *= (2 * n - 1) as f64 * (2 * n) as f64;
            }
            // t^{2n}/(2n)! and t^{2n+1}/(2n+1)!
            let even = sign * t.powi(2 * n as i32) / fact;
            let odd = sign * t.powi(2 * n as i32 + 1) / (fact * (2 * n + 1) as f64);
            ut.push((even * c, g));
            au.push((odd * c * (g + self.params.c), g - 1.0));
        }
        (ut, au)
    }

    pub fn sample(&self, t: f64, r: f64) -> Sample {
        let (ut, au) = self.parts(t);
        let ev = |v: &[(f64, f64)]| v.iter().map(|(c, g)| c * r.powf(*g)).sum::<f64>();
        let mut fact = 1.0;
        let mut u = 0.0;
        for (n, &(c, g)) in self.terms.iter().enumerate() {
            fact *= ((2 * n) as f64).max(1.0) * (2 * n + 1) as f64;
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            u += sign * t.powi(2 * n as i32 + 1) / fact * c * r.powf(g);
        }
        Sample { u, ut: ev(&ut), au: ev(&au) }
    }

    /// `∫_{from}^∞ (|A u|² + u_t²) r^{N-1} dr` in closed form.
    pub fn energy_from(&self, t: f64, from: f64) -> Result<f64> {
        let (ut, au) = self.parts(t);
        let d = self.params.dim();
        let mut total = 0.0;
        for v in [&ut, &au] {
            for &(c1, g1) in v.iter() {
                for &(c2, g2) in v.iter() {
                    let e = g1 + g2 + d;
                    if e >= -1e-12 {
                        return Err(Error::Tail { exponent: e - 1.0 });
                    }
                    total += -c1 * c2 * from.powf(e) / e;
                }
            }
        }
        Ok(total)
    }
}

/// Settings for the grid backend of [`kernel_channel`]. Lengths are in units
/// of the channel radius, which the free flow cannot tell apart.
#[derive(Clone, Debug, Serialize)]
pub struct KernelChannelOptions {
    /// Sample times as multiples of `R`.
    pub schedule: Vec<f64>,
    /// Grid cells per unit of `R`.
    pub cells_per_radius: usize,
    pub fit_terms: usize,
    /// Distance (in `R`) kept between trusted shells and boundary-influenced nodes.
    pub margin: f64,
    /// The data ramps up smoothly from `ramp_start · R` to `R`.
    pub ramp_start: f64,
}

impl Default for KernelChannelOptions {
    fn default() -> Self {
        Self { schedule: vec![8.0, 16.0, 32.0, 64.0, 128.0], cells_per_radius: 80, fit_terms: 3, margin: 2.0, ramp_start: 0.25 }
    }
}

/// Channel of `(0, r^e)` on `r ≥ R`, smoothly cut off inside `[R/2, R]`.
///
/// The data is not decaying enough for the spectral route, so the free flow
/// runs on the conservative grid scheme. The grid reaches twice the latest
/// shell, so sampled shells never see the outer boundary; beyond the last
/// trusted node the exterior is the series solution of the pure power data,
/// which that region depends on alone.
pub fn kernel_channel(params: &Params, e: f64, r: f64, opts: &KernelChannelOptions) -> Result<ChannelReport> {
    let exact = PowerSolution::new(params, e)?;
    let times: Vec<f64> = opts.schedule.iter().map(|m| m * r).collect();
    let t_max = times.iter().cloned().fold(0.0, f64::max);
    let margin = opts.margin * r;
    let r_max = 2.0 * t_max + r + 3.0 * margin;
    let dr = r / opts.cells_per_radius as f64;
    let n = (r_max / dr).round() as usize;
    let grid = RadialGrid::uniform(params.n, dr, n)?;
    let r0 = opts.ramp_start * r;
    let cutoff = |x: f64| smooth_step((x - r0) / (r - r0));
    let g = RadialField::from_fn(&grid, |x| cutoff(x) * x.powf(e));
    let scheme = Scheme::new(params, &grid, Mode::Free, 0.0, 0.0)?;
    let dt = 0.4 * dr;
    let input = exact.energy_from(0.0, r)?;
    let run = |sign: f64| -> Result<Vec<(f64, f64)>> {
        let mut u = vec![0.0; n];
        let mut v: Vec<f64> = g.values.iter().map(|x| sign * x).collect();
        let mut acc = vec![0.0; n];
        let mut out = Vec::new();
        let mut t = 0.0;
        for &t_next in &times {
            let steps = ((t_next - t) / dt).round() as usize;
            for _ in 0..steps {
                scheme.step(&mut u, &mut v, &mut acc, dt);
            }
            t = t_next;
            let cut = r_max - t - margin;
            let body = scheme.energy_between(&u, &v, t + r, cut);
            let tail = exact.energy_from(t, cut)?;
            out.push((t, body + tail));
        }
        Ok(out)
    };
    let (plus, minus) = rayon::join(|| run(1.0), || run(-1.0));
    ChannelReport::assemble(r, r, plus?, minus?, opts.fit_terms, input)
}

/// `C^∞` step from 0 (x ≤ 0) to 1 (x ≥ 1).
pub fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / x).exp();
    let b = (-1.0 / (1.0 - x)).exp();
    a / (a + b)
}

/// Samples of the outgoing radiation profile.
#[derive(Clone, Debug, Serialize)]
pub struct RadiationField {
    pub t: f64,
    pub eta: Vec<f64>,
    /// `r^{(N-1)/2} ∂_r u(t, t + η)`.
    pub g: Vec<f64>,
    /// `∫ G² dη`.
    pub norm_sq: f64,
    /// `½ E(f, g)`, the outgoing share of the data energy.
    pub target: f64,
    pub relative_error: f64,
    pub flagged: bool,
}

/// Radiation profile at `t_large` on `η ∈ [-(t_large - 1), support + pad]`
/// clipped to the region where the wave lives, with the energy identity
/// `∫ |G|² dη = ½ E(f, g)`.
pub fn radiation_field(params: &Params, s: &StatePair, t_large: f64, tol: f64) -> Result<RadiationField> {
    let support = support_radius(s, 1e-12);
    let target = 0.5 * pair_energy(params, s, 0.0)?;
    if support == 0.0 || target == 0.0 {
        return Ok(RadiationField { t: t_large, eta: vec![], g: vec![], norm_sq: 0.0, target: 0.0, relative_error: 0.0, flagged: false });
    }
    let lo = -support - SUPPORT_PAD;
    let hi = support + SUPPORT_PAD;
    if t_large + lo <= 0.0 {
        return Err(Error::Validation(format!("t_large = {t_large} must exceed the data support {support}")));
    }
    let prop = Propagator::new(params, s, t_large + hi)?;
    let (gx, gw) = gauss_legendre(PANEL_ORDER);
    let panels = ((hi - lo) / PANEL_LENGTH).ceil() as usize;
    let h = (hi - lo) / panels as f64;
    let mut eta = Vec::new();
    let mut w = Vec::new();
    for p in 0..panels {
        let mid = lo + (p as f64 + 0.5) * h;
        for (x, wx) in gx.iter().zip(&gw) {
            eta.push(mid + 0.5 * h * x);
            w.push(0.5 * h * wx);
        }
    }
    let radii: Vec<f64> = eta.iter().map(|e| t_large + e).collect();
    let samples = prop.samples(t_large, &radii);
    let half = 0.5 * (params.dim() - 1.0);
    let g: Vec<f64> = samples.iter().zip(&radii).map(|(s, &r)| r.powf(half) * (s.au - params.c / r * s.u)).collect();
    let norm_sq: f64 = g.iter().zip(&w).map(|(x, w)| x * x * w).sum();
    let relative_error = (norm_sq / target - 1.0).abs();
    Ok(RadiationField { t: t_large, eta, g, norm_sq, target, relative_error, flagged: relative_error > tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hankel::Packets;
    use crate::params::derive_params;
    use crate::projection::{as_value, InteriorConvention};

    fn bump(r: f64) -> f64 {
        (-(r - 5.0).powi(2)).exp()
    }

    fn grid(n: usize) -> Arc<RadialGrid> {
        RadialGrid::uniform(n, 0.05, 800).unwrap()
    }

    #[test]
    fn zero_time_returns_input() {
        let p = derive_params(3, 2.0).unwrap();
        let g = grid(3);
        let s = StatePair::from_fns(&g, bump, |r| 0.5 * bump(r + 1.0));
        let out = evolve_linear(&p, &s, 0.0).unwrap();
        for (a, b) in out.position.values.iter().zip(&s.position.values) {
            assert!((a - b).abs() < 1e-6);
        }
        for (a, b) in out.velocity.values.iter().zip(&s.velocity.values) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn dalembert_in_three_dimensions() {
        let p = derive_params(3, 0.0).unwrap();
        let g = grid(3);
        let s = StatePair::from_fns(&g, |_| 0.0, bump);
        let t = 4.0;
        let out = evolve_linear(&p, &s, t).unwrap();
        let (gx, gw) = gauss_legendre(40);
        let oracle = |r: f64| {
            // (1/2r) ∫_{|r-t|}^{r+t} s g(s) ds
            let (a, b) = ((r - t).abs(), r + t);
            let h = 0.5 * (b - a);
            gx.iter().zip(&gw).map(|(x, w)| { let s = a + h * (x + 1.0); w * h * s * bump(s) }).sum::<f64>() / (2.0 * r)
        };
        let err = g.nodes().iter().zip(&out.position.values).map(|(&r, &u)| (u - oracle(r)).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn energy_is_conserved() {
        for (n, a) in [(3, 2.0), (5, 4.0)] {
            let p = derive_params(n, a).unwrap();
            let g = grid(n);
            let s = StatePair::from_fns(&g, bump, |r| bump(r - 1.0));
            let e0 = pair_energy(&p, &s, 0.0).unwrap();
            for t in [5.0, 20.0] {
                let e = pair_energy(&p, &evolve_linear(&p, &s, t).unwrap(), 0.0).unwrap();
                assert!((e / e0 - 1.0).abs() < 1e-3, "N={n} t={t}: {e} vs {e0}");
            }
            // the spectral energy against the closed-form derivative
            let (gx, gw) = gauss_legendre(20);
            let exact: f64 = (0..200)
                .map(|k| {
                    let mid = 0.1 * k as f64 + 0.05;
                    gx.iter()
                        .zip(&gw)
                        .map(|(x, w)| {
                            let r = mid + 0.05 * x;
                            let af = -2.0 * (r - 5.0) * bump(r) + p.c / r * bump(r);
                            0.05 * w * (af * af + bump(r - 1.0).powi(2)) * r.powi(n as i32 - 1)
                        })
                        .sum::<f64>()
                })
                .sum();
            let spectral = Propagator::new(&p, &s, 40.0).unwrap().energy();
            assert!((spectral / exact - 1.0).abs() < 1e-6, "{spectral} vs {exact}");
        }
    }

    #[test]
    fn time_reversal() {
        let p = derive_params(3, 2.0).unwrap();
        let g = grid(3);
        let s = StatePair::from_fns(&g, bump, |r| bump(r - 1.0));
        let back = evolve_linear(&p, &evolve_linear(&p, &s, 6.0).unwrap(), -6.0).unwrap();
        let err = back.position.values.iter().zip(&s.position.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 2e-6, "{err}");
    }

    #[test]
    fn exterior_energy_basics() {
        let p = derive_params(3, 2.0).unwrap();
        let g = grid(3);
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
        for _ in 0..10 {
            let f = Packets::random(&mut rng, 2, 3.0, 7.0);
            let h = Packets::random(&mut rng, 2, 3.0, 7.0);
            let s = StatePair::from_fns(&g, |r| f.value(r), |r| h.value(r));
            let total = pair_energy(&p, &s, 0.0).unwrap();
            assert!((exterior_energy(&p, &s, 0.0, 0.0).unwrap() - total).abs() < 1e-12 * total);
            assert!(exterior_energy(&p, &s, 0.0, 35.0).unwrap() < 1e-12 * total);
            let st = evolve_linear(&p, &s, 3.0).unwrap();
            let mut prev = f64::INFINITY;
            for k in 0..20 {
                let e = exterior_energy(&p, &st, 3.0, k as f64).unwrap();
                assert!(e <= prev + 1e-12 * total);
                prev = e;
            }
        }
    }

    #[test]
    fn fit_recovers_planted_limit() {
        let samples: Vec<(f64, f64)> = [3.0, 5.0, 9.0, 17.0, 33.0].iter().map(|&s| (s, 2.5 + 1.5 / s - 4.0 / (s * s))).collect();
        let fit = fit_limit(&samples, 2).unwrap();
        assert!((fit.limit - 2.5).abs() < 1e-12);
        assert!((fit.coefficients[0] - 1.5).abs() < 1e-9);
        assert!((fit.coefficients[1] + 4.0).abs() < 1e-9);
        assert!(fit_limit(&samples[..2], 2).is_err());
    }

    #[test]
    fn classical_velocity_channel_is_half_the_norm() {
        let p = derive_params(3, 0.0).unwrap();
        let g = grid(3);
        let s = StatePair::from_fns(&g, |_| 0.0, bump);
        let rep = channel_limit(&p, &s, 1.0, &ChannelOptions::default()).unwrap();
        let target = 0.5 * crate::radialgrid::integrate_sq(&s.velocity, 1.0).unwrap();
        assert!((rep.e_plus / target - 1.0).abs() < 1e-3, "{} vs {target}", rep.e_plus);
        assert!((rep.e_plus - rep.e_minus).abs() < 1e-6 * target);
        assert!(rep.flags.is_empty());
    }

    #[test]
    fn potential_position_channel_matches_closed_form() {
        let p = derive_params(3, 2.0).unwrap();
        let g = grid(3);
        let s = StatePair::from_fns(&g, bump, |_| 0.0);
        let rep = channel_limit(&p, &s, 1.0, &ChannelOptions::default()).unwrap();
        let (as_f, _) = as_value(&p, &s, 1.0, InteriorConvention::Frozen).unwrap();
        assert!((rep.asymptotic_energy / as_f - 1.0).abs() < 0.03, "{} vs {as_f}", rep.asymptotic_energy);
    }

    #[test]
    fn power_solution_is_exact() {
        let p = derive_params(3, 12.0).unwrap();
        for j in 1..=2 {
            let sol = PowerSolution::new(&p, p.alpha + 2.0 * j as f64 - 2.0).unwrap();
            // u_tt + L_a u = 0 at a few points through second differences
            let (t, h) = (1.3, 1e-3);
            for r in [2.0, 3.5, 7.0] {
                let u = |t: f64, r: f64| sol.sample(t, r).u;
                let utt = (u(t + h, r) - 2.0 * u(t, r) + u(t - h, r)) / (h * h);
                let ur = (u(t, r + h) - u(t, r - h)) / (2.0 * h);
                let urr = (u(t, r + h) - 2.0 * u(t, r) + u(t, r - h)) / (h * h);
                let la = -urr - 2.0 / r * ur + p.a / (r * r) * u(t, r);
                assert!((utt + la).abs() < 1e-4 * u(t, r).abs().max(1e-3), "j={j} r={r}: {}", utt + la);
            }
            // closed-form exterior energy against panels
            let (gx, gw) = gauss_legendre(30);
            let mut num = 0.0;
            for k in 0..400 {
                let (a, b) = (3.0 + k as f64 * 0.5, 3.5 + k as f64 * 0.5);
                for (x, w) in gx.iter().zip(&gw) {
                    let r = 0.5 * (a + b) + 0.25 * x;
                    let s = sol.sample(t, r);
                    num += 0.25 * w * (s.au * s.au + s.ut * s.ut) * r * r;
                }
            }
            let tail = sol.energy_from(t, 203.0).unwrap();
            assert!(((num + tail) / sol.energy_from(t, 3.0).unwrap() - 1.0).abs() < 1e-9);
        }
        assert!(PowerSolution::new(&p, p.alpha + 1.0).is_err());
    }

    #[test]
    fn kernel_velocity_channel_vanishes() {
        let p = derive_params(3, 2.0).unwrap();
        let opts = KernelChannelOptions { cells_per_radius: 20, ..Default::default() };
        let rep = kernel_channel(&p, p.alpha, 1.0, &opts).unwrap();
        assert!(rep.e_plus.abs() < 1e-3 * rep.input_energy, "{}", rep.e_plus);
        assert!((rep.input_energy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn radiation_of_classical_bump() {
        let p = derive_params(3, 0.0).unwrap();
        let g = grid(3);
        let s = StatePair::from_fns(&g, bump, |_| 0.0);
        let rad = radiation_field(&p, &s, 200.0, 0.02).unwrap();
        assert!(!rad.flagged, "{}", rad.relative_error);
        // u = h(r - t) / 2r with h(s) = s f(|s|) the odd extension of r f, so
        // G = r ∂_r u = ½ h'(η) - h(η) / 2r
        for (&e, &v) in rad.eta.iter().zip(&rad.g) {
            let x = e.abs();
            let (h, dh) = (e * bump(x), bump(x) - 2.0 * x * (x - 5.0) * bump(x));
            let exact = 0.5 * dh - 0.5 * h / (rad.t + e);
            assert!((v - exact).abs() < 1e-6, "eta={e}: {v} vs {exact}");
        }
        let zero = StatePair::from_fns(&g, |_| 0.0, |_| 0.0);
        assert_eq!(radiation_field(&p, &zero, 200.0, 0.02).unwrap().norm_sq, 0.0);
    }
}
