//! Modulation parameters of a multi-soliton: fitting the scales, the
//! velocity expansion, and the idealized `(λ_j, β_j)` dynamics.
//!
//! Scaling conventions: `f_(λ) = λ^{-(N-2)/2} f(r/λ)` (energy space) and
//! `g_[λ] = λ^{-N/2} g(r/λ)` (`L²`). Inner products are over `ℝ^N`.

use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::groundstate::{GroundState, GroundStateConstants};
use crate::projection::cholesky_solve;
use crate::radialgrid::{fmt17, integrate, power_tail, Operators, RadialField, RadialGrid, StatePair};

/// Scales, velocities and signs of a `J`-bubble configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModState {
    pub t: f64,
    /// Strictly decreasing and positive.
    pub lambda: Vec<f64>,
    pub beta: Vec<f64>,
    /// Each `±1`.
    pub iota: Vec<f64>,
}

impl ModState {
    pub fn new(lambda: Vec<f64>, beta: Vec<f64>, iota: Vec<f64>) -> Result<Self> {
        let j = lambda.len();
        if j == 0 || beta.len() != j || iota.len() != j {
            return Err(Error::Validation(format!("need matching nonempty lambda/beta/iota, got {}/{}/{}", j, beta.len(), iota.len())));
        }
        if iota.iter().any(|s| s.abs() != 1.0) {
            return Err(Error::Validation("signs must be +1 or -1".into()));
        }
        let s = Self { t: 0.0, lambda, beta, iota };
        if !s.ordered() {
            return Err(Error::Validation(format!("scales must satisfy 0 < lambda_J < ... < lambda_1, got {:?}", s.lambda)));
        }
        Ok(s)
    }

    /// Bubbles at rest.
    pub fn at_rest(lambda: Vec<f64>, iota: Vec<f64>) -> Result<Self> {
        let n = lambda.len();
        Self::new(lambda, vec![0.0; n], iota)
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    /// `max λ_{j+1}/λ_j`; zero for a single bubble.
    pub fn gamma(&self) -> f64 {
        self.lambda.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max)
    }

    fn ordered(&self) -> bool {
        self.lambda.iter().all(|&l| l > 0.0 && l.is_finite()) && self.lambda.windows(2).all(|w| w[1] < w[0])
    }
}

/// The idealized modulation system for one parameter pack.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ModSystem {
    /// `‖ΛW_a‖²_{L²}`.
    pub m: f64,
    pub kappa0: f64,
    /// `(N-2)β/2`.
    pub q: f64,
    /// `κ₀ m / q`, which makes [`ModSystem::hamiltonian`] exactly conserved.
    pub kappa1_ode: f64,
}

/// `(λ′, β′)`.
pub type Derivative = (Vec<f64>, Vec<f64>);

impl ModSystem {
    pub fn new(gs: &GroundState) -> Result<Self> {
        if !gs.params.lambda_w_l2 {
            return Err(Error::Domain(format!("the modulation system needs Lambda W in L2, (N-2)beta = {}", gs.params.p())));
        }
        Ok(Self::from_constants(&gs.constants()?, gs.params.p() / 2.0))
    }

    pub fn from_constants(c: &GroundStateConstants, q: f64) -> Self {
        Self { m: c.m, kappa0: c.kappa0, q, kappa1_ode: c.kappa0 * c.m / q }
    }

    /// `λ_j′ = β_j/m`, `β_j′ = -(κ₀/λ_j)(ι_jι_{j+1}(λ_{j+1}/λ_j)^q - ι_jι_{j-1}(λ_j/λ_{j-1})^q)`.
    pub fn rhs(&self, s: &ModState) -> Derivative {
        let n = s.len();
        let dl = s.beta.iter().map(|b| b / self.m).collect();
        let db = (0..n)
            .map(|j| {
                let below = if j + 1 < n { s.iota[j] * s.iota[j + 1] * (s.lambda[j + 1] / s.lambda[j]).powf(self.q) } else { 0.0 };
                let above = if j > 0 { s.iota[j] * s.iota[j - 1] * (s.lambda[j] / s.lambda[j - 1]).powf(self.q) } else { 0.0 };
                -self.kappa0 / s.lambda[j] * (below - above)
            })
            .collect();
        (dl, db)
    }

    /// `H = ½ Σ β_j² - κ₁ Σ_{j<J} ι_jι_{j+1} (λ_{j+1}/λ_j)^q` with `κ₁ = κ₁^{ode}`.
    pub fn hamiltonian(&self, s: &ModState) -> f64 {
        let kinetic: f64 = 0.5 * s.beta.iter().map(|b| b * b).sum::<f64>();
        let coupling: f64 = (0..s.len().saturating_sub(1))
            .map(|j| s.iota[j] * s.iota[j + 1] * (s.lambda[j + 1] / s.lambda[j]).powf(self.q))
            .sum();
        kinetic - self.kappa1_ode * coupling
    }

    /// `½ Σ β_j² + κ₁ Σ (λ_{j+1}/λ_j)^q`, the absolute size of the terms in `H`.
    pub fn energy_scale(&self, s: &ModState) -> f64 {
        let kinetic: f64 = 0.5 * s.beta.iter().map(|b| b * b).sum::<f64>();
        let coupling: f64 = s.lambda.windows(2).map(|w| (w[1] / w[0]).powf(self.q)).sum();
        kinetic + self.kappa1_ode * coupling
    }

    /// Natural velocity scale `sqrt(2 κ₁ γ^q)` used by the step control.
    fn velocity_scale(&self, s: &ModState) -> f64 {
        (2.0 * self.kappa1_ode * s.gamma().powf(self.q)).sqrt().max(1e-300)
    }

    fn rk4(&self, s: &ModState, dt: f64) -> ModState {
        let shift = |base: &ModState, k: &Derivative, h: f64| ModState {
            t: base.t + h,
            lambda: base.lambda.iter().zip(&k.0).map(|(a, b)| a + h * b).collect(),
            beta: base.beta.iter().zip(&k.1).map(|(a, b)| a + h * b).collect(),
            iota: base.iota.clone(),
        };
        let k1 = self.rhs(s);
        let k2 = self.rhs(&shift(s, &k1, 0.5 * dt));
        let k3 = self.rhs(&shift(s, &k2, 0.5 * dt));
        let k4 = self.rhs(&shift(s, &k3, dt));
        let comb = |a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> Vec<f64> {
            (0..a.len()).map(|i| (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]) / 6.0).collect()
        };
        let k = (comb(&k1.0, &k2.0, &k3.0, &k4.0), comb(&k1.1, &k2.1, &k3.1, &k4.1));
        shift(s, &k, dt)
    }

    /// Scale-free distance between two states.
    fn distance(&self, a: &ModState, b: &ModState, vscale: f64) -> f64 {
        let dl = a.lambda.iter().zip(&b.lambda).map(|(x, y)| (x - y).abs() / y.abs()).fold(0.0, f64::max);
        let db = a.beta.iter().zip(&b.beta).map(|(x, y)| (x - y).abs() / vscale).fold(0.0, f64::max);
        dl.max(db)
    }

    /// One controlled step: a full RK4 step is accepted when it agrees with
    /// two half steps and no `β_j` moves by more than 10% of its scale;
    /// otherwise the step is halved. Returns the state and the step used.
    fn controlled_step(&self, s: &ModState, dt: f64, tol: f64) -> Result<(ModState, f64)> {
        let mut h = dt;
        for _ in 0..40 {
            let full = self.rk4(s, h);
            let half = self.rk4(&self.rk4(s, 0.5 * h), 0.5 * h);
            let vscale = self.velocity_scale(s).max(s.beta.iter().map(|b| b.abs()).fold(0.0, f64::max));
            let jump = full.beta.iter().zip(&s.beta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if self.distance(&full, &half, vscale) <= tol && jump <= 0.1 * vscale {
                return Ok((half, h));
            }
            h *= 0.5;
        }
        Err(Error::numerical("modulation", format!("step size underflow at t = {}", s.t)))
    }
}

/// Integration settings.
#[derive(Clone, Debug, Serialize)]
pub struct SimulateConfig {
    pub t_max: f64,
    /// Defaults to `10⁻³ λ_J(0)`.
    pub dt: Option<f64>,
    /// Halt once `γ` reaches this value.
    pub gamma_ceiling: f64,
    /// Local agreement required between one step and two half steps.
    pub tol: f64,
    /// Keep every `record_every`-th state.
    pub record_every: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { t_max: 1e3, dt: None, gamma_ceiling: 0.9, tol: 1e-10, record_every: 1 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ModTrajectory {
    pub states: Vec<ModState>,
    pub hamiltonian: Vec<f64>,
    /// Why the integration stopped before `t_max`.
    pub halted: Option<String>,
    /// Time at which `γ` reached the ceiling, located inside the last step.
    pub exit_time: Option<f64>,
    /// Largest `½ Σ β_j² + κ₁ Σ (λ_{j+1}/λ_j)^q` seen, the size of the terms in `H`.
    pub energy_scale: f64,
}

impl ModTrajectory {
    /// `max |H - H₀|` over the run relative to [`ModTrajectory::energy_scale`];
    /// `H` itself can vanish when the couplings cancel.
    pub fn hamiltonian_drift(&self) -> f64 {
        let h0 = self.hamiltonian[0];
        self.hamiltonian.iter().map(|h| (h - h0).abs()).fold(0.0, f64::max) / self.energy_scale.max(1e-300)
    }

    pub fn last(&self) -> &ModState {
        self.states.last().expect("trajectory holds the initial state")
    }

    /// `t,lambda_1..lambda_J,beta_1..beta_J,gamma,H`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let j = self.states[0].len();
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((1..=j).map(|i| format!("lambda_{i}")));
        header.extend((1..=j).map(|i| format!("beta_{i}")));
        header.extend(["gamma".to_string(), "H".to_string()]);
        out.write_record(&header)?;
        for (s, h) in self.states.iter().zip(&self.hamiltonian) {
            let mut row = vec![fmt17(s.t)];
            row.extend(s.lambda.iter().map(|&x| fmt17(x)));
            row.extend(s.beta.iter().map(|&x| fmt17(x)));
            row.extend([fmt17(s.gamma()), fmt17(*h)]);
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Integrates the idealized system from `s0`.
pub fn simulate(sys: &ModSystem, s0: &ModState, cfg: &SimulateConfig) -> Result<ModTrajectory> {
    if !s0.ordered() {
        return Err(Error::Validation("initial scales are not ordered".into()));
    }
    let dt0 = cfg.dt.unwrap_or(1e-3 * s0.lambda[s0.len() - 1]);
    if !(dt0 > 0.0) {
        return Err(Error::Validation(format!("dt = {dt0} must be positive")));
    }
    let mut states = vec![s0.clone()];
    let mut hamiltonian = vec![sys.hamiltonian(s0)];
    let mut energy_scale = sys.energy_scale(s0);
    let mut cur = s0.clone();
    let mut halted = None;
    let mut exit_time = None;
    let mut count = 0usize;
    if s0.gamma() >= cfg.gamma_ceiling && s0.len() > 1 {
        return Err(Error::Validation(format!("gamma(0) = {} is not below the ceiling {}", s0.gamma(), cfg.gamma_ceiling)));
    }
    while cur.t < cfg.t_max {
        let remaining = cfg.t_max - cur.t;
        let dt = if remaining <= dt0 * (1.0 + 1e-9) { remaining } else { dt0 };
        let (mut next, h) = sys.controlled_step(&cur, dt, cfg.tol)?;
        // a final sliver below round-off would never advance t
        if h == remaining || cfg.t_max - next.t <= 1e-12 * dt0 {
            next.t = cfg.t_max;
        }
        if !next.ordered() {
            halted = Some(format!("scale ordering lost at t = {}", next.t));
            break;
        }
        count += 1;
        let crossed = s0.len() > 1 && next.gamma() >= cfg.gamma_ceiling;
        if crossed {
            // γ is smooth along the step; locate the crossing by bisection on RK4 substeps
            let (mut lo, mut hi) = (0.0, next.t - cur.t);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if sys.rk4(&cur, mid).gamma() >= cfg.gamma_ceiling {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            next = sys.rk4(&cur, hi);
            exit_time = Some(cur.t + hi);
            halted = Some(format!("gamma reached {} at t = {}", cfg.gamma_ceiling, cur.t + hi));
        }
        if crossed || count.is_multiple_of(cfg.record_every.max(1)) || next.t >= cfg.t_max {
            energy_scale = energy_scale.max(sys.energy_scale(&next));
            states.push(next.clone());
            hamiltonian.push(sys.hamiltonian(&next));
        }
        cur = next;
        if crossed {
            break;
        }
    }
    Ok(ModTrajectory { states, hamiltonian, halted, exit_time, energy_scale })
}

/// Outcome of [`exit_time`].
#[derive(Clone, Debug, Serialize)]
pub struct ExitReport {
    pub time: Option<f64>,
    pub final_state: ModState,
    pub hamiltonian_drift: f64,
}

/// Integrates until `γ = gamma_exit` (or `t_max`).
pub fn exit_time(sys: &ModSystem, s0: &ModState, gamma_exit: f64, t_max: f64) -> Result<ExitReport> {
    if !(s0.gamma() < gamma_exit && gamma_exit < 1.0) {
        return Err(Error::Validation(format!("need gamma(0) = {} < gamma_exit = {gamma_exit} < 1", s0.gamma())));
    }
    let cfg = SimulateConfig { t_max, gamma_ceiling: gamma_exit, record_every: usize::MAX, ..Default::default() };
    let tr = simulate(sys, s0, &cfg)?;
    Ok(ExitReport { time: tr.exit_time, final_state: tr.last().clone(), hamiltonian_drift: tr.hamiltonian_drift() })
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingReport {
    pub sigmas: Vec<f64>,
    /// `T(σ λ₀) / σ` for each `σ`.
    pub rescaled_times: Vec<f64>,
    /// `max |T(σλ₀)/σ - T(λ₀)| / T(λ₀)`.
    pub max_deviation: f64,
}

/// Checks `(λ, β, t) → (σλ, β, σt)`: exit times scale linearly in `σ`.
pub fn scaling_check(sys: &ModSystem, s0: &ModState, sigmas: &[f64], gamma_exit: f64, t_max: f64) -> Result<ScalingReport> {
    let base = exit_time(sys, s0, gamma_exit, t_max)?
        .time
        .ok_or_else(|| Error::numerical("modulation", "no exit within t_max for the reference state"))?;
    let mut rescaled = Vec::new();
    for &sig in sigmas {
        let mut s = s0.clone();
        s.lambda.iter_mut().for_each(|l| *l *= sig);
        let t = exit_time(sys, &s, gamma_exit, t_max * sig)?
            .time
            .ok_or_else(|| Error::numerical("modulation", format!("no exit within t_max for sigma = {sig}")))?;
        rescaled.push(t / sig);
    }
    let max_deviation = rescaled.iter().map(|t| (t - base).abs() / base).fold(0.0, f64::max);
    Ok(ScalingReport { sigmas: sigmas.to_vec(), rescaled_times: rescaled, max_deviation })
}

/// Iteration settings for [`fit_scales`].
#[derive(Clone, Debug, Serialize)]
pub struct FitOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Radius of the admissible region: `|λ_j/μ_j - 1| ≤ eta`.
    pub eta: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { tol: 1e-13, max_iter: 500, eta: 0.5 }
    }
}

/// Result of the scale fit and, when a velocity was given, the expansion.
#[derive(Clone, Debug, Serialize)]
pub struct FitReport {
    pub lambda: Vec<f64>,
    pub iterations: usize,
    /// `|⟨A h₀, A(ΛW)_(λ_j)⟩| / ‖AΛW‖²` for each `j`.
    pub residuals: Vec<f64>,
    /// `‖h₀‖_{Ḣ¹_a}` with `h₀ = f - Σ ι_j W_(λ_j)`.
    pub h0_norm: f64,
    /// `‖(h₀, g₁)‖`; equals `h0_norm` without a velocity.
    pub delta: f64,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

/// `∫ f g r^{N-1} dr` on the grid plus a power tail, times the sphere area.
fn inner(f: &RadialField, g: &RadialField, om: f64) -> Result<f64> {
    let prod = f.zip_with(g, |a, b| a * b)?;
    let tail = power_tail(&prod).unwrap_or(0.0);
    Ok(om * (integrate(&prod, 0.0, f.grid.r_max())? + tail))
}

/// Multi-soliton profile `Σ ι_j W_(λ_j)` on `grid`.
pub fn multi_soliton(gs: &GroundState, grid: &Arc<RadialGrid>, lambda: &[f64], iota: &[f64]) -> RadialField {
    RadialField::from_fn(grid, |r| lambda.iter().zip(iota).map(|(&l, &s)| s * gs.w_scaled(r, l)).sum())
}

/// Fixed point of `Φ_ℓ(λ) = λ_ℓ - (μ_ℓ ι_ℓ/‖AΛW‖²) ⟨A(f - Σ ι_j W_(λ_j)), A(ΛW)_(λ_ℓ)⟩`.
pub fn fit_scales(gs: &GroundState, f: &RadialField, iota: &[f64], mu0: &[f64], opts: &FitOptions) -> Result<FitReport> {
    let params = gs.params;
    let grid = &f.grid;
    if iota.len() != mu0.len() || mu0.is_empty() {
        return Err(Error::Validation("iota and mu0 must have the same nonzero length".into()));
    }
    let ops = Operators::new(grid, &params)?;
    let om = params.sphere_area();
    let norm = gs.constants()?.a_lambda_w_norm_sq;
    // returns Φ(λ), the normalized residuals and ‖h₀‖
    let step = |lambda: &[f64]| -> Result<(Vec<f64>, Vec<f64>, f64)> {
        let h0 = f.zip_with(&multi_soliton(gs, grid, lambda, iota), |a, b| a - b)?;
        let ah = ops.apply_a(&h0)?;
        let mut next = Vec::with_capacity(lambda.len());
        let mut res = Vec::with_capacity(lambda.len());
        for (&lam, (&s, &mu)) in lambda.iter().zip(iota.iter().zip(mu0)) {
            let alw = RadialField::from_fn(grid, |r| gs.scale_l2(lam, r, |x| gs.a_lambda_w(x)));
            let ip = inner(&ah, &alw, om)?;
            res.push(ip.abs() / norm);
            next.push(lam - mu * s / norm * ip);
        }
        Ok((next, res, inner(&ah, &ah, om)?.max(0.0).sqrt()))
    };
    let mut lambda = mu0.to_vec();
    let mut history: Vec<f64> = Vec::new();
    let mut rising = 0;
    for it in 1..=opts.max_iter {
        let (next, _, _) = step(&lambda)?;
        let change = next.iter().zip(&lambda).map(|(a, b)| (a - b).abs() / b).fold(0.0, f64::max);
        if let Some(&prev) = history.last() {
            // increases at round-off level are not evidence against contraction
            rising = if change > prev && change > 1e3 * opts.tol { rising + 1 } else { 0 };
            if rising >= 5 {
                return Err(Error::numerical("modulation", format!("fit_scales is not contracting; step sizes {history:?}")));
            }
        }
        history.push(change);
        if next.iter().zip(mu0).any(|(l, m)| !(l.is_finite() && (l / m - 1.0).abs() <= opts.eta)) {
            return Err(Error::numerical("modulation", format!("fit left the admissible region: {next:?} from {mu0:?}")));
        }
        lambda = next;
        if change <= opts.tol {
            let (_, residuals, h0_norm) = step(&lambda)?;
            return Ok(FitReport { lambda, iterations: it, residuals, h0_norm, delta: h0_norm, alpha: vec![], beta: vec![] });
        }
    }
    let tail = &history[history.len().saturating_sub(5)..];
    Err(Error::numerical("modulation", format!("fit_scales did not converge in {} iterations; last steps {tail:?}", opts.max_iter)))
}

/// Velocity expansion `∂_t U = Σ α_j ι_j (ΛW)_[λ_j] + g₁` with `g₁ ⊥ (ΛW)_[λ_j]`.
#[derive(Clone, Debug, Serialize)]
pub struct Coefficients {
    pub alpha: Vec<f64>,
    /// `β_j = -ι_j ⟨(ΛW)_[λ_j], ∂_t U⟩`.
    pub beta: Vec<f64>,
    #[serde(skip)]
    pub g1: RadialField,
    pub g1_norm: f64,
    pub gram_condition: f64,
}

pub fn extract_coeffs(gs: &GroundState, velocity: &RadialField, lambda: &[f64], iota: &[f64]) -> Result<Coefficients> {
    let params = gs.params;
    if !params.lambda_w_l2 {
        return Err(Error::Domain(format!("Lambda W is not in L2 for (N-2)beta = {}", params.p())));
    }
    if lambda.len() != iota.len() {
        return Err(Error::Validation("lambda and iota lengths differ".into()));
    }
    let grid = &velocity.grid;
    let om = params.sphere_area();
    let lw: Vec<RadialField> =
        lambda.iter().map(|&l| RadialField::from_fn(grid, |r| gs.scale_l2(l, r, |x| gs.lambda_w(x)))).collect();
    let n = lambda.len();
    let mut gram = vec![vec![0.0; n]; n];
    for j in 0..n {
        for k in 0..=j {
            gram[j][k] = inner(&lw[j], &lw[k], om)?;
            gram[k][j] = gram[j][k];
        }
    }
    let b: Vec<f64> = lw.iter().map(|l| inner(velocity, l, om)).collect::<Result<_>>()?;
    // solve for ι_j α_j, which sees the symmetric Gram matrix
    let (signed, cond) = cholesky_solve(&gram, &b)?;
    let alpha: Vec<f64> = signed.iter().zip(iota).map(|(a, s)| a * s).collect();
    let mut g1 = velocity.clone();
    for j in 0..n {
        for (v, x) in g1.values.iter_mut().zip(&lw[j].values) {
            *v -= alpha[j] * iota[j] * x;
        }
    }
    let beta = (0..n).map(|j| -iota[j] * b[j]).collect();
    let g1_norm = inner(&g1, &g1, om)?.max(0.0).sqrt();
    Ok(Coefficients { alpha, beta, g1, g1_norm, gram_condition: cond })
}

/// Fits the scales of `s.position` and expands `s.velocity` at them.
pub fn fit_state(gs: &GroundState, s: &StatePair, iota: &[f64], mu0: &[f64], opts: &FitOptions) -> Result<FitReport> {
    let mut rep = fit_scales(gs, &s.position, iota, mu0, opts)?;
    let c = extract_coeffs(gs, &s.velocity, &rep.lambda, iota)?;
    rep.delta = (rep.h0_norm.powi(2) + c.g1_norm.powi(2)).sqrt();
    rep.alpha = c.alpha;
    rep.beta = c.beta;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::derive_params;

    fn gs32() -> GroundState {
        GroundState::new(derive_params(3, 2.0).unwrap())
    }

    fn sys32() -> ModSystem {
        ModSystem::new(&gs32()).unwrap()
    }

    #[test]
    fn rejects_bad_states() {
        assert!(ModState::at_rest(vec![1.0, 2.0], vec![1.0, 1.0]).is_err());
        assert!(ModState::at_rest(vec![1.0, 0.5], vec![1.0, 0.5]).is_err());
        assert!(ModState::new(vec![1.0], vec![], vec![1.0]).is_err());
        assert!(ModSystem::new(&GroundState::new(derive_params(4, 0.0).unwrap())).is_err());
    }

    #[test]
    fn single_bubble_is_static() {
        let s0 = ModState::at_rest(vec![0.7], vec![-1.0]).unwrap();
        let tr = simulate(&sys32(), &s0, &SimulateConfig { t_max: 1.0, ..Default::default() }).unwrap();
        assert_eq!(tr.last().lambda, vec![0.7]);
        assert_eq!(tr.last().beta, vec![0.0]);
    }

    #[test]
    fn hamiltonian_is_conserved() {
        let sys = sys32();
        for iota in [vec![1.0, 1.0, 1.0], vec![1.0, -1.0, 1.0]] {
            let s0 = ModState::new(vec![1.0, 0.1, 0.01], vec![0.0, 0.01, -0.02], iota).unwrap();
            let cfg = SimulateConfig { t_max: 0.5, gamma_ceiling: 0.95, ..Default::default() };
            let tr = simulate(&sys, &s0, &cfg).unwrap();
            assert!(tr.hamiltonian_drift() < 1e-8, "drift {}", tr.hamiltonian_drift());
        }
    }

    #[test]
    fn same_signs_collapse_and_exit_times_scale() {
        let sys = sys32();
        let s0 = ModState::at_rest(vec![1.0, 0.05], vec![1.0, 1.0]).unwrap();
        let rep = exit_time(&sys, &s0, 0.5, 100.0).unwrap();
        let t = rep.time.expect("the small bubble grows toward the large one");
        assert!(t > 0.0 && rep.final_state.gamma() >= 0.5 - 1e-6);
        let sc = scaling_check(&sys, &s0, &[0.5, 1.0, 2.0, 10.0], 0.5, 100.0).unwrap();
        assert!(sc.max_deviation < 1e-6, "{:?}", sc);
    }

    #[test]
    fn trajectory_csv_has_expected_columns() {
        let s0 = ModState::at_rest(vec![1.0, 0.1], vec![1.0, -1.0]).unwrap();
        let tr = simulate(&sys32(), &s0, &SimulateConfig { t_max: 0.01, ..Default::default() }).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,lambda_1,lambda_2,beta_1,beta_2,gamma,H\n"));
        assert_eq!(text.lines().count(), tr.states.len() + 1);
    }

    fn fit_grid() -> Arc<RadialGrid> {
        RadialGrid::log_spaced(3, 1e-5, 1e5, 6000).unwrap()
    }

    #[test]
    fn fit_recovers_planted_scales() {
        let gs = gs32();
        let grid = fit_grid();
        let (lam, iota) = ([1.0, 0.03], [1.0, -1.0]);
        let f = multi_soliton(&gs, &grid, &lam, &iota);
        let rep = fit_scales(&gs, &f, &iota, &[1.1, 0.027], &FitOptions::default()).unwrap();
        for (a, b) in rep.lambda.iter().zip(&lam) {
            assert!((a / b - 1.0).abs() < 1e-6, "{:?}", rep.lambda);
        }
        assert!(rep.residuals.iter().all(|r| *r < 1e-10));
    }

    #[test]
    fn velocity_expansion_recovers_planted_coefficients() {
        let gs = gs32();
        let grid = fit_grid();
        let (lam, iota) = ([1.0, 0.03], [1.0, -1.0]);
        let alpha = [0.3, -1.2];
        let v = RadialField::from_fn(&grid, |r| {
            (0..2).map(|j| alpha[j] * iota[j] * gs.scale_l2(lam[j], r, |x| gs.lambda_w(x))).sum()
        });
        let c = extract_coeffs(&gs, &v, &lam, &iota).unwrap();
        for j in 0..2 {
            assert!((c.alpha[j] - alpha[j]).abs() < 1e-4, "{:?}", c.alpha);
        }
        assert!(c.g1_norm < 1e-3 * (alpha[0].abs() + alpha[1].abs()));
    }

    #[test]
    fn fitted_scales_are_lipschitz_in_the_data() {
        let gs = gs32();
        let grid = fit_grid();
        let params = gs.params;
        let ops = Operators::new(&grid, &params).unwrap();
        let (lam, iota) = ([1.0, 0.03], [1.0, 1.0]);
        let base = multi_soliton(&gs, &grid, &lam, &iota);
        let bump = RadialField::from_fn(&grid, |r| (-(r - 2.0).powi(2)).exp());
        let bnorm = params.sphere_area().sqrt() * ops.norm_h1a(&bump, 0.0).unwrap();
        let c = 1.5 / gs.constants().unwrap().a_lambda_w_norm_sq.sqrt();
        let fit0 = fit_scales(&gs, &base, &iota, &lam, &FitOptions::default()).unwrap();
        for eps in [1e-4, 1e-3, 1e-2] {
            let f = base.zip_with(&bump, |a, b| a + eps / bnorm * b).unwrap();
            let fit = fit_scales(&gs, &f, &iota, &lam, &FitOptions::default()).unwrap();
            let moved = (fit.lambda[0] / fit0.lambda[0] - 1.0).abs();
            assert!(moved <= c * eps, "eps {eps}: moved {moved}, bound {}", c * eps);
        }
    }

    #[test]
    fn single_soliton_fit_from_a_distant_guess() {
        let gs = gs32();
        let f = multi_soliton(&gs, &fit_grid(), &[2.0], &[1.0]);
        let rep = fit_scales(&gs, &f, &[1.0], &[1.7], &FitOptions::default()).unwrap();
        assert!((rep.lambda[0] - 2.0).abs() < 1e-6, "{:?}", rep.lambda);
    }

    #[test]
    fn single_term_velocity_gives_minus_m() {
        let gs = gs32();
        let grid = fit_grid();
        let m = gs.constants().unwrap().m;
        let v = RadialField::from_fn(&grid, |r| -gs.scale_l2(0.5, r, |x| gs.lambda_w(x)));
        let c = extract_coeffs(&gs, &v, &[0.5], &[-1.0]).unwrap();
        assert!((c.alpha[0] - 1.0).abs() < 1e-6);
        assert!((c.beta[0] + m).abs() < 1e-3 * m, "{} vs {}", c.beta[0], -m);
    }

    #[test]
    fn same_signs_attract_opposite_signs_repel() {
        let sys = sys32();
        let same = ModState::at_rest(vec![1.0, 0.02], vec![1.0, 1.0]).unwrap();
        let (_, db) = sys.rhs(&same);
        assert!(db[0] < 0.0 && db[1] > 0.0);
        let opp = ModState::at_rest(vec![1.0, 0.02], vec![1.0, -1.0]).unwrap();
        let (_, db) = sys.rhs(&opp);
        assert!(db[0] > 0.0 && db[1] < 0.0);
        let tr = simulate(&sys, &opp, &SimulateConfig { t_max: 0.05, ..Default::default() }).unwrap();
        assert!(tr.last().gamma() < opp.gamma());
    }

    #[test]
    fn exit_is_finite_for_every_separation() {
        let sys = sys32();
        for g in [1e-1, 1e-2, 1e-3] {
            let s0 = ModState::at_rest(vec![1.0, g], vec![-1.0, -1.0]).unwrap();
            assert!(exit_time(&sys, &s0, 0.5, 1e4).unwrap().time.is_some(), "gamma(0) = {g}");
        }
    }
}
