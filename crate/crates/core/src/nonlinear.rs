//! Radial method-of-lines solver for `∂_t² u + L_a u = |u|^{4/(N-2)} u`, its
//! linearization at `W_a`, and the free flow.
//!
//! Space is a conservative finite-volume form of `L_a = A*A` in the variable
//! `v = r^c u` on the uniform grid `r_i = iΔr`:
//!
//! * potential energy `½ Σ φ_{i+½} (v_{i+1} - v_i)²` with
//!   `φ_{i+½} = 1 / ∫_{r_i}^{r_{i+1}} r^{-(p+1)} dr`, which makes the static
//!   decaying power `r^α` an exact discrete solution;
//! * zero flux below the first node (the regular branch, `∂_r(u r^c) = 0`);
//! * beyond the last node the static `r^α` continuation, whose energy
//!   `½ p r_n^p v_n²` closes the system;
//! * optional cosine-ramp damping of `∂_t u` over the outer part of the grid.
//!
//! Time stepping is velocity Verlet. The semi-discrete energy is conserved
//! exactly apart from the damping, which is tallied separately.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::groundstate::GroundState;
use crate::params::Params;
use crate::radialgrid::{GridKind, RadialField, RadialGrid, StatePair};

/// Right-hand side selector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Nonlinear,
    /// Linearization at `W_(λ)`.
    LinearizedAtW { lambda: f64 },
    Free,
}

#[derive(Clone, Debug, Serialize)]
pub struct EvolveConfig {
    pub t_final: f64,
    /// Time step; defaults to `0.4 Δr`.
    pub dt: Option<f64>,
    pub dr: f64,
    pub r_max: f64,
    pub mode: Mode,
    /// Fraction of the grid covered by the damping layer (0 disables it).
    pub sponge_fraction: f64,
    /// Peak damping rate in the layer.
    pub sponge_strength: f64,
    /// Time between stored snapshots; `None` keeps only the final state.
    pub snapshot_every: Option<f64>,
    /// Halts when `sup |u|` exceeds this.
    pub blowup_threshold: f64,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            t_final: 1.0,
            dt: None,
            dr: 0.02,
            r_max: 40.0,
            mode: Mode::Nonlinear,
            sponge_fraction: 0.1,
            sponge_strength: 2.0,
            snapshot_every: None,
            blowup_threshold: 1e6,
        }
    }
}

impl EvolveConfig {
    /// The uniform grid this configuration runs on.
    pub fn grid(&self, dim: usize) -> Result<Arc<RadialGrid>> {
        let n = (self.r_max / self.dr).round() as usize;
        RadialGrid::uniform(dim, self.dr, n)
    }

    pub fn time_step(&self) -> f64 {
        self.dt.unwrap_or(0.4 * self.dr)
    }
}

/// Energy bookkeeping at one time.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EnergySample {
    pub t: f64,
    pub energy: f64,
    /// Energy removed by the damping layer so far.
    pub absorbed: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub snapshots: Vec<(f64, StatePair)>,
    pub energy: Vec<EnergySample>,
    /// Why the run stopped early, if it did.
    pub halted: Option<String>,
}

impl Trajectory {
    pub fn last(&self) -> &(f64, StatePair) {
        self.snapshots.last().expect("trajectory holds at least the initial state")
    }

    /// `max |E + absorbed - E₀| / |E₀|` over the run.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.energy[0].energy;
        self.energy.iter().map(|s| (s.energy + s.absorbed - e0).abs()).fold(0.0, f64::max) / e0.abs().max(1e-300)
    }
}

/// The discrete operator and its energy on one uniform grid.
#[derive(Clone, Debug)]
pub struct Scheme {
    pub params: Params,
    pub grid: Arc<RadialGrid>,
    /// Dual-cell masses `∫ r^{N-1} dr`.
    mass: Vec<f64>,
    /// `r_i^c`.
    rc: Vec<f64>,
    /// Face weights between nodes `i` and `i+1`.
    phi: Vec<f64>,
    /// Coefficient of `½ v_n²` from the static exterior.
    outer: f64,
    /// Potential multiplying `u` in the linear part beyond `L_a` (sign:
    /// force is `+pot · u`).
    pot: Vec<f64>,
    damp: Vec<f64>,
    mode: Mode,
}

fn cell_mass(a: f64, b: f64, d: f64) -> f64 {
    (b.powf(d) - a.powf(d)) / d
}

impl Scheme {
    pub fn new(params: &Params, grid: &Arc<RadialGrid>, mode: Mode, sponge_fraction: f64, sponge_strength: f64) -> Result<Self> {
        let dr = match grid.kind() {
            GridKind::Uniform { dr } => *dr,
            _ => return Err(Error::Grid("the solver needs a uniform grid r_i = i dr".into())),
        };
        if grid.dim() != params.n {
            return Err(Error::Grid(format!("grid dimension {} vs N = {}", grid.dim(), params.n)));
        }
        let x = grid.nodes();
        let n = x.len();
        let d = params.dim();
        let p = params.p();
        let mut mass: Vec<f64> = (0..n).map(|i| cell_mass(x[i] - 0.5 * dr, x[i] + 0.5 * dr, d)).collect();
        mass[0] = cell_mass(0.0, 1.5 * dr, d);
        mass[n - 1] = cell_mass(x[n - 1] - 0.5 * dr, x[n - 1], d);
        let rc: Vec<f64> = x.iter().map(|r| r.powf(params.c)).collect();
        let phi: Vec<f64> = x
            .windows(2)
            .map(|w| {
                // ∫ r^{-(p+1)} dr = (a^{-p} - b^{-p}) / p
                let int = if p.abs() < 1e-12 { (w[1] / w[0]).ln() } else { (w[0].powf(-p) - w[1].powf(-p)) / p };
                1.0 / int
            })
            .collect();
        let outer = p * x[n - 1].powf(p);
        let gs = GroundState::new(*params);
        let pot = match mode {
            Mode::LinearizedAtW { lambda } => {
                x.iter().map(|&r| (d + 2.0) / (d - 2.0) * gs.w_scaled(r, lambda).abs().powf(4.0 / (d - 2.0))).collect()
            }
            _ => vec![0.0; n],
        };
        let r_max = x[n - 1];
        let r_s = r_max * (1.0 - sponge_fraction);
        let damp = x
            .iter()
            .map(|&r| {
                if sponge_fraction > 0.0 && r > r_s {
                    let s = (r - r_s) / (r_max - r_s);
                    sponge_strength * 0.5 * (1.0 - (std::f64::consts::PI * s).cos())
                } else {
                    0.0
                }
            })
            .collect();
        Ok(Self { params: *params, grid: grid.clone(), mass, rc, phi, outer, pot, damp, mode })
    }

    /// `L_a u` in the mass-weighted sense: `(1/m_i) ∂E_pot/∂u_i`.
    pub fn apply_la(&self, u: &[f64], out: &mut [f64]) {
        let n = u.len();
        let mut prev_flux = 0.0;
        for i in 0..n {
            let flux = if i + 1 < n {
                self.phi[i] * (self.rc[i + 1] * u[i + 1] - self.rc[i] * u[i])
            } else {
                -self.outer * self.rc[i] * u[i]
            };
            out[i] = -self.rc[i] * (flux - prev_flux) / self.mass[i];
            prev_flux = flux;
        }
    }

    /// One velocity-Verlet step. `acc` holds the acceleration of `u` on entry
    /// and is kept current.
    pub fn step(&self, u: &mut [f64], v: &mut [f64], acc: &mut [f64], dt: f64) {
        for i in 0..u.len() {
            v[i] += 0.5 * dt * acc[i];
            u[i] += dt * v[i];
        }
        self.accel(u, acc);
        for i in 0..u.len() {
            v[i] += 0.5 * dt * acc[i];
        }
    }

    pub fn accel(&self, u: &[f64], out: &mut [f64]) {
        self.apply_la(u, out);
        let d = self.params.dim();
        let e = 4.0 / (d - 2.0);
        for i in 0..u.len() {
            let f = match self.mode {
                Mode::Nonlinear => u[i].abs().powf(e) * u[i],
                Mode::LinearizedAtW { .. } => self.pot[i] * u[i],
                Mode::Free => 0.0,
            };
            out[i] = f - out[i];
        }
    }

    /// `‖u‖²_{Ḣ¹_a}` in the discrete form, exterior continuation included.
    pub fn h1a_sq(&self, u: &[f64]) -> f64 {
        let n = u.len();
        let bulk: f64 = (0..n - 1).map(|i| self.phi[i] * (self.rc[i + 1] * u[i + 1] - self.rc[i] * u[i]).powi(2)).sum();
        bulk + self.outer * (self.rc[n - 1] * u[n - 1]).powi(2)
    }

    /// `∫_{from}^{to} (|A u|² + u_t²) r^{N-1} dr` in the discrete form, with
    /// faces and cells cut linearly at the ends. The static exterior counts
    /// when `to` lies beyond the last node.
    pub fn energy_between(&self, u: &[f64], ut: &[f64], from: f64, to: f64) -> f64 {
        let x = self.grid.nodes();
        let n = x.len();
        let dr = x[1] - x[0];
        let overlap = |a: f64, b: f64| ((b.min(to) - a.max(from)) / (b - a)).clamp(0.0, 1.0);
        let faces: f64 = (0..n - 1)
            .map(|i| overlap(x[i], x[i + 1]) * self.phi[i] * (self.rc[i + 1] * u[i + 1] - self.rc[i] * u[i]).powi(2))
            .sum();
        let cells: f64 = (0..n).map(|i| overlap(x[i] - 0.5 * dr, x[i] + 0.5 * dr) * self.mass[i] * ut[i] * ut[i]).sum();
        let outer = if to > x[n - 1] { self.outer * (self.rc[n - 1] * u[n - 1]).powi(2) } else { 0.0 };
        faces + cells + outer
    }

    /// `∫ g² r^{N-1} dr` with the dual-cell masses.
    pub fn l2_sq(&self, g: &[f64]) -> f64 {
        g.iter().zip(&self.mass).map(|(v, m)| v * v * m).sum()
    }

    pub fn energy(&self, u: &[f64], ut: &[f64]) -> f64 {
        let d = self.params.dim();
        let crit = 2.0 * d / (d - 2.0);
        let extra: f64 = match self.mode {
            Mode::Nonlinear => -u.iter().zip(&self.mass).map(|(v, m)| v.abs().powf(crit) * m).sum::<f64>() / crit,
            Mode::LinearizedAtW { .. } => -0.5 * u.iter().zip(&self.mass).zip(&self.pot).map(|((v, m), q)| q * v * v * m).sum::<f64>(),
            Mode::Free => 0.0,
        };
        0.5 * (self.h1a_sq(u) + self.l2_sq(ut)) + extra
    }
}

/// Runs the solver from `s0`, which must live on a uniform grid.
pub fn evolve(params: &Params, s0: &StatePair, cfg: &EvolveConfig) -> Result<Trajectory> {
    let grid = s0.grid().clone();
    let scheme = Scheme::new(params, &grid, cfg.mode, cfg.sponge_fraction, cfg.sponge_strength)?;
    let dt = cfg.time_step();
    let dr = grid.min_spacing();
    if !(dt > 0.0 && dt <= 0.5 * dr + 1e-15) {
        return Err(Error::Validation(format!("CFL: dt = {dt} must lie in (0, 0.5 dr = {}]", 0.5 * dr)));
    }
    let steps = (cfg.t_final / dt).round().max(0.0) as usize;
    let every = cfg.snapshot_every.map(|s| ((s / dt).round() as usize).max(1));
    let n = grid.len();
    let mut u = s0.position.values.clone();
    let mut v = s0.velocity.values.clone();
    let mut acc = vec![0.0; n];
    scheme.accel(&u, &mut acc);
    let mut absorbed = 0.0;
    let mut snapshots = vec![(0.0, s0.clone())];
    let mut energy = vec![EnergySample { t: 0.0, energy: scheme.energy(&u, &v), absorbed: 0.0 }];
    let mut halted = None;
    let damp_half: Vec<f64> = scheme.damp.iter().map(|s| (-s * 0.5 * dt).exp()).collect();
    let damped = scheme.damp.iter().any(|&s| s > 0.0);
    let snapshot = |t: f64, u: &[f64], v: &[f64]| -> Result<(f64, StatePair)> {
        Ok((t, StatePair::new(RadialField::new(grid.clone(), u.to_vec())?, RadialField::new(grid.clone(), v.to_vec())?)?))
    };
    for step in 1..=steps {
        if damped {
            absorbed += damp(&mut v, &damp_half, &scheme.mass);
        }
        scheme.step(&mut u, &mut v, &mut acc, dt);
        if damped {
            absorbed += damp(&mut v, &damp_half, &scheme.mass);
        }
        let t = step as f64 * dt;
        let sup = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if !sup.is_finite() || sup > cfg.blowup_threshold {
            halted = Some(format!("blow-up detector: sup |u| = {sup:.3e} at t = {t:.6}"));
            break;
        }
        if every.is_some_and(|e| step % e == 0) || step == steps {
            energy.push(EnergySample { t, energy: scheme.energy(&u, &v), absorbed });
            snapshots.push(snapshot(t, &u, &v)?);
        }
    }
    Ok(Trajectory { snapshots, energy, halted })
}

/// Applies one half-step damping factor; returns the kinetic energy removed.
fn damp(v: &mut [f64], factor: &[f64], mass: &[f64]) -> f64 {
    let mut removed = 0.0;
    for ((x, f), m) in v.iter_mut().zip(factor).zip(mass) {
        let before = *x;
        *x *= f;
        removed += 0.5 * m * (before * before - *x * *x);
    }
    removed
}

/// Settings for [`two_bubble_experiment`].
#[derive(Clone, Debug, Serialize)]
pub struct TwoBubbleConfig {
    /// Scales at `t = 0`, decreasing.
    pub lambda: Vec<f64>,
    pub iota: Vec<f64>,
    pub t_final: f64,
    /// Defaults to `λ_J/40`.
    pub dr: Option<f64>,
    /// Defaults to `10 λ_1`.
    pub r_max: Option<f64>,
    /// Number of fit times after `t = 0`.
    pub samples: usize,
    /// The window closes once `δ > delta_max ‖W‖_{Ḣ¹_a}`.
    pub delta_max: f64,
}

impl TwoBubbleConfig {
    /// `t_final = 0.75 λ_J(0)`: about three growth times of the smallest
    /// bubble's unstable mode.
    pub fn new(lambda: Vec<f64>, iota: Vec<f64>) -> Self {
        let t_final = 0.75 * lambda.last().copied().unwrap_or(1.0);
        Self { lambda, iota, t_final, dr: None, r_max: None, samples: 30, delta_max: 0.1 }
    }
}

/// PDE-extracted and ODE-predicted parameters at one time.
#[derive(Clone, Debug, Serialize)]
pub struct TwoBubbleSample {
    pub t: f64,
    pub lambda_pde: Vec<f64>,
    pub beta_pde: Vec<f64>,
    pub gamma_pde: f64,
    pub lambda_ode: Vec<f64>,
    pub beta_ode: Vec<f64>,
    pub gamma_ode: f64,
    /// `δ` of the fit.
    pub delta: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TwoBubbleReport {
    pub samples: Vec<TwoBubbleSample>,
    /// `sup |γ_pde - γ_ode|` over the comparison window.
    pub max_gamma_deviation: f64,
    /// `|γ_ode(T) - γ(0)|`, the size of the predicted effect.
    pub ode_gamma_change: f64,
    /// Sign of `γ(T) - γ(0)` for the two descriptions.
    pub pde_direction: f64,
    pub ode_direction: f64,
    /// `sup |β_J^{pde} - β_J^{ode}| / sup |β_J^{ode}|` for the smallest bubble.
    pub beta_relative_deviation: f64,
    /// Signs of `β_J(T)` for the two descriptions.
    pub pde_beta_direction: f64,
    pub ode_beta_direction: f64,
    /// `max_j |λ_j^{pde}/λ_j(0) - 1|` over the window.
    pub max_scale_drift: f64,
    pub window_end: f64,
    /// Why the window ended before `t_final`, if it did.
    pub stopped: Option<String>,
    pub energy_drift: f64,
}

/// Evolves `Σ ι_j W_(λ_j)` at rest, refits `(λ_j, β_j)` at sample times and
/// compares with the idealized modulation system from the same state.
pub fn two_bubble_experiment(params: &Params, cfg: &TwoBubbleConfig) -> Result<TwoBubbleReport> {
    use crate::modulation::{fit_state, multi_soliton, simulate, FitOptions, ModState, ModSystem, SimulateConfig};
    let s0 = ModState::at_rest(cfg.lambda.clone(), cfg.iota.clone())?;
    if s0.gamma() > 0.1 {
        return Err(Error::Validation(format!("gamma(0) = {} exceeds 0.1", s0.gamma())));
    }
    if cfg.samples == 0 || !(cfg.t_final > 0.0) {
        return Err(Error::Validation("need t_final > 0 and at least one sample".into()));
    }
    let gs = GroundState::new(*params);
    let sys = ModSystem::new(&gs)?;
    let j = s0.len();
    let dr = cfg.dr.unwrap_or(s0.lambda[j - 1] / 40.0);
    let r_max = cfg.r_max.unwrap_or(10.0 * s0.lambda[0]);
    let ecfg = EvolveConfig {
        t_final: cfg.t_final,
        dr,
        r_max,
        mode: Mode::Nonlinear,
        snapshot_every: Some(cfg.t_final / cfg.samples as f64),
        ..Default::default()
    };
    let grid = ecfg.grid(params.n)?;
    let u0 = multi_soliton(&gs, &grid, &s0.lambda, &s0.iota);
    let pair = StatePair::new(u0, RadialField::zeros(&grid))?;
    let tr = evolve(params, &pair, &ecfg)?;
    let mut samples = Vec::new();
    let mut stopped = tr.halted.clone();
    let mut mu = s0.lambda.clone();
    let opts = FitOptions { tol: 1e-10, ..Default::default() };
    let w_norm = gs.constants()?.h1a_norm_sq.sqrt();
    for (t, snap) in &tr.snapshots {
        let fit = match fit_state(&gs, snap, &s0.iota, &mu, &opts) {
            Ok(f) => f,
            Err(e) => {
                stopped = Some(format!("fit failed at t = {t}: {e}"));
                break;
            }
        };
        if fit.delta > cfg.delta_max * w_norm {
            stopped = Some(format!("delta = {:.3e} left the modulation regime at t = {t}", fit.delta));
            break;
        }
        let ode = if *t > 0.0 {
            simulate(&sys, &s0, &SimulateConfig { t_max: *t, gamma_ceiling: 0.99, record_every: usize::MAX, ..Default::default() })?
                .last()
                .clone()
        } else {
            s0.clone()
        };
        let gamma_pde = if j > 1 { fit.lambda.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max) } else { 0.0 };
        mu = fit.lambda.clone();
        samples.push(TwoBubbleSample {
            t: *t,
            gamma_pde,
            lambda_pde: fit.lambda,
            beta_pde: fit.beta,
            gamma_ode: ode.gamma(),
            lambda_ode: ode.lambda.clone(),
            beta_ode: ode.beta.clone(),
            delta: fit.delta,
        });
    }
    let last = samples.last().ok_or_else(|| Error::numerical("nonlinear", "no sample could be fitted"))?;
    let g0 = s0.gamma();
    let sign = |x: f64| if x > 0.0 { 1.0 } else if x < 0.0 { -1.0 } else { 0.0 };
    let beta_scale = samples.iter().map(|s| s.beta_ode[j - 1].abs()).fold(0.0, f64::max);
    let beta_dev = samples.iter().map(|s| (s.beta_pde[j - 1] - s.beta_ode[j - 1]).abs()).fold(0.0, f64::max);
    Ok(TwoBubbleReport {
        beta_relative_deviation: if beta_scale > 0.0 { beta_dev / beta_scale } else { beta_dev },
        pde_beta_direction: sign(last.beta_pde[j - 1]),
        ode_beta_direction: sign(last.beta_ode[j - 1]),
        max_gamma_deviation: samples.iter().map(|s| (s.gamma_pde - s.gamma_ode).abs()).fold(0.0, f64::max),
        ode_gamma_change: (last.gamma_ode - g0).abs(),
        pde_direction: sign(last.gamma_pde - g0),
        ode_direction: sign(last.gamma_ode - g0),
        max_scale_drift: samples
            .iter()
            .flat_map(|s| s.lambda_pde.iter().zip(&s0.lambda).map(|(a, b)| (a / b - 1.0).abs()))
            .fold(0.0, f64::max),
        window_end: last.t,
        stopped,
        energy_drift: tr.energy_drift(),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::derive_params;

    fn gaussian(r: f64) -> f64 {
        (-(r - 5.0).powi(2)).exp()
    }

    fn free_cfg(t: f64, r_max: f64) -> EvolveConfig {
        EvolveConfig { t_final: t, dr: 0.02, r_max, mode: Mode::Free, sponge_fraction: 0.0, ..Default::default() }
    }

    #[test]
    fn decaying_power_is_discretely_static() {
        for (n, a) in [(3, 0.0), (3, 2.0), (5, 4.0), (4, 1.0)] {
            let p = derive_params(n, a).unwrap();
            let grid = RadialGrid::uniform(n, 0.05, 400).unwrap();
            let s = Scheme::new(&p, &grid, Mode::Free, 0.0, 0.0).unwrap();
            let u: Vec<f64> = grid.nodes().iter().map(|r| r.powf(p.alpha)).collect();
            let mut out = vec![0.0; u.len()];
            s.apply_la(&u, &mut out);
            for i in 1..u.len() {
                assert!(out[i].abs() < 1e-9 * u[i].abs() / 0.05f64.powi(2), "N={n} a={a} i={i}: {}", out[i]);
            }
        }
    }

    #[test]
    fn operator_is_symmetric_and_positive() {
        let p = derive_params(3, 2.0).unwrap();
        let grid = RadialGrid::uniform(3, 0.1, 60).unwrap();
        let s = Scheme::new(&p, &grid, Mode::Free, 0.0, 0.0).unwrap();
        let f: Vec<f64> = grid.nodes().iter().map(|&r| (r * 0.7).sin() / (1.0 + r)).collect();
        let g: Vec<f64> = grid.nodes().iter().map(|&r| (-0.2 * r).exp()).collect();
        let (mut lf, mut lg) = (vec![0.0; 60], vec![0.0; 60]);
        s.apply_la(&f, &mut lf);
        s.apply_la(&g, &mut lg);
        let ip = |x: &[f64], y: &[f64]| x.iter().zip(y).zip(&s.mass).map(|((a, b), m)| a * b * m).sum::<f64>();
        assert!((ip(&lf, &g) - ip(&f, &lg)).abs() < 1e-12 * ip(&lf, &g).abs());
        assert!((ip(&lf, &f) - s.h1a_sq(&f)).abs() < 1e-12 * s.h1a_sq(&f));
    }

    #[test]
    fn energy_is_conserved_without_damping() {
        for (n, a) in [(3, 2.0), (5, 4.0)] {
            let p = derive_params(n, a).unwrap();
            let cfg = EvolveConfig { snapshot_every: Some(0.5), ..free_cfg(8.0, 20.0) };
            let grid = cfg.grid(n).unwrap();
            let s0 = StatePair::from_fns(&grid, gaussian, |_| 0.0);
            let tr = evolve(&p, &s0, &cfg).unwrap();
            assert!(tr.energy_drift() < 1e-4, "N={n}: {}", tr.energy_drift());
        }
    }

    #[test]
    fn damping_is_tallied() {
        let p = derive_params(3, 2.0).unwrap();
        let cfg = EvolveConfig { sponge_fraction: 0.3, snapshot_every: Some(1.0), ..free_cfg(30.0, 20.0) };
        let grid = cfg.grid(3).unwrap();
        let s0 = StatePair::from_fns(&grid, gaussian, |_| 0.0);
        let tr = evolve(&p, &s0, &cfg).unwrap();
        let last = tr.energy.last().unwrap();
        assert!(last.absorbed > 0.5 * tr.energy[0].energy);
        assert!(tr.energy_drift() < 1e-4, "{}", tr.energy_drift());
    }

    #[test]
    fn free_classical_flow_matches_dalembert() {
        // in R³ with a = 0, r u solves the 1D wave equation with odd extension
        let p = derive_params(3, 0.0).unwrap();
        let cfg = free_cfg(3.0, 20.0);
        let grid = cfg.grid(3).unwrap();
        let s0 = StatePair::from_fns(&grid, gaussian, |_| 0.0);
        let tr = evolve(&p, &s0, &cfg).unwrap();
        let (t, s) = tr.last();
        let h = |x: f64| x * gaussian(x.abs());
        let mut err: f64 = 0.0;
        for (&r, &u) in grid.nodes().iter().zip(&s.position.values) {
            let exact = 0.5 * (h(r - t) + h(r + t)) / r;
            err = err.max((u - exact).abs());
        }
        assert!(err < 2e-3, "{err}");
    }

    #[test]
    fn kernel_velocity_grows_linearly() {
        // data (0, ΛW) for the linearization at W gives t ΛW, to second order in dr
        let p = derive_params(3, 2.0).unwrap();
        let gs = GroundState::new(p);
        let err = |dr: f64| {
            let cfg = EvolveConfig { dr, mode: Mode::LinearizedAtW { lambda: 1.0 }, ..free_cfg(0.5, 30.0) };
            let grid = cfg.grid(3).unwrap();
            let s0 = StatePair::from_fns(&grid, |_| 0.0, |r| gs.lambda_w(r));
            let tr = evolve(&p, &s0, &cfg).unwrap();
            let (t, s) = tr.last();
            let scale = grid.nodes().iter().map(|&r| gs.lambda_w(r).abs()).fold(0.0, f64::max);
            grid.nodes().iter().zip(&s.position.values).map(|(&r, &u)| (u - t * gs.lambda_w(r)).abs()).fold(0.0, f64::max)
                / (t * scale)
        };
        let (coarse, fine) = (err(0.04), err(0.02));
        assert!(fine < 1e-2, "{fine}");
        assert!(coarse / fine > 3.0, "order: {coarse} / {fine}");
    }

    #[test]
    fn blowup_detector_halts() {
        let p = derive_params(3, 0.0).unwrap();
        let cfg = EvolveConfig { t_final: 20.0, r_max: 10.0, ..Default::default() };
        let grid = cfg.grid(3).unwrap();
        let s0 = StatePair::from_fns(&grid, |r| 20.0 * (-r * r).exp(), |_| 0.0);
        let tr = evolve(&p, &s0, &cfg).unwrap();
        assert!(tr.halted.is_some());
    }

    #[test]
    fn rejects_bad_time_step() {
        let p = derive_params(3, 0.0).unwrap();
        let cfg = EvolveConfig { dt: Some(0.05), ..free_cfg(1.0, 5.0) };
        let grid = cfg.grid(3).unwrap();
        let s0 = StatePair::from_fns(&grid, gaussian, |_| 0.0);
        assert!(evolve(&p, &s0, &cfg).is_err());
    }

    #[test]
    fn single_bubble_scale_is_steady() {
        let p = derive_params(3, 2.0).unwrap();
        let rep = two_bubble_experiment(&p, &TwoBubbleConfig::new(vec![1.0], vec![1.0])).unwrap();
        assert!(rep.stopped.is_none(), "{:?}", rep.stopped);
        assert!(rep.max_scale_drift < 1e-3, "{}", rep.max_scale_drift);
    }

    #[test]
    fn two_bubble_velocities_follow_the_ode() {
        let p = derive_params(3, 2.0).unwrap();
        for iota in [vec![1.0, 1.0], vec![1.0, -1.0]] {
            let rep = two_bubble_experiment(&p, &TwoBubbleConfig::new(vec![1.0, 0.02], iota.clone())).unwrap();
            assert!(rep.samples.len() > 10, "{iota:?}: window {}", rep.window_end);
            assert_eq!(rep.pde_beta_direction, rep.ode_beta_direction, "{iota:?}");
            assert_eq!(rep.ode_beta_direction, iota[0] * iota[1]);
            assert!(rep.beta_relative_deviation < 0.3, "{iota:?}: {}", rep.beta_relative_deviation);
        }
    }
}
