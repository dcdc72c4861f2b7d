//! The acceptance suite: ten end-to-end property checks with pinned
//! tolerances, shared by the `acceptance` subcommand and test target.

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::groundstate::{GroundState, InteractionKind};
use crate::hankel::{check_transform, HankelPlan, Packets};
use crate::linprop::{channel_limit, kernel_channel, radiation_field, ChannelOptions, KernelChannelOptions};
use crate::modulation::{
    exit_time, fit_scales, multi_soliton, scaling_check, simulate, FitOptions, ModState, ModSystem, SimulateConfig,
};
use crate::nonlinear::{evolve, EvolveConfig, Mode, Scheme};
use crate::params::{a_for_p, derive_params, Params};
use crate::projection::{as_value, cauchy_inverse, cauchy_matrix, f_nodes, g_nodes, is_identity, mat_mul, q, CoeffTable, InteriorConvention};
use crate::radialgrid::{fmt17, Operators, RadialField, RadialGrid, StatePair};

/// `(id, name, group)` for each criterion.
pub const CRITERIA: [(u8, &str, &str); 10] = [
    (1, "coefficient-identities", "projection"),
    (2, "cauchy-inverse", "projection"),
    (3, "hankel-transform", "hankel"),
    (4, "channel-equality", "channel"),
    (5, "kernel-channel", "channel"),
    (6, "ground-state-stationarity", "nonlinear"),
    (7, "interaction-exponents", "groundstate"),
    (8, "modulation-fit", "modulation"),
    (9, "ode-diagnostics", "modulation"),
    (10, "radiation-field", "radiation"),
];

/// Criteria that cannot pass with any stable discretization: the ground
/// state is linearly unstable, so discretization error grows like
/// `e^{μt}` with `μ ≈ 1.9` to `4.4` and saturates long before `t = 10`.
pub const KNOWN_RED: [u8; 1] = [6];

/// Deliberate breakage used to show the suite fails loudly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    /// Adds one to the first velocity coefficient of every table.
    CorruptCoefficients,
}

impl Fault {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "corrupt-coefficients" => Ok(Fault::CorruptCoefficients),
            _ => Err(Error::Validation(format!("unknown fault {s}; expected corrupt-coefficients"))),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Criterion numbers, names or groups; empty runs everything.
    pub only: Vec<String>,
    pub fault: Option<Fault>,
    /// Random mixed pairs per parameter set in criterion 4.
    pub mixed_pairs: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self { seed: 20240601, only: vec![], fault: None, mixed_pairs: 50 }
    }
}

/// How `measured` is compared with `tolerance`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Comparison {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

#[derive(Clone, Debug, Serialize)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub group: &'static str,
    pub pass: bool,
    pub measured: f64,
    pub comparison: Comparison,
    pub tolerance: f64,
    pub detail: String,
    pub seconds: f64,
}

impl Outcome {
    /// One line per criterion, as printed by the harness.
    pub fn line(&self) -> String {
        let cmp = match self.comparison {
            Comparison::AtMost => "<=",
            Comparison::AtLeast => ">=",
        };
        format!(
            "criterion {:>2} {:<26} {}  measured {:.3e} {cmp} {:.1e}  ({:.1} s)  {}",
            self.id,
            self.name,
            if self.pass { "PASS" } else { "FAIL" },
            self.measured,
            self.tolerance,
            self.seconds,
            self.detail
        )
    }
}

/// Intermediate result of one check.
struct Check {
    measured: f64,
    comparison: Comparison,
    tolerance: f64,
    /// Extra conditions that must also hold.
    side: bool,
    detail: String,
}

impl Check {
    fn at_most(measured: f64, tolerance: f64, detail: String) -> Self {
        Self { measured, comparison: Comparison::AtMost, tolerance, side: true, detail }
    }

    fn at_least(measured: f64, tolerance: f64, detail: String) -> Self {
        Self { measured, comparison: Comparison::AtLeast, tolerance, side: true, detail }
    }

    fn and(mut self, ok: bool, why: &str) -> Self {
        if !ok {
            self.side = false;
            self.detail = format!("{}; {why}", self.detail);
        }
        self
    }

    fn pass(&self) -> bool {
        let within = match self.comparison {
            Comparison::AtMost => self.measured <= self.tolerance,
            Comparison::AtLeast => self.measured >= self.tolerance,
        };
        within && self.side
    }
}

/// Resolves `--only` tokens to criterion numbers.
pub fn selected(cfg: &SuiteConfig) -> Result<Vec<u8>> {
    if cfg.only.is_empty() {
        return Ok(CRITERIA.iter().map(|c| c.0).collect());
    }
    let mut ids = Vec::new();
    for tok in &cfg.only {
        let hit: Vec<u8> = CRITERIA
            .iter()
            .filter(|(id, name, group)| tok == name || tok == group || tok.parse::<u8>().ok() == Some(*id))
            .map(|c| c.0)
            .collect();
        if hit.is_empty() {
            return Err(Error::Validation(format!("unknown criterion or group {tok}")));
        }
        ids.extend(hit);
    }
    ids.sort_unstable();
    ids.dedup();
    Ok(ids)
}

/// Runs the selected criteria in order.
pub fn run(cfg: &SuiteConfig) -> Result<Vec<Outcome>> {
    Ok(selected(cfg)?.into_iter().map(|id| run_one(id, cfg)).collect())
}

/// Runs one criterion; an internal error counts as a failure.
pub fn run_one(id: u8, cfg: &SuiteConfig) -> Outcome {
    let (_, name, group) = CRITERIA[id as usize - 1];
    let start = Instant::now();
    let res = match id {
        1 => coefficient_identities(cfg),
        2 => cauchy_inverses(),
        3 => hankel_transform(cfg),
        4 => channel_equality(cfg),
        5 => kernel_channels(),
        6 => stationarity(),
        7 => interaction_exponents(),
        8 => modulation_fit(),
        9 => ode_diagnostics(),
        _ => radiation(cfg),
    };
    let seconds = start.elapsed().as_secs_f64();
    match res {
        Ok(c) => Outcome {
            id,
            name,
            group,
            pass: c.pass(),
            measured: c.measured,
            comparison: c.comparison,
            tolerance: c.tolerance,
            detail: c.detail,
            seconds,
        },
        Err(e) => Outcome {
            id,
            name,
            group,
            pass: false,
            measured: f64::NAN,
            comparison: Comparison::AtMost,
            tolerance: f64::NAN,
            detail: format!("error: {e}"),
            seconds,
        },
    }
}

/// `id,name,group,pass,measured,comparison,tolerance,seconds,detail`.
pub fn write_csv<W: Write>(outcomes: &[Outcome], w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(["id", "name", "group", "pass", "measured", "comparison", "tolerance", "seconds", "detail"])?;
    for o in outcomes {
        let cmp = if o.comparison == Comparison::AtMost { "<=" } else { ">=" };
        out.write_record([
            o.id.to_string(),
            o.name.to_string(),
            o.group.to_string(),
            o.pass.to_string(),
            fmt17(o.measured),
            cmp.to_string(),
            fmt17(o.tolerance),
            format!("{:.3}", o.seconds),
            o.detail.clone(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// The pack with `(N - 2)β = p` in dimension `n`.
fn pack(n: usize, p: f64) -> Result<Params> {
    derive_params(n, a_for_p(n, p))
}

fn canonical() -> Result<Vec<Params>> {
    Ok(vec![derive_params(3, 2.0)?, derive_params(5, 4.0)?, pack(7, 5.0)?])
}

fn label(p: &Params) -> String {
    format!("({},{})", p.n, p.a)
}

fn coefficient_identities(cfg: &SuiteConfig) -> Result<Check> {
    let mut failed = Vec::new();
    let mut total = 0;
    for params in canonical()? {
        let mut table = CoeffTable::new(params.require_odd()?)?;
        if cfg.fault == Some(Fault::CorruptCoefficients) {
            table.ctilde[0] = &table.ctilde[0] + q(1);
        }
        for c in table.check_identities() {
            total += 1;
            if !c.pass {
                failed.push(format!("{} {}: {} != {}", label(&params), c.name, c.lhs, c.rhs));
            }
        }
    }
    let detail = if failed.is_empty() { format!("{total} exact identities") } else { failed.join("; ") };
    Ok(Check::at_most(failed.len() as f64, 0.0, detail))
}

fn cauchy_inverses() -> Result<Check> {
    let mut failed = Vec::new();
    let mut total = 0;
    for p in [1i64, 3, 5, 7, 9] {
        for n in 1..=((p + 1) / 2) as usize {
            for (kind, (x, y)) in [("g", g_nodes(p, n)), ("f", f_nodes(p, n))] {
                let a = cauchy_matrix(&x, &y)?;
                let b = cauchy_inverse(&x, &y)?;
                total += 1;
                if !(is_identity(&mat_mul(&a, &b)) && is_identity(&mat_mul(&b, &a))) {
                    failed.push(format!("p={p} n={n} {kind}"));
                }
            }
        }
    }
    let detail = if failed.is_empty() { format!("{total} systems, A B = B A = I") } else { failed.join(", ") };
    Ok(Check::at_most(failed.len() as f64, 0.0, detail))
}

fn hankel_transform(cfg: &SuiteConfig) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut iso, mut rt, mut diag) = (0.0f64, 0.0f64, 0.0f64);
    let mut sets = vec![derive_params(3, 0.0)?];
    sets.extend(canonical()?);
    for params in &sets {
        let grid = RadialGrid::uniform(params.n, 0.05, 800)?;
        let plan = HankelPlan::for_grid(params, &grid)?;
        for _ in 0..5 {
            let f = Packets::random(&mut rng, 3, 6.0, 14.0);
            let g = Packets::random(&mut rng, 3, 6.0, 14.0);
            let c = check_transform(&plan, &f, &g)?;
            iso = iso.max(c.isometry);
            rt = rt.max(c.round_trip);
            diag = diag.max(c.diagonalization);
        }
    }
    let detail = format!("20 fields: isometry {iso:.2e}, inversion {rt:.2e}, diagonalization {diag:.2e} (<= 1e-2)");
    Ok(Check::at_most(iso.max(rt), 1e-3, detail).and(diag <= 1e-2, "diagonalization above 1e-2"))
}

fn bump(r: f64) -> f64 {
    (-(r - 5.0).powi(2)).exp()
}

fn channel_equality(cfg: &SuiteConfig) -> Result<Check> {
    let opts = ChannelOptions::default();
    let r = 1.0;
    let mut notes = Vec::new();
    let (mut g_err, mut f_err) = (0.0f64, 0.0f64);
    let mut worst_margin = f64::INFINITY;
    for (i, params) in [derive_params(3, 0.0)?, derive_params(3, 2.0)?].into_iter().enumerate() {
        let grid = RadialGrid::uniform(params.n, 0.05, 800)?;
        let sg = StatePair::from_fns(&grid, |_| 0.0, bump);
        let eg = channel_limit(&params, &sg, r, &opts)?.asymptotic_energy;
        let (_, as_g) = as_value(&params, &sg, r, InteriorConvention::Frozen)?;
        g_err = g_err.max((eg / as_g - 1.0).abs());
        let sf = StatePair::from_fns(&grid, bump, |_| 0.0);
        let ef = channel_limit(&params, &sf, r, &opts)?.asymptotic_energy;
        let (as_f, _) = as_value(&params, &sf, r, InteriorConvention::Frozen)?;
        f_err = f_err.max((ef / as_f - 1.0).abs());
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(i as u64));
        let pairs: Vec<(Packets, Packets)> = (0..cfg.mixed_pairs)
            .map(|_| (Packets::random(&mut rng, 2, 3.0, 7.0), Packets::random(&mut rng, 2, 3.0, 7.0)))
            .collect();
        let margins: Vec<f64> = pairs
            .par_iter()
            .map(|(f, g)| -> Result<f64> {
                let s = StatePair::from_fns(&grid, |x| f.value(x), |x| g.value(x));
                let e = channel_limit(&params, &s, r, &opts)?.asymptotic_energy;
                let (af, ag) = as_value(&params, &s, r, InteriorConvention::Frozen)?;
                Ok((e - af - ag) / (af + ag))
            })
            .collect::<Result<_>>()?;
        let m = margins.iter().cloned().fold(f64::INFINITY, f64::min);
        worst_margin = worst_margin.min(m);
        notes.push(format!("{} min margin {m:.2e}", label(&params)));
    }
    let detail = format!(
        "(0,g) error {g_err:.2e} (<= 2e-2), (f,0) error {f_err:.2e} (<= 3e-2), {} mixed pairs per set: {}",
        cfg.mixed_pairs,
        notes.join(", ")
    );
    Ok(Check::at_least(worst_margin, -1e-3, detail)
        .and(g_err <= 0.02, "(0,g) equality outside 2%")
        .and(f_err <= 0.03, "(f,0) equality outside 3%"))
}

fn kernel_channels() -> Result<Check> {
    let opts = KernelChannelOptions::default();
    let mut worst = 0.0f64;
    let mut notes = Vec::new();
    for params in [derive_params(3, 2.0)?, derive_params(5, 4.0)?, derive_params(7, 0.0)?, derive_params(3, 12.0)?] {
        for j in 1..=params.ktilde1 {
            let e = params.alpha + 2.0 * j as f64 - 2.0;
            let rep = kernel_channel(&params, e, 1.0, &opts)?;
            let ratio = rep.e_plus.abs().max(rep.e_minus.abs()) / rep.input_energy;
            worst = worst.max(ratio);
            notes.push(format!("{} j={j} {ratio:.1e}", label(&params)));
        }
    }
    Ok(Check::at_most(worst, 1e-3, format!("E_inf / input: {}", notes.join(", "))))
}

/// Relative `Ḣ¹_a` distance to `W_a` over a run from `(W_a, 0)`.
fn stationarity_drift(params: &Params, dr: f64, t_final: f64) -> Result<Vec<(f64, f64)>> {
    let gs = GroundState::new(*params);
    let cfg = EvolveConfig { t_final, dr, r_max: 40.0, sponge_fraction: 0.0, snapshot_every: Some(0.5), ..Default::default() };
    let grid = cfg.grid(params.n)?;
    let w = RadialField::from_fn(&grid, |r| gs.w(r));
    let s0 = StatePair::new(w.clone(), RadialField::zeros(&grid))?;
    let scheme = Scheme::new(params, &grid, Mode::Nonlinear, 0.0, 0.0)?;
    let wn = scheme.h1a_sq(&w.values).sqrt();
    let tr = evolve(params, &s0, &cfg)?;
    Ok(tr
        .snapshots
        .iter()
        .map(|(t, s)| {
            let d: Vec<f64> = s.position.values.iter().zip(&w.values).map(|(a, b)| a - b).collect();
            (*t, scheme.h1a_sq(&d).sqrt() / wn)
        })
        .collect())
}

fn stationarity() -> Result<Check> {
    let mut worst = 0.0f64;
    let mut notes = Vec::new();
    let mut order_ok = true;
    for params in [derive_params(3, 0.0)?, derive_params(3, 2.0)?] {
        let coarse = stationarity_drift(&params, 0.05, 10.0)?;
        let fine = stationarity_drift(&params, 0.025, 10.0)?;
        let max_drift = fine.iter().map(|x| x.1).fold(0.0, f64::max);
        let escape = fine.iter().find(|x| x.1 > 1e-3).map(|x| x.0);
        // refinement order at t = 1, before the unstable mode dominates
        let at = |v: &[(f64, f64)], t: f64| v.iter().find(|x| (x.0 - t).abs() < 1e-9).map(|x| x.1).unwrap_or(f64::NAN);
        let order = (at(&coarse, 1.0) / at(&fine, 1.0)).log2();
        order_ok &= order >= 2.0;
        worst = worst.max(max_drift);
        notes.push(format!(
            "{} drift {:.1e} at dr 0.025, exceeds 1e-3 at t = {}, order at t=1 {:.2}",
            label(&params),
            max_drift,
            escape.map_or("never".into(), |t| format!("{t:.2}")),
            order
        ));
    }
    Ok(Check::at_most(worst, 1e-3, notes.join("; ")).and(order_ok, "refinement order below 2"))
}

fn interaction_exponents() -> Result<Check> {
    let mut worst = f64::INFINITY;
    let mut notes = Vec::new();
    for params in canonical()? {
        let gs = GroundState::new(params);
        let mut kinds = vec![InteractionKind::AlwAlw, InteractionKind::LwLw, InteractionKind::WnWn, InteractionKind::ConeLambda];
        if params.n >= 5 {
            kinds.push(InteractionKind::ConeMin);
        }
        for k in kinds {
            let slope = gs.fit_interaction_exponent(k)?;
            let m = slope - gs.bound_exponent(k);
            worst = worst.min(m);
            notes.push(format!("{} {} {slope:.3}/{:.3}", label(&params), k.label(), gs.bound_exponent(k)));
        }
    }
    Ok(Check::at_least(worst, -0.1, format!("slope/bound: {}", notes.join(", "))))
}

fn modulation_fit() -> Result<Check> {
    let mut recovery = 0.0f64;
    let mut lipschitz = 0.0f64;
    for params in [derive_params(3, 2.0)?, derive_params(5, 4.0)?] {
        let gs = GroundState::new(params);
        let grid = RadialGrid::log_spaced(params.n, 1e-5, 1e5, 6000)?;
        let norm = gs.constants()?.a_lambda_w_norm_sq.sqrt();
        for (lam, iota) in [(vec![2.0], vec![1.0]), (vec![1.0, 0.03], vec![1.0, -1.0]), (vec![1.0, 0.05, 0.002], vec![1.0, 1.0, -1.0])] {
            let f = multi_soliton(&gs, &grid, &lam, &iota);
            let mu0: Vec<f64> = lam.iter().enumerate().map(|(j, l)| l * if j % 2 == 0 { 0.9 } else { 1.08 }).collect();
            let rep = fit_scales(&gs, &f, &iota, &mu0, &FitOptions::default())?;
            for (a, b) in rep.lambda.iter().zip(&lam) {
                recovery = recovery.max((a / b - 1.0).abs());
            }
            // Lipschitz in the data: a unit bump scaled by ε
            let ops = Operators::new(&grid, &params)?;
            let bump = RadialField::from_fn(&grid, |r| (-(r - 2.0).powi(2)).exp());
            let bn = params.sphere_area().sqrt() * ops.norm_h1a(&bump, 0.0)?;
            let c = 1.5 / norm;
            for eps in [1e-3, 1e-2] {
                let fe = f.zip_with(&bump, |a, b| a + eps / bn * b)?;
                let fit = fit_scales(&gs, &fe, &iota, &lam, &FitOptions::default())?;
                for (a, b) in fit.lambda.iter().zip(&lam) {
                    lipschitz = lipschitz.max((a / b - 1.0).abs() / (c * eps));
                }
            }
        }
    }
    let detail = format!("planted scales recovered to {recovery:.1e}; max |lambda/mu - 1| / (C eps) = {lipschitz:.2} with C = 1.5/|A Lambda W|");
    Ok(Check::at_most(recovery, 1e-6, detail).and(lipschitz <= 1.0, "Lipschitz bound violated"))
}

fn ode_diagnostics() -> Result<Check> {
    let mut drift = 0.0f64;
    let mut symmetry = 0.0f64;
    let mut signs = true;
    let sigmas = [0.5, 1.0, 2.0, 10.0];
    for params in [derive_params(3, 2.0)?, derive_params(5, 4.0)?] {
        let sys = ModSystem::new(&GroundState::new(params))?;
        for iota in [vec![1.0, 1.0, 1.0], vec![1.0, -1.0, 1.0]] {
            let s0 = ModState::new(vec![1.0, 0.1, 0.01], vec![0.0, 0.01, -0.02], iota)?;
            let tr = simulate(&sys, &s0, &SimulateConfig { t_max: 1.0, gamma_ceiling: 0.95, ..Default::default() })?;
            drift = drift.max(tr.hamiltonian_drift());
        }
        let same = ModState::at_rest(vec![1.0, 0.05], vec![1.0, 1.0])?;
        let exit = exit_time(&sys, &same, 0.5, 1e4)?;
        drift = drift.max(exit.hamiltonian_drift);
        let (_, db) = sys.rhs(&same);
        signs &= db[0] < 0.0 && db[1] > 0.0 && exit.time.is_some();
        let opp = ModState::at_rest(vec![1.0, 0.05], vec![1.0, -1.0])?;
        let (_, db) = sys.rhs(&opp);
        let tr = simulate(&sys, &opp, &SimulateConfig { t_max: 0.1, ..Default::default() })?;
        signs &= db[0] > 0.0 && db[1] < 0.0 && tr.last().gamma() < opp.gamma();
        symmetry = symmetry.max(scaling_check(&sys, &same, &sigmas, 0.5, 1e4)?.max_deviation);
    }
    let detail = format!("H drift {drift:.1e}; exit time / lambda_1(0) spread {symmetry:.1e} over sigma in {{1/2,1,2,10}}");
    Ok(Check::at_most(drift, 1e-6, detail)
        .and(symmetry <= 1e-8, "exit times do not scale with lambda_1(0)")
        .and(signs, "attraction/repulsion signs wrong"))
}

fn radiation(cfg: &SuiteConfig) -> Result<Check> {
    let mut worst = 0.0f64;
    let mut notes = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let sets = [derive_params(3, 0.0)?, derive_params(3, 2.0)?, derive_params(5, 4.0)?];
    for params in sets {
        let grid: Arc<RadialGrid> = RadialGrid::uniform(params.n, 0.05, 800)?;
        let (f, g) = (Packets::random(&mut rng, 2, 3.0, 7.0), Packets::random(&mut rng, 2, 3.0, 7.0));
        let s = StatePair::from_fns(&grid, |x| f.value(x), |x| g.value(x));
        let support = crate::linprop::support_radius(&s, 1e-12);
        let t_large = ChannelOptions::default().schedule.iter().cloned().fold(0.0, f64::max) * support;
        let rad = radiation_field(&params, &s, t_large, 0.02)?;
        worst = worst.max(rad.relative_error);
        notes.push(format!("{} {:.1e} at t = {t_large:.0}", label(&params), rad.relative_error));
    }
    Ok(Check::at_most(worst, 0.02, format!("|G|^2 vs E/2: {}", notes.join(", "))))
}
