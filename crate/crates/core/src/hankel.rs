//! Bessel functions, the Hankel transform of order `ν` and the distorted
//! eigenfunctions of the operator linearized at the ground state.
//!
//! The transform kernel is `K(rρ) = (rρ)^{-(N-2)/2} J_ν(rρ)`, applied with
//! plain weighted sums on both sides.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::groundstate::GroundState;
use crate::params::Params;
use crate::radialgrid::{fmt17, power_tail, RadialField, RadialGrid};

/// Spherical Bessel function `j_n(z)` for real `z ≥ 0`.
///
/// Power series for `z ≤ 1`, upward recurrence when `z ≥ n` and Miller's
/// downward recurrence in between.
pub fn sph_bessel(n: usize, z: f64) -> f64 {
    let z = z.abs();
    if z <= 1.0 {
        return sph_series(n, z);
    }
    let j0 = z.sin() / z;
    if n == 0 {
        return j0;
    }
    let j1 = z.sin() / (z * z) - z.cos() / z;
    if n == 1 {
        return j1;
    }
    if z >= n as f64 {
        let (mut a, mut b) = (j0, j1);
        for m in 1..n {
            let c = (2 * m + 1) as f64 / z * b - a;
            a = b;
            b = c;
        }
        return b;
    }
    miller(n, z, j0, j1)
}

fn sph_series(n: usize, z: f64) -> f64 {
    // z^n / (2n+1)!! · Σ_k (-z²/2)^k / (k! (2n+3)(2n+5)…(2n+2k+1))
    let mut lead = 1.0;
    for m in 0..n {
        lead *= z / (2 * m + 3) as f64;
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..40 {
        term *= -z * z / (2.0 * k as f64 * (2 * n + 2 * k + 1) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    lead * sum
}

fn miller(n: usize, z: f64, j0: f64, j1: f64) -> f64 {
    let start = n + 20 + (10.0 * (n as f64).sqrt()) as usize;
    let (mut hi, mut cur) = (0.0f64, 1e-30f64);
    let mut want = 0.0;
    let mut at0 = 0.0;
    let mut at1 = 0.0;
    for m in (1..=start).rev() {
        // cur = j_m, hi = j_{m+1}; step to j_{m-1}
        let lo = (2 * m + 1) as f64 / z * cur - hi;
        hi = cur;
        cur = lo;
        if m - 1 == n {
            want = cur;
        }
        if m == 1 {
            at1 = hi;
            at0 = cur;
        }
        if cur.abs() > 1e250 {
            hi *= 1e-250;
            cur *= 1e-250;
            want *= 1e-250;
        }
    }
    if n == start {
        want = hi;
    }
    // normalize against whichever of j_0, j_1 is better conditioned
    if j0.abs() > j1.abs() {
        want * j0 / at0
    } else {
        want * j1 / at1
    }
}

/// `J_ν(z)` for half-integer `ν = n + 1/2`: `sqrt(2z/π) j_n(z)`.
pub fn bessel_halfint(nu: f64, z: f64) -> Result<f64> {
    let n = nu - 0.5;
    if n < 0.0 || (n - n.round()).abs() > 1e-12 {
        return Err(Error::Domain(format!("order {nu} is not a non-negative half-integer")));
    }
    Ok((2.0 * z / PI).sqrt() * sph_bessel(n.round() as usize, z))
}

/// `J_ν(z)` for `ν ≥ 0`, `z ≥ 0`.
pub fn bessel_j(nu: f64, z: f64) -> f64 {
    if z == 0.0 {
        return if nu == 0.0 { 1.0 } else { 0.0 };
    }
    if let Ok(v) = bessel_halfint(nu, z) {
        return v;
    }
    puruspe::besseljy(nu, z).0
}

/// Hankel kernel and its `A`-image for one parameter pack.
#[derive(Clone, Copy, Debug)]
pub struct Kernel {
    pub nu: f64,
    /// `(N-2)/2`.
    pub m: f64,
}

impl Kernel {
    pub fn new(params: &Params) -> Self {
        Self { nu: params.nu, m: (params.dim() - 2.0) / 2.0 }
    }

    /// `(rρ)^{-m} J_ν(rρ)`, with its `z → 0` limit.
    pub fn value(&self, z: f64) -> f64 {
        if z < 1e-8 {
            // J_ν(z) ≈ (z/2)^ν / Γ(ν+1)
            return (self.nu * (0.5 * z).ln() - puruspe::ln_gamma(self.nu + 1.0) - self.m * z.ln()).exp();
        }
        z.powf(-self.m) * bessel_j(self.nu, z)
    }

    /// `(∂_r + c/r) K(rρ) = -ρ (rρ)^{-m} J_{ν+1}(rρ)`; returns the factor
    /// multiplying `ρ`.
    pub fn a_factor(&self, z: f64) -> f64 {
        if z < 1e-8 {
            return -(((self.nu + 1.0) * (0.5 * z).ln() - puruspe::ln_gamma(self.nu + 2.0) - self.m * z.ln()).exp());
        }
        -z.powf(-self.m) * bessel_j(self.nu + 1.0, z)
    }

    /// `d/dz K(z)`.
    pub fn derivative(&self, z: f64) -> f64 {
        // d/dz [z^{-m} J_ν] = z^{-m}(J_ν' - m J_ν / z), J_ν' = (ν/z) J_ν - J_{ν+1}
        let j = bessel_j(self.nu, z);
        let j1 = bessel_j(self.nu + 1.0, z);
        z.powf(-self.m) * ((self.nu - self.m) / z * j - j1)
    }
}

/// Samples on frequency nodes with weights for `∫ · ρ^{N-1} dρ`.
#[derive(Clone, Debug)]
pub struct SpectralField {
    pub dim: usize,
    pub nodes: Arc<Vec<f64>>,
    pub weights: Arc<Vec<f64>>,
    pub values: Vec<f64>,
}

impl SpectralField {
    pub fn norm_l2(&self) -> f64 {
        self.values.iter().zip(self.weights.iter()).map(|(v, w)| v * v * w).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).zip(self.weights.iter()).map(|((a, b), w)| a * b * w).sum()
    }

    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = self.nodes.iter().zip(&self.values).map(|(&r, &v)| f(r, v)).collect();
        Self { values, ..self.clone() }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        wr.write_record(["rho", "value"])?;
        for (r, v) in self.nodes.iter().zip(&self.values) {
            wr.write_record([fmt17(*r), fmt17(*v)])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads `rho,value` rows; nodes must be uniformly spaced from `Δρ`.
    pub fn read_csv<R: Read>(dim: usize, rd: R) -> Result<Self> {
        let mut rr = csv::Reader::from_reader(rd);
        let mut nodes = Vec::new();
        let mut values = Vec::new();
        for rec in rr.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::Validation(format!("bad spectral row {rec:?}")))
            };
            nodes.push(parse(0)?);
            values.push(parse(1)?);
        }
        let grid = RadialGrid::from_nodes(dim, nodes)?;
        Ok(Self {
            dim,
            nodes: Arc::new(grid.nodes().to_vec()),
            weights: Arc::new(grid.weights().to_vec()),
            values,
        })
    }
}

/// Precomputed kernel matrix between a radial grid and a uniform frequency
/// grid `ρ_m = m Δρ`, `m = 1..M`.
#[derive(Clone, Debug)]
pub struct HankelPlan {
    pub params: Params,
    pub grid: Arc<RadialGrid>,
    pub rho: Arc<Vec<f64>>,
    pub rho_weights: Arc<Vec<f64>>,
    /// Row-major `[m][i]`: `K(r_i ρ_m)`.
    kernel: Vec<f64>,
}

impl HankelPlan {
    /// Builds the plan. The radial spacing must resolve the fastest kernel
    /// oscillation: `max Δr · ρ_max ≤ π/4`.
    pub fn new(params: &Params, grid: &Arc<RadialGrid>, rho_max: f64, n_rho: usize) -> Result<Self> {
        if grid.dim() != params.n {
            return Err(Error::Grid(format!("grid dimension {} vs N = {}", grid.dim(), params.n)));
        }
        if !(rho_max > 0.0) || n_rho < 2 {
            return Err(Error::Grid(format!("frequency grid needs rho_max > 0 and >= 2 nodes, got {rho_max}, {n_rho}")));
        }
        let x = grid.nodes();
        let dr = x.windows(2).map(|w| w[1] - w[0]).fold(x[0], f64::max);
        if dr * rho_max > PI / 4.0 + 1e-12 {
            return Err(Error::Grid(format!("sampling: max dr * rho_max = {} > pi/4", dr * rho_max)));
        }
        let drho = rho_max / n_rho as f64;
        let d = params.n as i32;
        let rho: Vec<f64> = (1..=n_rho).map(|m| m as f64 * drho).collect();
        let rho_weights: Vec<f64> = rho.iter().map(|r| drho * r.powi(d - 1)).collect();
        let ker = Kernel::new(params);
        let n = x.len();
        let kernel: Vec<f64> =
            rho.par_iter().flat_map_iter(|&q| x.iter().map(move |&r| ker.value(r * q)).collect::<Vec<_>>()).collect();
        debug_assert_eq!(kernel.len(), n * n_rho);
        Ok(Self { params: *params, grid: grid.clone(), rho: Arc::new(rho), rho_weights: Arc::new(rho_weights), kernel })
    }

    /// Default sampling for a uniform grid: `ρ_max = π/(4Δr)` and
    /// `Δρ ≤ π/r_max`.
    pub fn for_grid(params: &Params, grid: &Arc<RadialGrid>) -> Result<Self> {
        let x = grid.nodes();
        let dr = x.windows(2).map(|w| w[1] - w[0]).fold(x[0], f64::max);
        let rho_max = PI / (4.0 * dr);
        let n_rho = (rho_max * grid.r_max() / PI).ceil() as usize;
        Self::new(params, grid, rho_max, n_rho)
    }

    fn row(&self, m: usize) -> &[f64] {
        let n = self.grid.len();
        &self.kernel[m * n..(m + 1) * n]
    }

    /// `(H_ν f)(ρ) = ∫ K(rρ) f(r) r^{N-1} dr`.
    pub fn fwd(&self, f: &RadialField) -> Result<SpectralField> {
        if !Arc::ptr_eq(&f.grid, &self.grid) && f.grid.nodes() != self.grid.nodes() {
            return Err(Error::Grid("field is not on the plan's grid".into()));
        }
        // the transform needs an L² tail; this errors when it is missing
        power_tail(&f.map(|_, v| v * v))?;
        let fw: Vec<f64> = f.values.iter().zip(self.grid.weights()).map(|(v, w)| v * w).collect();
        let values =
            (0..self.rho.len()).into_par_iter().map(|m| self.row(m).iter().zip(&fw).map(|(k, v)| k * v).sum()).collect();
        Ok(SpectralField { dim: self.params.n, nodes: self.rho.clone(), weights: self.rho_weights.clone(), values })
    }

    /// Inverse transform back onto the plan's grid (same kernel).
    pub fn inv(&self, ft: &SpectralField) -> Result<RadialField> {
        if ft.values.len() != self.rho.len() {
            return Err(Error::Grid("spectral field does not match the plan".into()));
        }
        let gw: Vec<f64> = ft.values.iter().zip(self.rho_weights.iter()).map(|(v, w)| v * w).collect();
        let n = self.grid.len();
        let mut out = vec![0.0; n];
        for (m, g) in gw.iter().enumerate() {
            for (o, k) in out.iter_mut().zip(self.row(m)) {
                *o += k * g;
            }
        }
        RadialField::new(self.grid.clone(), out)
    }
}

/// `∫ K(rρ) φ(ρ) ρ^{N-1} dρ` at arbitrary radii, for a spectral field on any
/// node set.
pub fn synthesize(params: &Params, ft: &SpectralField, radii: &[f64]) -> Vec<f64> {
    let ker = Kernel::new(params);
    radii
        .par_iter()
        .map(|&r| ft.nodes.iter().zip(&ft.values).zip(ft.weights.iter()).map(|((q, v), w)| ker.value(r * q) * v * w).sum())
        .collect()
}

/// Result of the inward integration for one frequency.
#[derive(Clone, Debug)]
pub struct DistortedEigenfunction {
    pub rho: f64,
    pub field: RadialField,
    /// Radius below which the solution was cut off after blowing up; samples
    /// there are zero.
    pub truncated_below: Option<f64>,
}

/// Which potential the inward integration uses.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Potential {
    /// `-(N+2)/(N-2) W_(λ)^{4/(N-2)}` for the ground state at scale `λ`.
    GroundState { lambda: f64 },
    /// No potential: reproduces the free kernel.
    Free,
}

/// Solves `(L_a + V) f = ρ² f` inward from `r_max`, starting from the free
/// kernel and its derivative there.
pub fn distorted_eigenfunction(gs: &GroundState, rho: f64, grid: &Arc<RadialGrid>, pot: Potential) -> Result<DistortedEigenfunction> {
    if !(rho > 0.0) {
        return Err(Error::Domain(format!("rho = {rho} must be positive")));
    }
    let params = gs.params;
    let d = params.dim();
    let ker = Kernel::new(&params);
    let crit = 4.0 / (d - 2.0);
    let v = move |r: f64| match pot {
        Potential::Free => 0.0,
        Potential::GroundState { lambda } => {
            -(d + 2.0) / (d - 2.0) * (gs.ln_w(r / lambda) * crit - 2.0 * lambda.ln()).exp()
        }
    };
    // y = (f, f'), f'' = -(N-1)/r f' + (a/r² + V - ρ²) f
    let rhs = |r: f64, y: [f64; 2]| -> [f64; 2] {
        [y[1], -(d - 1.0) / r * y[1] + (params.a / (r * r) + v(r) - rho * rho) * y[0]]
    };
    let x = grid.nodes();
    let n = x.len();
    let mut vals = vec![0.0; n];
    let r_end = x[n - 1];
    let mut y = [ker.value(r_end * rho), rho * ker.derivative(r_end * rho)];
    vals[n - 1] = y[0];
    let scale = y[0].abs().max((r_end * rho).powf(-(d - 1.0) / 2.0));
    let mut truncated = None;
    for i in (0..n - 1).rev() {
        let (r0, r1) = (x[i + 1], x[i]);
        let span = r0 - r1;
        let hmax = (0.02 / rho).min(0.02 * r1);
        let steps = (span / hmax).ceil().max(1.0) as usize;
        let h = -span / steps as f64;
        let mut r = r0;
        for _ in 0..steps {
            let k1 = rhs(r, y);
            let k2 = rhs(r + 0.5 * h, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
            let k3 = rhs(r + 0.5 * h, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
            let k4 = rhs(r + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
            y[0] += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
            y[1] += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
            r += h;
        }
        if !y[0].is_finite() || y[0].abs() > 1e8 * scale {
            truncated = Some(x[i + 1]);
            break;
        }
        vals[i] = y[0];
    }
    Ok(DistortedEigenfunction { rho, field: RadialField::new(grid.clone(), vals)?, truncated_below: truncated })
}

/// Quadrature of `φ` against distorted eigenfunction samples, in the same
/// measure as the free transform. No inversion property is claimed.
pub fn distorted_transform(gs: &GroundState, f: &RadialField, rho: &[f64], pot: Potential) -> Result<Vec<f64>> {
    rho.par_iter()
        .map(|&q| {
            let e = distorted_eigenfunction(gs, q, &f.grid, pot)?;
            Ok(e.field.values.iter().zip(&f.values).zip(f.grid.weights()).map(|((a, b), w)| a * b * w).sum())
        })
        .collect()
}

/// Smooth test fields: sums of Gaussian packets away from the origin, with
/// exact derivatives so that `L_a f` is available in closed form.
#[derive(Clone, Debug, PartialEq)]
pub struct Packets {
    /// `(amplitude, center, width)`.
    pub terms: Vec<(f64, f64, f64)>,
}

impl Packets {
    /// Seeded random field with centers in `[lo, hi]`.
    pub fn random(rng: &mut impl rand::Rng, count: usize, lo: f64, hi: f64) -> Self {
        let terms = (0..count)
            .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(lo..hi), rng.gen_range(0.8..1.5)))
            .collect();
        Self { terms }
    }

    pub fn value(&self, r: f64) -> f64 {
        self.terms.iter().map(|&(a, c, s)| a * (-(r - c).powi(2) / (2.0 * s * s)).exp()).sum()
    }

    pub fn d1(&self, r: f64) -> f64 {
        self.terms.iter().map(|&(a, c, s)| -a * (r - c) / (s * s) * (-(r - c).powi(2) / (2.0 * s * s)).exp()).sum()
    }

    pub fn d2(&self, r: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(a, c, s)| a * ((r - c).powi(2) / s.powi(4) - 1.0 / (s * s)) * (-(r - c).powi(2) / (2.0 * s * s)).exp())
            .sum()
    }

    /// `L_a f = -f'' - (N-1)/r f' + a/r² f`.
    pub fn la(&self, params: &Params, r: f64) -> f64 {
        -self.d2(r) - (params.dim() - 1.0) / r * self.d1(r) + params.a / (r * r) * self.value(r)
    }

    /// `A f = f' + c/r f`.
    pub fn a(&self, params: &Params, r: f64) -> f64 {
        self.d1(r) + params.c / r * self.value(r)
    }
}

/// Relative errors of one transform check.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TransformCheck {
    pub isometry: f64,
    pub round_trip: f64,
    pub diagonalization: f64,
    pub self_adjoint: f64,
}

/// Isometry, self-inversion and diagonalization errors for a pair of
/// packet fields on the plan's grid.
pub fn check_transform(plan: &HankelPlan, f: &Packets, g: &Packets) -> Result<TransformCheck> {
    let params = plan.params;
    let fr = RadialField::from_fn(&plan.grid, |r| f.value(r));
    let ft = plan.fwd(&fr)?;
    let fl2 = crate::radialgrid::norm_l2(&fr, 0.0)?;
    let isometry = (ft.norm_l2() / fl2 - 1.0).abs();
    let back = plan.inv(&ft)?;
    let sup = fr.sup_norm();
    let round_trip = back.values.iter().zip(&fr.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / sup;
    let lf = RadialField::from_fn(&plan.grid, |r| f.la(&params, r));
    let lft = plan.fwd(&lf)?;
    let target = ft.map(|q, v| q * q * v);
    let diff: f64 = lft.values.iter().zip(&target.values).zip(ft.weights.iter()).map(|((a, b), w)| (a - b).powi(2) * w).sum();
    let diagonalization = diff.sqrt() / target.norm_l2();
    // ⟨H f, h⟩ = ⟨f, H h⟩ with h = H g
    let gr = RadialField::from_fn(&plan.grid, |r| g.value(r));
    let gt = plan.fwd(&gr)?;
    let hg = plan.inv(&gt)?;
    let lhs = ft.inner(&gt);
    let rhs: f64 = fr.values.iter().zip(&hg.values).zip(plan.grid.weights()).map(|((a, b), w)| a * b * w).sum();
    let self_adjoint = (lhs - rhs).abs() / (ft.norm_l2() * gt.norm_l2());
    Ok(TransformCheck { isometry, round_trip, diagonalization, self_adjoint })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::derive_params;
    use rand::SeedableRng;

    fn rayleigh(n: usize, z: f64) -> f64 {
        let (s, c) = (z.sin(), z.cos());
        match n {
            0 => s / z,
            1 => s / (z * z) - c / z,
            2 => (3.0 / (z * z) - 1.0) * s / z - 3.0 * c / (z * z),
            3 => (15.0 / z.powi(3) - 6.0 / z) * s / z - (15.0 / (z * z) - 1.0) * c / z,
            4 => (105.0 / z.powi(4) - 45.0 / (z * z) + 1.0) * s / z - (105.0 / z.powi(3) - 10.0 / z) * c / z,
            _ => unreachable!(),
        }
    }

    #[test]
    fn j0_limits() {
        assert_eq!(sph_bessel(0, 0.0), 1.0);
        assert_eq!(sph_bessel(3, 0.0), 0.0);
        assert!((sph_bessel(0, 2.0) - 2.0f64.sin() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn j1_at_pi() {
        assert!((sph_bessel(1, PI) - 1.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn recurrences_match_rayleigh() {
        for n in 0..=4 {
            for i in 0..=500 {
                let z = 0.1 + i as f64 * (49.9 / 500.0);
                let (a, b) = (sph_bessel(n, z), rayleigh(n, z));
                // the closed form itself cancels terms of size (2n+1)!!/z^{n+1}
                let dfact = [1.0, 3.0, 15.0, 105.0, 945.0][n];
                let tol = 1e-12 + 1e-15 * dfact / z.powi(n as i32 + 1);
                assert!((a - b).abs() <= tol, "n={n} z={z}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn large_order_matches_library() {
        for (n, z) in [(10usize, 3.0), (20, 5.0), (7, 40.0), (30, 0.5), (15, 12.0)] {
            let ours = bessel_halfint(n as f64 + 0.5, z).unwrap();
            let lib = puruspe::besseljy(n as f64 + 0.5, z).0;
            assert!((ours - lib).abs() <= 1e-10 * lib.abs().max(1e-300) + 1e-300, "n={n} z={z}: {ours} vs {lib}");
        }
    }

    #[test]
    fn large_argument_phase() {
        // j_{k-1}(z) - cos(z - σ)/z = O(z^{-2})
        let params = derive_params(3, 2.0).unwrap();
        let n = (params.k - 1.0).round() as usize;
        let sigma = (params.p() + 1.0) * PI / 4.0;
        for z in [100.0, 1000.0, 10000.0] {
            let e = (sph_bessel(n, z) - (z - sigma).cos() / z).abs();
            assert!(e * z * z < 2.0, "z={z} err={e}");
        }
    }

    #[test]
    fn general_order_continuous_across_half_integers() {
        let a = bessel_j(1.5, 2.0);
        let b = bessel_j(1.5 + 1e-9, 2.0);
        assert!((a - b).abs() < 1e-8);
    }

    fn plan(n: usize, a: f64) -> HankelPlan {
        let params = derive_params(n, a).unwrap();
        let grid = RadialGrid::uniform(n, 0.05, 800).unwrap();
        HankelPlan::for_grid(&params, &grid).unwrap()
    }

    #[test]
    fn transform_properties() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for (n, a) in [(3, 0.0), (3, 2.0), (5, 4.0), (4, 1.0)] {
            let p = plan(n, a);
            let f = Packets::random(&mut rng, 3, 6.0, 14.0);
            let g = Packets::random(&mut rng, 3, 6.0, 14.0);
            let c = check_transform(&p, &f, &g).unwrap();
            assert!(c.isometry < 1e-4, "{n},{a}: {c:?}");
            assert!(c.round_trip < 1e-3, "{n},{a}: {c:?}");
            assert!(c.diagonalization < 1e-2, "{n},{a}: {c:?}");
            assert!(c.self_adjoint < 1e-10, "{n},{a}: {c:?}");
        }
    }

    #[test]
    fn undersampled_grid_refused() {
        let params = derive_params(3, 0.0).unwrap();
        let grid = RadialGrid::uniform(3, 0.1, 100).unwrap();
        assert!(HankelPlan::new(&params, &grid, 10.0, 50).is_err());
    }

    #[test]
    fn a_factor_matches_derivative() {
        let params = derive_params(5, 4.0).unwrap();
        let k = Kernel::new(&params);
        for z in [0.3, 1.0, 4.0, 17.0] {
            // A K(rρ)/ρ at ρ = 1: K'(z) + c/z K(z)
            let lhs = k.derivative(z) + params.c / z * k.value(z);
            assert!((lhs - k.a_factor(z)).abs() < 1e-12, "{z}");
        }
    }

    #[test]
    fn free_potential_reproduces_kernel() {
        let params = derive_params(3, 2.0).unwrap();
        let gs = GroundState::new(params);
        let grid = RadialGrid::uniform(3, 0.05, 600).unwrap();
        let e = distorted_eigenfunction(&gs, 2.0, &grid, Potential::Free).unwrap();
        let k = Kernel::new(&params);
        // inward integration amplifies round-off along the singular branch,
        // so compare away from the origin
        for (r, v) in grid.nodes().iter().zip(&e.field.values).step_by(37).filter(|(r, _)| **r >= 1.0) {
            assert!((v - k.value(r * 2.0)).abs() < 1e-7, "r={r}: {v} vs {}", k.value(r * 2.0));
        }
    }

    #[test]
    fn distorted_residual_decays() {
        let params = derive_params(3, 2.0).unwrap();
        let gs = GroundState::new(params);
        let grid = RadialGrid::uniform(3, 0.02, 5000).unwrap();
        let rho = 1.5;
        let e = distorted_eigenfunction(&gs, rho, &grid, Potential::GroundState { lambda: 1.0 }).unwrap();
        let k = Kernel::new(&params);
        // envelope of the residual over windows of one period
        let env = |r0: f64| {
            grid.nodes()
                .iter()
                .zip(&e.field.values)
                .filter(|(r, _)| **r >= r0 && **r < r0 + 2.0 * PI / rho)
                .map(|(r, v)| (v - k.value(r * rho)).abs())
                .fold(0.0, f64::max)
        };
        let (r1, r2) = (5.0, 40.0);
        let slope = (env(r2) / env(r1)).ln() / (r2 / r1).ln();
        assert!(slope <= -(params.dim() + 1.0) / 2.0 + 0.05, "slope {slope}");
    }

    #[test]
    fn distorted_scale_covariance() {
        let params = derive_params(3, 2.0).unwrap();
        let gs = GroundState::new(params);
        let lam = 2.0;
        let g1 = RadialGrid::uniform(3, 0.02, 1500).unwrap();
        let g2 = RadialGrid::uniform(3, 0.04, 1500).unwrap();
        let a = distorted_eigenfunction(&gs, 1.0, &g1, Potential::GroundState { lambda: 1.0 }).unwrap();
        let b = distorted_eigenfunction(&gs, 1.0 / lam, &g2, Potential::GroundState { lambda: lam }).unwrap();
        for i in (25..1500).step_by(25) {
            let (x, y) = (a.field.values[i], b.field.values[i]);
            assert!((x - y).abs() < 1e-6, "i={i}: {x} vs {y}");
        }
        // a fixed potential breaks the symmetry
        let c = distorted_eigenfunction(&gs, 1.0 / lam, &g2, Potential::GroundState { lambda: 1.0 }).unwrap();
        let gap = (25..1500).map(|i| (a.field.values[i] - c.field.values[i]).abs()).fold(0.0, f64::max);
        assert!(gap > 1e-3);
    }
}
