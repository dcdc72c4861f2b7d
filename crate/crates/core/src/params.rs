//! The constant pack attached to a dimension `N` and potential strength `a`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Derived constants for `-Δ + a/|x|²` in dimension `N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    #[serde(rename = "N")]
    pub n: usize,
    pub a: f64,
    pub beta: f64,
    pub nu: f64,
    pub c: f64,
    pub k: f64,
    pub alpha: f64,
    pub ktilde1: usize,
    pub ktilde2: usize,
    /// `(N-2)β` when it is an odd integer.
    pub p_odd: Option<i64>,
    /// `(N-2)β > 2`.
    pub p_gt_two: bool,
    /// `ΛW_a ∈ L²`, i.e. `(N-2)β ≥ 3`.
    pub lambda_w_l2: bool,
}

const INT_TOL: f64 = 1e-10;

/// Builds the constant pack. Pure: equal inputs give bit-identical output.
pub fn derive_params(n: usize, a: f64) -> Result<Params> {
    if n < 3 {
        return Err(Error::Params(format!("N = {n} < 3")));
    }
    if !a.is_finite() {
        return Err(Error::Params(format!("a = {a} is not finite")));
    }
    let m = (n - 2) as f64;
    let floor_a = -m * m / 4.0;
    if a <= floor_a {
        return Err(Error::Params(format!("a = {a} <= -(N-2)^2/4 = {floor_a}")));
    }
    let beta = (1.0 + 4.0 * a / (m * m)).sqrt();
    let p = m * beta;
    let p_round = p.round();
    let p_int = ((p - p_round).abs() <= INT_TOL * p.max(1.0)).then_some(p_round as i64);
    let p_odd = p_int.filter(|q| q % 2 != 0);
    // floors from the exact integer when available so rounding cannot shift them
    let (kt1, kt2) = match p_int {
        Some(q) => ((q + 2).div_euclid(4) as usize, (q + 4).div_euclid(4) as usize),
        None => (((p + 2.0) / 4.0).floor() as usize, ((p + 4.0) / 4.0).floor() as usize),
    };
    Ok(Params {
        n,
        a,
        beta,
        nu: p / 2.0,
        c: m * (1.0 - beta) / 2.0,
        k: (p + 1.0) / 2.0,
        alpha: -m * (1.0 + beta) / 2.0,
        ktilde1: kt1,
        ktilde2: kt2,
        p_odd,
        p_gt_two: p > 2.0,
        lambda_w_l2: p >= 3.0 - INT_TOL,
    })
}

/// Potential strength that makes `(N-2)β = p`.
pub fn a_for_p(n: usize, p: f64) -> f64 {
    let m = (n - 2) as f64;
    (p * p - m * m) / 4.0
}

impl Params {
    pub fn dim(&self) -> f64 {
        self.n as f64
    }

    /// `(N-2)β`.
    pub fn p(&self) -> f64 {
        (self.n - 2) as f64 * self.beta
    }

    /// `k` as an integer; only meaningful when `(N-2)β` is odd.
    pub fn k_int(&self) -> Option<usize> {
        self.p_odd.map(|q| ((q + 1) / 2) as usize)
    }

    /// The odd integer `(N-2)β`, or a parity error for the channel modules.
    pub fn require_odd(&self) -> Result<i64> {
        self.p_odd.ok_or(Error::Parity(self.p()))
    }

    /// Area of the unit sphere `S^{N-1}`.
    pub fn sphere_area(&self) -> f64 {
        let h = self.dim() / 2.0;
        2.0 * std::f64::consts::PI.powf(h) / puruspe::gamma(h)
    }

    /// Energy-critical exponent `2N/(N-2)`.
    pub fn critical_power(&self) -> f64 {
        2.0 * self.dim() / (self.dim() - 2.0)
    }
}
