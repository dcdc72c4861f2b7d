//! Radial grids, quadrature against `r^{N-1} dr`, the operators `A`, `A*`,
//! `L_a = A*A`, and the norms built on them.

use std::io::{Read, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::params::Params;

/// How the nodes were laid out; decides the quadrature and interpolation rule.
#[derive(Clone, Debug, PartialEq)]
pub enum GridKind {
    /// `r_i = r_min e^{i h}`, trapezoid in `log r`.
    Log { h: f64 },
    /// `r_i = i Δr`, `i = 1..n`, trapezoid in `r` starting from the origin.
    Uniform { dr: f64 },
    /// Gauss-Legendre panels; weights exact for polynomials per panel.
    Panels,
    /// Arbitrary sorted nodes, trapezoid in `r`.
    Generic,
}

/// Sorted positive nodes with weights for `∫ · r^{N-1} dr`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialGrid {
    dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    kind: GridKind,
}

impl RadialGrid {
    /// Log-spaced nodes on `[r_min, r_max]`.
    pub fn log_spaced(dim: usize, r_min: f64, r_max: f64, n: usize) -> Result<Arc<Self>> {
        if !(r_min > 0.0 && r_max > r_min && n >= 4) {
            return Err(Error::Grid(format!("bad log grid [{r_min}, {r_max}] with {n} nodes")));
        }
        let h = (r_max / r_min).ln() / (n - 1) as f64;
        let nodes: Vec<f64> = (0..n).map(|i| r_min * (i as f64 * h).exp()).collect();
        let mut weights: Vec<f64> = nodes.iter().map(|&r| h * r.powi(dim as i32)).collect();
        weights[0] *= 0.5;
        weights[n - 1] *= 0.5;
        Ok(Arc::new(Self { dim, nodes, weights, kind: GridKind::Log { h } }))
    }

    /// Uniform nodes `Δr, 2Δr, …, nΔr`.
    pub fn uniform(dim: usize, dr: f64, n: usize) -> Result<Arc<Self>> {
        if !(dr > 0.0 && n >= 4) {
            return Err(Error::Grid(format!("bad uniform grid dr = {dr}, n = {n}")));
        }
        let nodes: Vec<f64> = (1..=n).map(|i| i as f64 * dr).collect();
        let mut weights: Vec<f64> = nodes.iter().map(|&r| dr * r.powi(dim as i32 - 1)).collect();
        weights[n - 1] *= 0.5;
        Ok(Arc::new(Self { dim, nodes, weights, kind: GridKind::Uniform { dr } }))
    }

    /// `panels` equal Gauss-Legendre panels of `order` points on `[a, b]`.
    pub fn gauss_panels(dim: usize, a: f64, b: f64, panels: usize, order: usize) -> Result<Arc<Self>> {
        if !(a >= 0.0 && b > a && panels > 0 && order > 0) {
            return Err(Error::Grid(format!("bad panel grid [{a}, {b}]")));
        }
        let (x, w) = gauss_legendre(order);
        let width = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * width;
            for (xi, wi) in x.iter().zip(&w) {
                let r = mid + 0.5 * width * xi;
                nodes.push(r);
                weights.push(0.5 * width * wi * r.powi(dim as i32 - 1));
            }
        }
        Ok(Arc::new(Self { dim, nodes, weights, kind: GridKind::Panels }))
    }

    /// Arbitrary nodes; detects uniform or log spacing so reloaded files keep
    /// their original quadrature.
    pub fn from_nodes(dim: usize, nodes: Vec<f64>) -> Result<Arc<Self>> {
        let n = nodes.len();
        if n < 4 || nodes[0] <= 0.0 || nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Grid("nodes must be positive, strictly increasing, at least 4".into()));
        }
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * y.abs();
        let dr = nodes[1] - nodes[0];
        if close(nodes[0], dr) && nodes.windows(2).all(|w| close(w[1] - w[0], dr)) {
            return Self::uniform(dim, dr, n);
        }
        let h = (nodes[1] / nodes[0]).ln();
        if nodes.windows(2).all(|w| close((w[1] / w[0]).ln(), h)) {
            return Self::log_spaced(dim, nodes[0], nodes[n - 1], n);
        }
        let mut weights = vec![0.0; n];
        for i in 0..n - 1 {
            let half = 0.5 * (nodes[i + 1] - nodes[i]);
            weights[i] += half * nodes[i].powi(dim as i32 - 1);
            weights[i + 1] += half * nodes[i + 1].powi(dim as i32 - 1);
        }
        Ok(Arc::new(Self { dim, nodes, weights, kind: GridKind::Generic }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn kind(&self) -> &GridKind {
        &self.kind
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn r_min(&self) -> f64 {
        self.nodes[0]
    }
    pub fn r_max(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }
    pub fn min_spacing(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Samples of a radial function on a shared grid.
#[derive(Clone, Debug)]
pub struct RadialField {
    pub grid: Arc<RadialGrid>,
    pub values: Vec<f64>,
}

impl RadialField {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Grid(format!("{} samples on a {}-node grid", values.len(), grid.len())));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: &Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self { grid: grid.clone(), values }
    }

    pub fn zeros(grid: &Arc<RadialGrid>) -> Self {
        Self { grid: grid.clone(), values: vec![0.0; grid.len()] }
    }

    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = self.grid.nodes().iter().zip(&self.values).map(|(&r, &v)| f(r, v)).collect();
        Self { grid: self.grid.clone(), values }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        same_grid(&self.grid, &other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(&x, &y)| f(x, y)).collect();
        Ok(Self { grid: self.grid.clone(), values })
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map(|_, v| s * v)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        out.write_record(["r", "value"])?;
        for (r, v) in self.grid.nodes().iter().zip(&self.values) {
            out.write_record([fmt17(*r), fmt17(*v)])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(dim: usize, rd: R) -> Result<Self> {
        let cols = read_columns(rd, &["r", "value"])?;
        let grid = RadialGrid::from_nodes(dim, cols[0].clone())?;
        Self::new(grid, cols[1].clone())
    }
}

pub(crate) fn same_grid(a: &Arc<RadialGrid>, b: &Arc<RadialGrid>) -> Result<()> {
    if Arc::ptr_eq(a, b) || a == b {
        Ok(())
    } else {
        Err(Error::Grid("fields live on different grids".into()))
    }
}

/// Position and velocity on one grid.
#[derive(Clone, Debug)]
pub struct StatePair {
    pub position: RadialField,
    pub velocity: RadialField,
}

impl StatePair {
    pub fn new(position: RadialField, velocity: RadialField) -> Result<Self> {
        same_grid(&position.grid, &velocity.grid)?;
        Ok(Self { position, velocity })
    }

    pub fn from_fns(grid: &Arc<RadialGrid>, f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64) -> Self {
        Self { position: RadialField::from_fn(grid, f), velocity: RadialField::from_fn(grid, g) }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.position.grid
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        out.write_record(["r", "u0", "u1"])?;
        for i in 0..self.grid().len() {
            out.write_record([
                fmt17(self.grid().nodes()[i]),
                fmt17(self.position.values[i]),
                fmt17(self.velocity.values[i]),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(dim: usize, rd: R) -> Result<Self> {
        let cols = read_columns(rd, &["r", "u0", "u1"])?;
        let grid = RadialGrid::from_nodes(dim, cols[0].clone())?;
        Ok(Self {
            position: RadialField::new(grid.clone(), cols[1].clone())?,
            velocity: RadialField::new(grid, cols[2].clone())?,
        })
    }
}

/// 17 significant digits, the pinned float format of every artifact.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn read_columns<R: Read>(rd: R, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::Reader::from_reader(rd);
    let got: Vec<String> = reader.headers()?.iter().map(|s| s.trim().to_string()).collect();
    if got != header {
        return Err(Error::Validation(format!("expected header {header:?}, found {got:?}")));
    }
    let mut cols = vec![Vec::new(); header.len()];
    for rec in reader.records() {
        let rec = rec?;
        for (j, col) in cols.iter_mut().enumerate() {
            let v: f64 = rec
                .get(j)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Validation(format!("unparsable field in row {:?}", rec)))?;
            col.push(v);
        }
    }
    Ok(cols)
}

/// Sparse first-derivative rows: three-point nonuniform stencils, centered in
/// the interior and one-sided at the two ends.
#[derive(Clone, Debug)]
pub struct Operators {
    grid: Arc<RadialGrid>,
    c: f64,
    /// `rows[i] = [(col, coef); 3]` for `(A f)_i`.
    rows: Vec<[(usize, f64); 3]>,
}

impl Operators {
    pub fn new(grid: &Arc<RadialGrid>, params: &Params) -> Result<Self> {
        if grid.dim() != params.n {
            return Err(Error::Grid(format!("grid dimension {} vs N = {}", grid.dim(), params.n)));
        }
        let x = grid.nodes();
        let n = x.len();
        let c = params.c;
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let (j0, w) = if i == 0 {
                let (h1, h2) = (x[1] - x[0], x[2] - x[1]);
                (0, [-(2.0 * h1 + h2) / (h1 * (h1 + h2)), (h1 + h2) / (h1 * h2), -h1 / (h2 * (h1 + h2))])
            } else if i == n - 1 {
                let (h1, h2) = (x[n - 2] - x[n - 3], x[n - 1] - x[n - 2]);
                (n - 3, [h2 / (h1 * (h1 + h2)), -(h1 + h2) / (h1 * h2), (h1 + 2.0 * h2) / (h2 * (h1 + h2))])
            } else {
                let (h1, h2) = (x[i] - x[i - 1], x[i + 1] - x[i]);
                (i - 1, [-h2 / (h1 * (h1 + h2)), (h2 - h1) / (h1 * h2), h1 / (h2 * (h1 + h2))])
            };
            let mut row = [(j0, w[0]), (j0 + 1, w[1]), (j0 + 2, w[2])];
            row[i - j0].1 += c / x[i];
            rows.push(row);
        }
        Ok(Self { grid: grid.clone(), c, rows })
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// `∂_r f + (c/r) f` by finite differences.
    pub fn apply_a(&self, f: &RadialField) -> Result<RadialField> {
        same_grid(&self.grid, &f.grid)?;
        let values = self.rows.iter().map(|row| row.iter().map(|&(j, w)| w * f.values[j]).sum()).collect();
        Ok(RadialField { grid: self.grid.clone(), values })
    }

    /// Exact adjoint of [`Self::apply_a`] in the weighted inner product:
    /// `A* = W⁻¹ Aᵀ W`, assembled by transposition.
    pub fn apply_astar(&self, g: &RadialField) -> Result<RadialField> {
        same_grid(&self.grid, &g.grid)?;
        let w = self.grid.weights();
        let mut acc = vec![0.0; w.len()];
        for (i, row) in self.rows.iter().enumerate() {
            let wg = w[i] * g.values[i];
            for &(j, coef) in row {
                acc[j] += coef * wg;
            }
        }
        for (a, wi) in acc.iter_mut().zip(w) {
            *a /= wi;
        }
        Ok(RadialField { grid: self.grid.clone(), values: acc })
    }

    pub fn apply_la(&self, f: &RadialField) -> Result<RadialField> {
        self.apply_astar(&self.apply_a(f)?)
    }

    /// `‖f‖_{Ḣ¹_a(r>R)} = ‖A f‖_{L²(r>R)}`, radial measure.
    pub fn norm_h1a(&self, f: &RadialField, r_from: f64) -> Result<f64> {
        let af = self.apply_a(f)?;
        Ok(integrate_sq(&af, r_from)?.sqrt())
    }

    /// `‖(f, g)‖² = ‖f‖²_{Ḣ¹_a} + ‖g‖²_{L²}` over `r > R`, square-rooted.
    pub fn pair_norm(&self, s: &StatePair, r_from: f64) -> Result<f64> {
        let a = self.norm_h1a(&s.position, r_from)?;
        let b = norm_l2(&s.velocity, r_from)?;
        Ok((a * a + b * b).sqrt())
    }

    /// `⟨A f, A g⟩` over `r > R`.
    pub fn inner_h1a(&self, f: &RadialField, g: &RadialField, r_from: f64) -> Result<f64> {
        let af = self.apply_a(f)?;
        let ag = self.apply_a(g)?;
        integrate(&af.zip_with(&ag, |x, y| x * y)?, r_from, self.grid.r_max())
    }
}

/// `∫_{from}^{to} f r^{N-1} dr` with partial end cells handled by linear
/// interpolation in the grid coordinate. Range is clipped to the grid span.
pub fn integrate(f: &RadialField, from: f64, to: f64) -> Result<f64> {
    integrate_values(&f.grid, &f.values, from, to)
}

pub(crate) fn integrate_values(grid: &RadialGrid, vals: &[f64], from: f64, to: f64) -> Result<f64> {
    if !(from < to) {
        return Err(Error::Grid(format!("empty range [{from}, {to}]")));
    }
    let x = grid.nodes();
    let n = x.len();
    let lo = from.max(if matches!(grid.kind(), GridKind::Uniform { .. }) { 0.0 } else { x[0] });
    let hi = to.min(x[n - 1]);
    if lo >= hi {
        return Err(Error::Grid(format!("range [{from}, {to}] misses the grid")));
    }
    let full_lo = lo <= x[0] || matches!(grid.kind(), GridKind::Uniform { .. }) && lo == 0.0;
    if full_lo && hi >= x[n - 1] {
        return Ok(vals.iter().zip(grid.weights()).map(|(v, w)| v * w).sum());
    }
    if let GridKind::Panels = grid.kind() {
        // restrict to whole nodes inside the range
        return Ok(x
            .iter()
            .zip(vals.iter().zip(grid.weights()))
            .filter(|(r, _)| **r >= lo && **r <= hi)
            .map(|(_, (v, w))| v * w)
            .sum());
    }
    let d = grid.dim() as i32;
    // integrand in the grid's native coordinate
    let (coord, dens): (Box<dyn Fn(f64) -> f64>, Box<dyn Fn(f64) -> f64>) = match grid.kind() {
        GridKind::Log { .. } => (Box::new(|r: f64| r.ln()), Box::new(move |r: f64| r.powi(d))),
        _ => (Box::new(|r: f64| r), Box::new(move |r: f64| r.powi(d - 1))),
    };
    let mut pts: Vec<(f64, f64)> = Vec::new();
    let value_at = |r: f64| -> f64 {
        // linear interpolation of the sampled field
        match x.binary_search_by(|p| p.partial_cmp(&r).unwrap()) {
            Ok(i) => vals[i],
            Err(0) => vals[0] * if r > 0.0 { 1.0 } else { 0.0 },
            Err(i) if i >= n => vals[n - 1],
            Err(i) => {
                let t = (coord(r) - coord(x[i - 1])) / (coord(x[i]) - coord(x[i - 1]));
                vals[i - 1] * (1.0 - t) + vals[i] * t
            }
        }
    };
    if lo > 0.0 {
        pts.push((coord(lo), value_at(lo) * dens(lo)));
    } else {
        pts.push((0.0, 0.0));
    }
    for (i, &r) in x.iter().enumerate() {
        if r > lo && r < hi {
            pts.push((coord(r), vals[i] * dens(r)));
        }
    }
    pts.push((coord(hi), value_at(hi) * dens(hi)));
    Ok(pts.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum())
}

/// `∫_R^∞ f² r^{N-1} dr` including a power-law tail beyond the last node.
pub fn integrate_sq(f: &RadialField, r_from: f64) -> Result<f64> {
    let sq = f.map(|_, v| v * v);
    let body = if r_from >= f.grid.r_max() { 0.0 } else { integrate(&sq, r_from, f.grid.r_max())? };
    Ok(body + power_tail(&sq)?)
}

pub fn norm_l2(f: &RadialField, r_from: f64) -> Result<f64> {
    Ok(integrate_sq(f, r_from)?.sqrt())
}

/// Tail `∫_{r_max}^∞ F r^{N-1} dr` for a field fitted as `C r^{-q}` from its
/// last nodes. Zero when the field vanishes there.
pub fn power_tail(f: &RadialField) -> Result<f64> {
    let x = f.grid.nodes();
    let n = x.len();
    let d = f.grid.dim() as f64;
    let (r1, r2) = (x[n - 4], x[n - 1]);
    let (v1, v2) = (f.values[n - 4], f.values[n - 1]);
    if v2 == 0.0 || v1 == 0.0 || v1.signum() != v2.signum() {
        return Ok(0.0);
    }
    let scale = f.sup_norm();
    if v2.abs() <= 1e-300 || v2.abs() < 1e-15 * scale * 1e-6 {
        return Ok(0.0);
    }
    let q = -(v2 / v1).ln() / (r2 / r1).ln();
    let exponent = d - 1.0 - q;
    if exponent >= -1.0 {
        // integrand does not decay fast enough; tiny values are treated as noise
        if (v2 * r2.powf(d)).abs() < 1e-14 * scale.max(1e-300) {
            return Ok(0.0);
        }
        return Err(Error::Tail { exponent });
    }
    Ok(-v2 * r2.powf(d) / (exponent + 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::derive_params;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(7);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert!((s - 2.0 / 13.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn zero_integrates_to_zero() {
        let g = RadialGrid::log_spaced(3, 1e-3, 1e2, 200).unwrap();
        assert_eq!(integrate(&RadialField::zeros(&g), 0.0, f64::INFINITY).unwrap(), 0.0);
    }

    #[test]
    fn gamma_three() {
        let g = RadialGrid::log_spaced(3, 1e-6, 80.0, 2000).unwrap();
        let f = RadialField::from_fn(&g, |r| (-r).exp());
        let v = integrate(&f, 0.0, f64::INFINITY).unwrap();
        assert!((v - 2.0).abs() < 1e-6, "{v}");
    }

    #[test]
    fn power_law_with_tail() {
        let g = RadialGrid::log_spaced(5, 1.0, 50.0, 3000).unwrap();
        let f = RadialField::from_fn(&g, |r| r.powi(-3));
        let v = integrate_sq(&f, 1.0).unwrap();
        assert!((v - 1.0).abs() < 1e-5, "{v}");
    }

    #[test]
    fn partial_ranges() {
        let g = RadialGrid::log_spaced(3, 1e-3, 10.0, 1500).unwrap();
        let f = RadialField::from_fn(&g, |_| 1.0);
        let v = integrate(&f, 0.5, 2.0).unwrap();
        assert!((v - (8.0 - 0.125) / 3.0).abs() < 1e-4, "{v}");
        assert!(integrate(&f, 20.0, 30.0).is_err());
        assert!(integrate(&f, 2.0, 1.0).is_err());
    }

    #[test]
    fn kernel_of_a() {
        let p = derive_params(3, 2.0).unwrap();
        let g = RadialGrid::log_spaced(3, 1e-2, 1e2, 400).unwrap();
        let ops = Operators::new(&g, &p).unwrap();
        let f = RadialField::from_fn(&g, |r| r.powf(-p.c));
        let af = ops.apply_a(&f).unwrap();
        // r^{-c} = r is reproduced exactly by second-order stencils
        assert!(af.sup_norm() < 1e-9, "{}", af.sup_norm());
    }

    #[test]
    fn harmonic_decay_exponent() {
        let p = derive_params(5, 4.0).unwrap();
        let g = RadialGrid::log_spaced(5, 1.0, 10.0, 800).unwrap();
        let ops = Operators::new(&g, &p).unwrap();
        let f = RadialField::from_fn(&g, |r| r.powf(p.alpha));
        let la = ops.apply_la(&f).unwrap();
        let scale = RadialField::from_fn(&g, |r| r.powf(p.alpha - 2.0));
        let worst = (3..g.len() - 3).map(|i| (la.values[i] / scale.values[i]).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-3, "{worst}");
    }

    #[test]
    fn la_is_second_order() {
        // f = e^{-r}: L_a f = (-1 + (N-1)/r + a/r²) e^{-r}
        let p = derive_params(3, 2.0).unwrap();
        let err = |n: usize| {
            let g = RadialGrid::log_spaced(3, 0.5, 8.0, n).unwrap();
            let ops = Operators::new(&g, &p).unwrap();
            let f = RadialField::from_fn(&g, |r| (-r).exp());
            let la = ops.apply_la(&f).unwrap();
            (0..n)
                .filter(|&i| (1.0..6.0).contains(&g.nodes()[i]))
                .map(|i| {
                    let r = g.nodes()[i];
                    (la.values[i] - (-1.0 + 2.0 / r + 2.0 / (r * r)) * (-r).exp()).abs()
                })
                .fold(0.0, f64::max)
        };
        let order = (err(201) / err(401)).log2();
        assert!(order > 1.9, "order {order}");
    }

    #[test]
    fn fd_norm_matches_direct_quadrature() {
        // N = 3, a = 2: A f = f' - f/r; f = r e^{-r} gives A f = -r e^{-r}
        let p = derive_params(3, 2.0).unwrap();
        let g = RadialGrid::log_spaced(3, 1e-3, 60.0, 4000).unwrap();
        let ops = Operators::new(&g, &p).unwrap();
        let f = RadialField::from_fn(&g, |r| r * (-r).exp());
        let v = ops.norm_h1a(&f, 0.0).unwrap().powi(2);
        // ∫ r² e^{-2r} r² dr = 4!/2^5
        assert!((v - 24.0 / 32.0).abs() < 1e-4, "{v}");
    }

    #[test]
    fn csv_round_trip() {
        let g = RadialGrid::log_spaced(3, 1e-2, 10.0, 50).unwrap();
        let s = StatePair::from_fns(&g, |r| (-r).exp(), |r| r.sin());
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"r,u0,u1\n"));
        let back = StatePair::read_csv(3, buf.as_slice()).unwrap();
        assert_eq!(back.grid().kind(), s.grid().kind());
        assert_eq!(back.position.values, s.position.values);
    }
}
