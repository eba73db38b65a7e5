//! Truncated lattices, separation and density diagnostics, shell schedules and cells.

use crate::error::{Error, Result};
use crate::weight::{RhoTable, WeightProfile};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::Write;

/// Spacing of the critical square lattice √(π/2)(ℤ+iℤ).
pub const SQUARE_SCALE: f64 = 1.2533141373155001;
/// Points closer than this in the ρ-metric are treated as coincident.
pub const MIN_SEPARATION: f64 = 1e-6;
/// Width of the edge band, in units of the largest ρ on the lattice.
pub const GUARD_RHO_MULTIPLE: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatticeKind {
    Square,
    Explicit,
}

#[derive(Debug, Clone)]
pub struct Lattice {
    pub points: Vec<Complex64>,
    /// Integer coordinates (m, n) for square lattices.
    pub coords: Option<Vec<(i32, i32)>>,
    pub scale: f64,
    pub truncation_radius: f64,
    pub rho_values: Vec<f64>,
    pub kind: LatticeKind,
    pub delta_sep: f64,
    pub weight: WeightProfile,
    index: PointIndex,
}

impl Lattice {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn max_rho(&self) -> f64 {
        self.rho_values.iter().cloned().fold(0.0, f64::max)
    }

    /// Radius inside which edge effects are considered controlled.
    pub fn guard_radius(&self) -> f64 {
        self.truncation_radius - GUARD_RHO_MULTIPLE * self.max_rho()
    }

    /// Nearest lattice point in the Euclidean metric.
    pub fn nearest(&self, z: Complex64) -> (usize, f64) {
        self.index.nearest_weighted(&self.points, z, |_| 1.0)
    }

    /// Nearest lattice point in the surrogate metric |z−λ|/ρ(λ).
    pub fn nearest_rho(&self, z: Complex64) -> (usize, f64) {
        let rho = &self.rho_values;
        self.index.nearest_weighted(&self.points, z, |i| rho[i])
    }

    /// Indices with |λ| ≤ r, in lattice order.
    pub fn indices_within(&self, r: f64) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.points[i].norm() <= r * (1.0 + 1e-12)).collect()
    }
}

/// Uniform bucket grid for neighbour queries.
#[derive(Debug, Clone)]
struct PointIndex {
    origin: Complex64,
    cell: f64,
    nx: i64,
    ny: i64,
    buckets: Vec<Vec<usize>>,
    max_weight: f64,
}

impl PointIndex {
    fn new(points: &[Complex64], weights: &[f64]) -> Self {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in points {
            x0 = x0.min(p.re);
            x1 = x1.max(p.re);
            y0 = y0.min(p.im);
            y1 = y1.max(p.im);
        }
        let area = ((x1 - x0) * (y1 - y0)).max(1e-12);
        let cell = (area / points.len().max(1) as f64).sqrt().max(1e-9);
        let nx = (((x1 - x0) / cell) as i64 + 1).max(1);
        let ny = (((y1 - y0) / cell) as i64 + 1).max(1);
        let mut buckets = vec![Vec::new(); (nx * ny) as usize];
        for (i, p) in points.iter().enumerate() {
            let bx = (((p.re - x0) / cell) as i64).clamp(0, nx - 1);
            let by = (((p.im - y0) / cell) as i64).clamp(0, ny - 1);
            buckets[(by * nx + bx) as usize].push(i);
        }
        let max_weight = weights.iter().cloned().fold(0.0, f64::max);
        Self { origin: Complex64::new(x0, y0), cell, nx, ny, buckets, max_weight }
    }

    /// Argmin over points of |z−p_i|/weight(i), searched ring by ring.
    fn nearest_weighted<W: Fn(usize) -> f64>(&self, points: &[Complex64], z: Complex64, weight: W) -> (usize, f64) {
        let bx = ((z.re - self.origin.re) / self.cell).floor() as i64;
        let by = ((z.im - self.origin.im) / self.cell).floor() as i64;
        let wmax = if self.max_weight > 0.0 { self.max_weight.max(weight(0)) } else { 1.0 };
        let mut best = (usize::MAX, f64::INFINITY);
        let reach = self.nx.max(self.ny) + bx.abs().max(by.abs()) + 2;
        for k in 0..=reach {
            // Anything in ring k is at least (k−1)·cell away.
            if best.0 != usize::MAX && ((k - 1).max(0) as f64) * self.cell / wmax > best.1 {
                break;
            }
            for j in (by - k)..=(by + k) {
                if j < 0 || j >= self.ny {
                    continue;
                }
                let on_edge_row = j == by - k || j == by + k;
                let step = if on_edge_row || k == 0 { 1 } else { (2 * k) as usize };
                let mut i = bx - k;
                while i <= bx + k {
                    if i >= 0 && i < self.nx {
                        for &idx in &self.buckets[(j * self.nx + i) as usize] {
                            let d = (points[idx] - z).norm() / weight(idx);
                            if d < best.1 || (d == best.1 && idx < best.0) {
                                best = (idx, d);
                            }
                        }
                    }
                    i += step as i64;
                }
            }
        }
        best
    }
}

fn rho_for_points(points: &[Complex64], w: &WeightProfile) -> Result<Vec<f64>> {
    let mut cache: HashMap<u64, f64> = HashMap::new();
    points
        .iter()
        .map(|p| {
            let s = p.norm();
            if let Some(v) = cache.get(&s.to_bits()) {
                return Ok(*v);
            }
            let v = w.rho_radial(s)?;
            cache.insert(s.to_bits(), v);
            Ok(v)
        })
        .collect()
}

/// min over pairs of |λ−λ′|/max(ρ(λ), ρ(λ′)).
fn separation(points: &[Complex64], rho: &[f64]) -> f64 {
    let n = points.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| points[a].re.total_cmp(&points[b].re));
    let rmax = rho.iter().cloned().fold(0.0, f64::max);
    let mut best = f64::INFINITY;
    for a in 0..n {
        let i = order[a];
        for &j in &order[a + 1..] {
            let dx = points[j].re - points[i].re;
            // Pairs further apart in x cannot beat the current minimum.
            if dx / rmax > best {
                break;
            }
            let d = (points[j] - points[i]).norm() / rho[i].max(rho[j]);
            best = best.min(d);
        }
    }
    best
}

/// All points √(π/2)(m+in) with |point| ≤ R, origin first, then by shell and (m, n).
pub fn square_lattice(r: f64, w: &WeightProfile) -> Result<Lattice> {
    let s = SQUARE_SCALE;
    if !(r >= s) {
        return Err(Error::InvalidArgument(format!("square lattice needs R >= scale, got {r}")));
    }
    let k = (r / s).floor() as i32 + 1;
    let bound = (r / s) * (r / s) * (1.0 + 1e-12);
    let mut coords: Vec<(i32, i32)> = Vec::new();
    for m in -k..=k {
        for n in -k..=k {
            if ((m * m + n * n) as f64) <= bound {
                coords.push((m, n));
            }
        }
    }
    coords.sort_by_key(|&(m, n)| (m * m + n * n, m, n));
    let points: Vec<Complex64> = coords.iter().map(|&(m, n)| Complex64::new(s * m as f64, s * n as f64)).collect();
    let rho_values = rho_for_points(&points, w)?;
    let delta_sep = if points.len() > 1 { separation(&points, &rho_values) } else { f64::INFINITY };
    let index = PointIndex::new(&points, &rho_values);
    Ok(Lattice { points, coords: Some(coords), scale: s, truncation_radius: r, rho_values, kind: LatticeKind::Square, delta_sep, weight: *w, index })
}

/// Lattice from user points; the origin is moved to index 0, other points keep their order.
pub fn explicit_lattice(points: &[Complex64], w: &WeightProfile) -> Result<Lattice> {
    let origin = points.iter().position(|p| *p == Complex64::new(0.0, 0.0)).ok_or(Error::MissingOrigin)?;
    let mut seen = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        if !p.re.is_finite() || !p.im.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite point at index {i}")));
        }
        let key = ((p.re + 0.0).to_bits(), (p.im + 0.0).to_bits());
        if seen.insert(key, i).is_some() {
            return Err(Error::DuplicatePoint(i));
        }
    }
    let mut pts = Vec::with_capacity(points.len());
    pts.push(points[origin]);
    pts.extend(points.iter().enumerate().filter(|(i, _)| *i != origin).map(|(_, p)| *p));
    let rho_values = rho_for_points(&pts, w)?;
    let delta_sep = if pts.len() > 1 { separation(&pts, &rho_values) } else { f64::INFINITY };
    if delta_sep < MIN_SEPARATION {
        return Err(Error::Separation(delta_sep));
    }
    let truncation_radius = pts.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let scale = if pts.len() > 1 { delta_sep * rho_values[0] } else { 1.0 };
    let index = PointIndex::new(&pts, &rho_values);
    Ok(Lattice { points: pts, coords: None, scale, truncation_radius, rho_values, kind: LatticeKind::Explicit, delta_sep, weight: *w, index })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shell {
    pub radius: f64,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellSchedule {
    pub center: Complex64,
    pub shells: Vec<Shell>,
}

impl ShellSchedule {
    /// Schedule restricted to shells with radius ≤ `r`.
    pub fn truncated(&self, r: f64) -> ShellSchedule {
        let shells = self.shells.iter().take_while(|s| s.radius <= r * (1.0 + 1e-12)).cloned().collect();
        ShellSchedule { center: self.center, shells }
    }

    pub fn member_count(&self) -> usize {
        self.shells.iter().map(|s| s.members.len()).sum()
    }
}

/// Relative tolerance under which two distances count as the same shell.
pub const SHELL_TIE_TOL: f64 = 1e-12;

/// Groups all indices into shells of equal |λ − center|, ascending.
pub fn shells_for(l: &Lattice, center: Complex64) -> ShellSchedule {
    shells_for_indices(l, center, &(0..l.len()).collect::<Vec<_>>())
}

pub fn shells_for_indices(l: &Lattice, center: Complex64, indices: &[usize]) -> ShellSchedule {
    let mut keyed: Vec<(f64, usize)> = indices.iter().map(|&i| ((l.points[i] - center).norm(), i)).collect();
    // Exact integer keys for the square lattice about a lattice point avoid float ties.
    if let Some(coords) = &l.coords {
        let c = center / l.scale;
        if (c.re - c.re.round()).abs() < 1e-12 && (c.im - c.im.round()).abs() < 1e-12 {
            let (cm, cn) = (c.re.round() as i64, c.im.round() as i64);
            let mut ik: Vec<(i64, usize)> = indices
                .iter()
                .map(|&i| {
                    let (m, n) = coords[i];
                    let (dm, dn) = (m as i64 - cm, n as i64 - cn);
                    (dm * dm + dn * dn, i)
                })
                .collect();
            ik.sort();
            let mut shells: Vec<Shell> = Vec::new();
            let mut last = -1i64;
            for (k, i) in ik {
                if k != last {
                    shells.push(Shell { radius: l.scale * (k as f64).sqrt(), members: Vec::new() });
                    last = k;
                }
                shells.last_mut().unwrap().members.push(i);
            }
            return ShellSchedule { center, shells };
        }
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut shells: Vec<Shell> = Vec::new();
    for (d, i) in keyed {
        match shells.last_mut() {
            Some(s) if d <= s.radius * (1.0 + SHELL_TIE_TOL) + 1e-300 => s.members.push(i),
            _ => shells.push(Shell { radius: d, members: vec![i] }),
        }
    }
    ShellSchedule { center, shells }
}

/// (#points in the closed disc D(z, rρ(z)), μ of that disc).
pub fn density_at(l: &Lattice, w: &WeightProfile, z: Complex64, r: f64) -> Result<(usize, f64)> {
    let radius = r * w.rho(z)?;
    let count = l.points.iter().filter(|p| (**p - z).norm() <= radius * (1.0 + 1e-12)).count();
    Ok((count, w.mu_disc(z, radius)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub value: f64,
    pub argmax_center: [f64; 2],
    pub argmax_r: f64,
    pub centers_sampled: usize,
}

/// Limsup surrogate of #(Λ∩D(z,rρ(z)))/μ(D(z,rρ(z))) over a fixed centre grid.
pub fn upper_density(l: &Lattice, w: &WeightProfile, r_schedule: &[f64]) -> Result<f64> {
    Ok(upper_density_report(l, w, r_schedule)?.value)
}

pub fn upper_density_report(l: &Lattice, w: &WeightProfile, r_schedule: &[f64]) -> Result<DensityReport> {
    let r_max = r_schedule.iter().cloned().fold(0.0, f64::max);
    if r_schedule.is_empty() || !(r_max > 0.0) {
        return Err(Error::InvalidArgument("empty density schedule".into()));
    }
    if r_max > l.truncation_radius / 2.0 {
        return Err(Error::OutsideGuard(format!("schedule max {r_max} exceeds truncation_radius/2")));
    }
    let guard = l.guard_radius();
    // Centre grid depends only on the weight, so enlarging the lattice only adds centres.
    let h = 2.0 * w.rho_origin;
    let k = (l.truncation_radius / h).ceil() as i64;
    let mut sorted: Vec<Complex64> = l.points.clone();
    sorted.sort_by(|a, b| a.re.total_cmp(&b.re));
    let xs: Vec<f64> = sorted.iter().map(|p| p.re).collect();
    let table = RhoTable::new(w, l.truncation_radius * 1.5 + 1.0, 800)?;
    let mut best = DensityReport { value: 0.0, argmax_center: [0.0, 0.0], argmax_r: 0.0, centers_sampled: 0 };
    for &r in r_schedule.iter().filter(|r| **r >= 0.5 * r_max) {
        for i in -k..=k {
            for j in -k..=k {
                let z = Complex64::new(i as f64 * h, j as f64 * h);
                let rz = table.rho(z);
                let radius = r * rz;
                if z.norm() + radius > guard {
                    continue;
                }
                best.centers_sampled += 1;
                let lo = xs.partition_point(|x| *x < z.re - radius * (1.0 + 1e-12));
                let hi = xs.partition_point(|x| *x <= z.re + radius * (1.0 + 1e-12));
                let count = sorted[lo..hi].iter().filter(|p| (**p - z).norm() <= radius * (1.0 + 1e-12)).count();
                let mu = w.mu_disc(z, radius)?;
                let v = count as f64 / mu;
                if v > best.value {
                    best.value = v;
                    best.argmax_center = [z.re, z.im];
                    best.argmax_r = r;
                }
            }
        }
    }
    if best.centers_sampled == 0 {
        return Err(Error::OutsideGuard("no density centre fits inside the guard band".into()));
    }
    Ok(best)
}

/// Cell-centred rectangular grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn square(half_width: f64, n: usize) -> Self {
        Self { x_min: -half_width, x_max: half_width, y_min: -half_width, y_max: half_width, nx: n, ny: n }
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y_max - self.y_min) / self.ny as f64
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major point k.
    pub fn point(&self, k: usize) -> Complex64 {
        let (j, i) = (k / self.nx, k % self.nx);
        Complex64::new(self.x_min + (i as f64 + 0.5) * self.dx(), self.y_min + (j as f64 + 0.5) * self.dy())
    }

    pub fn points(&self) -> impl Iterator<Item = Complex64> + '_ {
        (0..self.len()).map(move |k| self.point(k))
    }

    pub fn max_abs(&self) -> f64 {
        let x = self.x_min.abs().max(self.x_max.abs());
        let y = self.y_min.abs().max(self.y_max.abs());
        x.hypot(y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellGeometry {
    pub grid: GridSpec,
    /// Lattice index per row-major grid point.
    pub cell_of: Vec<usize>,
    /// ∫_{Q_λ} dm/ρ² per lattice index (0 for cells the grid does not reach).
    pub cell_measure: Vec<f64>,
    /// Largest |z−λ|/ρ(λ) over assigned grid points.
    pub max_cell_radius: f64,
}

impl CellGeometry {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["x", "y", "cell_index"])?;
        for (k, c) in self.cell_of.iter().enumerate() {
            let z = self.grid.point(k);
            wtr.write_record([z.re.to_string(), z.im.to_string(), c.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn cell_geometry(l: &Lattice, grid: &GridSpec) -> Result<CellGeometry> {
    if grid.nx == 0 || grid.ny == 0 {
        return Err(Error::InvalidArgument("empty grid".into()));
    }
    let safe = l.truncation_radius - 2.0 * l.max_rho();
    if grid.max_abs() > safe {
        return Err(Error::OutsideGuard(format!("grid reaches |z| = {:.3} beyond {:.3}", grid.max_abs(), safe)));
    }
    let table = RhoTable::new(&l.weight, l.truncation_radius + 1.0, 800)?;
    let da = grid.dx() * grid.dy();
    let mut cell_of = Vec::with_capacity(grid.len());
    let mut cell_measure = vec![0.0; l.len()];
    let mut max_cell_radius: f64 = 0.0;
    for z in grid.points() {
        let (i, d) = l.nearest_rho(z);
        cell_of.push(i);
        let r = table.rho(z);
        cell_measure[i] += da / (r * r);
        max_cell_radius = max_cell_radius.max(d);
    }
    Ok(CellGeometry { grid: *grid, cell_of, cell_measure, max_cell_radius })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_point_block() {
        let l = square_lattice(1.5 * SQUARE_SCALE, &WeightProfile::classical()).unwrap();
        assert_eq!(l.len(), 9);
        assert_eq!(l.points[0], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn nearest_matches_brute_force() {
        let l = square_lattice(8.0, &WeightProfile::classical()).unwrap();
        for k in 0..200 {
            let z = Complex64::new((k as f64 * 0.731).sin() * 7.0, (k as f64 * 1.37).cos() * 7.0);
            let brute = (0..l.len()).map(|i| (l.points[i] - z).norm()).fold(f64::INFINITY, f64::min);
            assert!((l.nearest(z).1 - brute).abs() < 1e-14);
        }
    }
}
