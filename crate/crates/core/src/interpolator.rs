//! Reconstruction of an interpolating function from lattice values, with residual
//! checks and grid estimates of its weighted norm.

use crate::classifier::TraceData;
use crate::error::{Error, Result};
use crate::functions::SpaceFunction;
use crate::lattice::GridSpec;
use crate::multiplier::Multiplier;
use crate::numerics::sum::{ComplexSum, NeumaierSum};
use crate::transforms::{pv_sum_with, PvConfig, PvStatus, SequenceData, Transforms};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Queries closer than this many ρ to a lattice point use the deflated form.
pub const NEAR_LATTICE_RHO: f64 = 1e-3;
/// Queries closer than this many lattice scales return the stored value.
pub const ON_LATTICE_SCALE: f64 = 1e-8;
/// Offset, in units of ρ(λ), of the four samples averaged by [`verify_interpolation`].
pub const VERIFY_STEP: f64 = 1e-2;
/// Finite-difference step for f′(0), in units of ρ(0).
pub const W0_STEP: f64 = 1e-5;
/// Largest relative disagreement tolerated between the two difference quotients.
pub const W0_STABILITY: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpMode {
    FiniteP,
    Infinity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// f(z)e^{−φ(z)}.
    pub weighted: Complex64,
    pub status: PvStatus,
    pub growth_exponent: Option<f64>,
}

pub struct Interpolant<'a> {
    pub data: &'a TraceData,
    pub mode: InterpMode,
    pub w0: Option<Complex64>,
    /// True when w₀ was not supplied and 0 was used: the result is one member of f + Cg.
    pub w0_defaulted: bool,
    transforms: Transforms<'a>,
    d: SequenceData,
}

/// The finite-p interpolant g(z)·p.v.Σ d_λ/(z−λ); plain summation when p = 1.
pub fn reconstruct<'a>(data: &'a TraceData, cfg: PvConfig) -> Result<Interpolant<'a>> {
    check_evaluator(&data.multiplier)?;
    Ok(Interpolant {
        data,
        mode: InterpMode::FiniteP,
        w0: None,
        w0_defaulted: false,
        transforms: Transforms::new(&data.lattice, cfg)?,
        d: data.d(),
    })
}

/// The p = ∞ interpolant g(z)[w₀ + d₀/z + p.v.Σ_{λ≠0} d_λ(1/(z−λ) + 1/λ)].
pub fn reconstruct_inf<'a>(data: &'a TraceData, w0: Option<Complex64>, cfg: PvConfig) -> Result<Interpolant<'a>> {
    check_evaluator(&data.multiplier)?;
    if !data.p.is_infinite() {
        return Err(Error::InvalidArgument("reconstruct_inf needs p = inf data".into()));
    }
    Ok(Interpolant {
        data,
        mode: InterpMode::Infinity,
        w0: Some(w0.unwrap_or_default()),
        w0_defaulted: w0.is_none(),
        transforms: Transforms::new(&data.lattice, cfg)?,
        d: data.d(),
    })
}

fn check_evaluator(m: &Multiplier) -> Result<()> {
    if m.has_evaluator() {
        Ok(())
    } else {
        Err(Error::Table("reconstruction needs an evaluator for g off the lattice".into()))
    }
}

impl Interpolant<'_> {
    pub fn sequence(&self) -> &SequenceData {
        &self.d
    }

    /// Σ over the truncated lattice of the kernel at z, skipping `skip`.
    fn kernel_sum(&self, z: Complex64, skip: Option<usize>) -> (Complex64, PvStatus, Option<f64>) {
        let pts = &self.data.lattice.points;
        let d = &self.d.d;
        let zero = Complex64::new(0.0, 0.0);
        let inf = self.mode == InterpMode::Infinity;
        let term = |i: usize| -> Complex64 {
            if Some(i) == skip || d[i] == zero {
                return zero;
            }
            if inf {
                if i == 0 {
                    d[0] / z
                } else {
                    d[i] * ((z - pts[i]).inv() + pts[i].inv())
                }
            } else {
                d[i] / (z - pts[i])
            }
        };
        if self.data.p == 1.0 && !inf {
            let mut acc = ComplexSum::new();
            for &i in &self.transforms.active {
                acc += term(i);
            }
            return (acc.sum(), PvStatus::Converged, None);
        }
        let r = pv_sum_with(self.transforms.origin_schedule(), term, self.transforms.cfg.tolerance);
        (r.value, r.status, r.growth_exponent)
    }

    /// f(z)e^{−φ(z)} with p.v. diagnostics; errors if the p.v. sum diverges at z.
    pub fn evaluate(&self, z: Complex64) -> Result<Evaluation> {
        let l = &*self.data.lattice;
        let m = &*self.data.multiplier;
        let (k, dist) = l.nearest(z);
        if dist < ON_LATTICE_SCALE * l.scale {
            return Ok(Evaluation { weighted: self.data.c_weighted[k], status: PvStatus::Converged, growth_exponent: None });
        }
        let w0 = self.w0.unwrap_or_default();
        let phi = l.weight.phi(z);
        let near = dist < NEAR_LATTICE_RHO * l.rho_values[k];
        let (sum, status, growth_exponent) = self.kernel_sum(z, near.then_some(k));
        if status == PvStatus::Diverging {
            return Err(Error::Unstable(format!(
                "p.v. sum diverges at z = {z} (growth exponent {:?})",
                growth_exponent
            )));
        }
        let g_hat = m.g_weighted(z)?;
        let mut weighted = g_hat * (sum + if self.mode == InterpMode::Infinity { w0 } else { Complex64::new(0.0, 0.0) });
        if near {
            // g(z)/(z−λ_k) stays regular, so the singular term is handled in deflated form.
            weighted += (m.log_g_deflated(z, k)? - phi).exp() * self.d.d[k];
            if self.mode == InterpMode::Infinity && k != 0 {
                weighted += g_hat * self.d.d[k] / l.points[k];
            }
        }
        Ok(Evaluation { weighted, status, growth_exponent })
    }

    pub fn eval_weighted(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.evaluate(z)?.weighted)
    }

    /// f(z) itself; overflows for |z| beyond about 26 on the classical weight.
    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.eval_weighted(z)? * self.data.lattice.weight.phi(z).exp())
    }

    /// Lattice indices of the inner half of the truncation, where residuals are meaningful.
    pub fn guard_indices(&self) -> Vec<usize> {
        self.data.lattice.indices_within(0.5 * self.transforms.cfg.tail_r)
    }

    /// CSV rows x, y, Re f, Im f, |f|e^{−φ} over a grid.
    pub fn write_grid_csv<W: Write>(&self, grid: &GridSpec, out: W) -> Result<()> {
        let pts: Vec<Complex64> = grid.points().collect();
        let vals: Vec<Complex64> = pts.par_iter().map(|&z| self.eval_weighted(z)).collect::<Result<_>>()?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "re_f", "im_f", "weighted_abs"])?;
        for (z, v) in pts.iter().zip(&vals) {
            let f = v * self.data.lattice.weight.phi(*z).exp();
            w.write_record(&[z.re.to_string(), z.im.to_string(), f.re.to_string(), f.im.to_string(), v.norm().to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// w₀ = f′(0)/g′(0) − g″(0)/(2g′(0)), with f′(0) from Richardson-extrapolated central differences.
pub fn w0_from(f: &dyn SpaceFunction, m: &Multiplier) -> Result<Complex64> {
    let l = &*m.lattice;
    if l.points[0].norm() != 0.0 {
        return Err(Error::MissingOrigin);
    }
    let g2 = m
        .g_second_origin
        .ok_or_else(|| Error::Table("g''(0) was not supplied; pass w0 explicitly".into()))?;
    let h = W0_STEP * l.rho_values[0];
    let quotient = |h: f64| (f.eval(Complex64::new(h, 0.0)) - f.eval(Complex64::new(-h, 0.0))) / (2.0 * h);
    let (d1, d2) = (quotient(h), quotient(0.5 * h));
    let fp = (4.0 * d2 - d1) / 3.0;
    let spread = (d1 - d2).norm();
    if !(fp.re.is_finite() && fp.im.is_finite()) || spread > W0_STABILITY * fp.norm().max(1e-300) && spread > 1e-9 {
        return Err(Error::Unstable(format!("derivative estimate at 0 unstable (spread {spread:e})")));
    }
    let gp = m.g_prime(0);
    Ok(fp / gp - g2 / (2.0 * gp))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub max_residual: f64,
    pub argmax: Option<usize>,
    pub points_checked: usize,
}

/// Max over guard-band λ of |f(λ) − c_λ|e^{−φ(λ)}, with f(λ) taken as the average of f
/// at λ + hρ(λ)·i^k, k = 0..4 (exact up to O(h⁴) for analytic f).
pub fn verify_interpolation(interp: &Interpolant) -> Result<ResidualReport> {
    let l = &*interp.data.lattice;
    let idx = interp.guard_indices();
    let dirs = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(-1.0, 0.0), Complex64::new(0.0, -1.0)];
    let residuals: Vec<f64> = idx
        .par_iter()
        .map(|&i| -> Result<f64> {
            let lam = l.points[i];
            let phi_l = l.weight.phi(lam);
            let mut acc = ComplexSum::new();
            for dir in dirs {
                let z = lam + VERIFY_STEP * l.rho_values[i] * dir;
                acc += interp.eval_weighted(z)? * (l.weight.phi(z) - phi_l).exp();
            }
            Ok((acc.sum() / 4.0 - interp.data.c_weighted[i]).norm())
        })
        .collect::<Result<_>>()?;
    let (argmax, max_residual) = residuals
        .iter()
        .enumerate()
        .fold((None, 0.0), |(a, m), (k, &r)| if r > m { (Some(idx[k]), r) } else { (a, m) });
    Ok(ResidualReport { max_residual, argmax, points_checked: idx.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    #[serde(with = "crate::serde_p")]
    pub p: f64,
    /// ∫_{|z|≤R}|f|^p e^{−pφ} dm/ρ² by the midpoint rule, or the grid sup when p = ∞.
    pub value: f64,
    pub region_radius: f64,
    pub grid_spacing: f64,
    /// (lattice index, contribution) for each cell that meets the region.
    pub cell_contributions: Vec<(usize, f64)>,
    /// Relative change of the value under one halving of the spacing, when requested.
    pub refinement_change: Option<f64>,
}

/// Weighted norm of the interpolant over |z| ≤ region_radius; grid spacing is min ρ/grid_density.
pub fn weighted_norm(interp: &Interpolant, p: f64, region_radius: f64, grid_density: usize, refine: bool) -> Result<NormEstimate> {
    let l = &*interp.data.lattice;
    let limit = 0.5 * interp.transforms.cfg.tail_r;
    if !(region_radius > 0.0 && region_radius <= limit * (1.0 + 1e-12)) {
        return Err(Error::OutsideGuard(format!("region radius {region_radius} must lie in (0, {limit}]")));
    }
    if grid_density < 1 || !(p >= 1.0) {
        return Err(Error::InvalidArgument("grid density must be positive and p ≥ 1".into()));
    }
    let rho_min = l
        .indices_within(region_radius + l.max_rho())
        .iter()
        .map(|&i| l.rho_values[i])
        .fold(f64::INFINITY, f64::min);
    let h = rho_min / grid_density as f64;
    let (value, cells) = norm_on_grid(interp, p, region_radius, h)?;
    let refinement_change = if refine {
        let (fine, _) = norm_on_grid(interp, p, region_radius, 0.5 * h)?;
        Some(if value > 0.0 { (fine - value).abs() / value } else { fine.abs() })
    } else {
        None
    };
    Ok(NormEstimate { p, value, region_radius, grid_spacing: h, cell_contributions: cells, refinement_change })
}

fn norm_on_grid(interp: &Interpolant, p: f64, radius: f64, h: f64) -> Result<(f64, Vec<(usize, f64)>)> {
    let l = &*interp.data.lattice;
    let n = (2.0 * radius / h).ceil() as usize;
    let grid = GridSpec { x_min: -radius, x_max: radius, y_min: -radius, y_max: radius, nx: n, ny: n };
    let area = grid.dx() * grid.dy();
    let samples: Vec<(usize, f64)> = (0..grid.len())
        .into_par_iter()
        .filter_map(|k| {
            let z = grid.point(k);
            (z.norm() <= radius).then_some(k)
        })
        .map(|k| -> Result<(usize, f64)> {
            let z = grid.point(k);
            let (cell, _) = l.nearest(z);
            let v = interp.eval_weighted(z)?.norm();
            if p.is_infinite() {
                return Ok((cell, v));
            }
            let rho = l.weight.rho(z)?;
            Ok((cell, v.powf(p) * area / (rho * rho)))
        })
        .collect::<Result<_>>()?;
    let mut per_cell: std::collections::BTreeMap<usize, NeumaierSum> = Default::default();
    let mut sup: f64 = 0.0;
    for &(c, v) in &samples {
        if p.is_infinite() {
            sup = sup.max(v);
            let e = per_cell.entry(c).or_default();
            if v > e.sum() {
                *e = NeumaierSum::new();
                *e += v;
            }
        } else {
            *per_cell.entry(c).or_default() += v;
        }
    }
    let cells: Vec<(usize, f64)> = per_cell.into_iter().map(|(c, s)| (c, s.sum())).collect();
    let value = if p.is_infinite() {
        sup
    } else {
        let mut acc = NeumaierSum::new();
        for (_, v) in &cells {
            acc += *v;
        }
        acc.sum().powf(1.0 / p)
    };
    Ok((value, cells))
}
