//! Multipliers g: the builtin σ of the critical square lattice and user tables of g′(λ).

pub mod sigma;

use crate::error::{Error, Result};
use crate::lattice::{GridSpec, Lattice, LatticeKind};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sigma::{shared_sigma, SigmaLog, SquareSigma};
use std::sync::Arc;

/// Allowed relative gap between the deflated product and finite differences for σ′.
pub const SIGMA_PRIME_XCHECK: f64 = 1e-5;
/// Finite-difference step for σ′, in units of ρ(λ).
pub const FD_STEP_RHO: f64 = 1e-4;
/// Grid points closer than this to Λ are skipped by the bounds check.
pub const BOUNDS_EXCLUSION: f64 = 1e-6;

pub type LogFn = Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>;
pub type MagFn = Arc<dyn Fn(Complex64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiplierSource {
    BuiltinSigma,
    UserTable,
}

#[derive(Clone)]
pub struct Multiplier {
    pub lattice: Arc<Lattice>,
    pub source: MultiplierSource,
    log_g_prime: Vec<Complex64>,
    /// g″(0), when known.
    pub g_second_origin: Option<Complex64>,
    sigma: Option<Arc<SquareSigma>>,
    log_g_fn: Option<LogFn>,
    weighted_mag_fn: Option<MagFn>,
    /// min and max over Λ of |g′(λ)|e^{−φ(λ)}ρ(λ).
    pub derivative_bounds: (f64, f64),
}

impl std::fmt::Debug for Multiplier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Multiplier")
            .field("source", &self.source)
            .field("points", &self.lattice.len())
            .field("derivative_bounds", &self.derivative_bounds)
            .finish()
    }
}

fn require_square(l: &Lattice) -> Result<()> {
    if l.kind != LatticeKind::Square {
        return Err(Error::InvalidArgument("builtin sigma needs the square lattice".into()));
    }
    Ok(())
}

fn sigma_for(l: &Lattice, tail_r: f64) -> Result<Arc<SquareSigma>> {
    require_square(l)?;
    Ok(shared_sigma(l.scale, tail_r))
}

/// log σ(z) over |λ| ≤ tail_R, with the analytic completion reported separately.
pub fn sigma_log(l: &Lattice, z: Complex64, tail_r: f64) -> Result<SigmaLog> {
    let s = sigma_for(l, tail_r)?;
    let (_, d) = l.nearest(z);
    if d <= 1e-8 * l.scale {
        return Err(Error::OnLattice(z));
    }
    s.log_sigma(z, tail_r)
}

/// |σ(z)|e^{−|z|²}, exactly 0 on lattice points.
pub fn sigma_weighted_mag(l: &Lattice, z: Complex64, tail_r: f64) -> Result<f64> {
    let s = sigma_for(l, tail_r)?;
    let (_, z0) = s.reduce(z);
    if z0.norm() == 0.0 {
        return Ok(0.0);
    }
    Ok((s.log_sigma(z, tail_r)?.value().re - z.norm_sqr()).exp())
}

/// σ′(λ) as a logarithm: deflated product, cross-checked by Richardson-extrapolated
/// central differences.
pub fn sigma_prime_log(l: &Lattice, idx: usize, tail_r: f64) -> Result<Complex64> {
    let coords = l.coords.as_ref().ok_or_else(|| Error::InvalidArgument("builtin sigma needs the square lattice".into()))?;
    let lambda = l.points[idx];
    let h = FD_STEP_RHO * l.rho_values[idx];
    let fd_tail = tail_r.max(4.0 * (lambda.norm() + 2.0 * h));
    let s = sigma_for(l, fd_tail)?;
    let at = coords[idx];
    let l0 = s.log_sigma_deflated(lambda, at, tail_r)?;
    let ratio = |dz: Complex64| -> Result<Complex64> { Ok((s.log_sigma(lambda + dz, fd_tail)?.value() - l0).exp()) };
    let diff = |step: f64| -> Result<Complex64> {
        let e = Complex64::new(step, 0.0);
        Ok((ratio(e)? - ratio(-e)?) / (2.0 * step))
    };
    let richardson = (4.0 * diff(0.5 * h)? - diff(h)?) / 3.0;
    let rel = (richardson - 1.0).norm();
    if !(rel <= SIGMA_PRIME_XCHECK) {
        return Err(Error::DerivativeMismatch { index: idx, rel });
    }
    Ok(l0)
}

pub fn sigma_prime(l: &Lattice, idx: usize, tail_r: f64) -> Result<Complex64> {
    Ok(sigma_prime_log(l, idx, tail_r)?.exp())
}

impl Multiplier {
    /// σ of the critical square lattice; requires the classical weight.
    pub fn builtin_sigma(lattice: Arc<Lattice>) -> Result<Self> {
        require_square(&lattice)?;
        if !lattice.weight.is_classical() {
            return Err(Error::InvalidArgument("builtin sigma is associated with the classical weight only".into()));
        }
        let max_tail = SquareSigma::ladder_tail(lattice.truncation_radius + 1.0);
        let sigma = shared_sigma(lattice.scale, max_tail);
        let log_g_prime: Vec<Complex64> = (0..lattice.len())
            .into_par_iter()
            .map(|i| sigma_prime_log(&lattice, i, SquareSigma::ladder_tail(lattice.points[i].norm())))
            .collect::<Result<_>>()?;
        let mut m = Self {
            lattice,
            source: MultiplierSource::BuiltinSigma,
            log_g_prime,
            g_second_origin: Some(Complex64::new(0.0, 0.0)),
            sigma: Some(sigma),
            log_g_fn: None,
            weighted_mag_fn: None,
            derivative_bounds: (0.0, 0.0),
        };
        m.derivative_bounds = m.compute_derivative_bounds();
        Ok(m)
    }

    /// Wraps a table of g′(λ) values given as (index, value) pairs.
    pub fn user_table(lattice: Arc<Lattice>, table: &[(usize, Complex64)], weighted_mag: Option<MagFn>) -> Result<Self> {
        let logs: Vec<(usize, Complex64)> = table.iter().map(|&(i, v)| (i, v.ln())).collect();
        for &(i, v) in table {
            if v == Complex64::new(0.0, 0.0) || !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::Table(format!("entry {i} is zero or non-finite")));
            }
        }
        Self::user_table_log(lattice, &logs, weighted_mag)
    }

    /// Same as [`Multiplier::user_table`] with log g′(λ), for values beyond f64 range.
    pub fn user_table_log(lattice: Arc<Lattice>, table: &[(usize, Complex64)], weighted_mag: Option<MagFn>) -> Result<Self> {
        let n = lattice.len();
        let mut logs: Vec<Option<Complex64>> = vec![None; n];
        for &(i, v) in table {
            if i >= n {
                return Err(Error::Table(format!("index {i} outside lattice of {n} points")));
            }
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::Table(format!("entry {i} is zero or non-finite")));
            }
            logs[i] = Some(v);
        }
        let missing: Vec<usize> = logs.iter().enumerate().filter(|(_, v)| v.is_none()).map(|(i, _)| i).collect();
        if !missing.is_empty() {
            return Err(Error::Table(format!("missing {} indices (first {})", missing.len(), missing[0])));
        }
        let mut m = Self {
            lattice,
            source: MultiplierSource::UserTable,
            log_g_prime: logs.into_iter().map(|v| v.unwrap()).collect(),
            g_second_origin: None,
            sigma: None,
            log_g_fn: None,
            weighted_mag_fn: weighted_mag,
            derivative_bounds: (0.0, 0.0),
        };
        m.derivative_bounds = m.compute_derivative_bounds();
        Ok(m)
    }

    pub fn with_log_g(mut self, f: LogFn) -> Self {
        self.log_g_fn = Some(f);
        self
    }

    pub fn with_g_second_origin(mut self, v: Complex64) -> Self {
        self.g_second_origin = Some(v);
        self
    }

    fn compute_derivative_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for i in 0..self.lattice.len() {
            let v = self.g_prime_weighted(i).norm() * self.lattice.rho_values[i];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    pub fn has_evaluator(&self) -> bool {
        self.sigma.is_some() || self.log_g_fn.is_some()
    }

    pub fn log_g_prime(&self, i: usize) -> Complex64 {
        self.log_g_prime[i]
    }

    pub fn g_prime(&self, i: usize) -> Complex64 {
        self.log_g_prime[i].exp()
    }

    /// g′(λ)e^{−φ(λ)}.
    pub fn g_prime_weighted(&self, i: usize) -> Complex64 {
        (self.log_g_prime[i] - self.lattice.weight.phi(self.lattice.points[i])).exp()
    }

    pub fn log_g(&self, z: Complex64) -> Result<Complex64> {
        if let Some(s) = &self.sigma {
            return s.log_sigma_reduced(z);
        }
        match &self.log_g_fn {
            Some(f) => Ok(f(z)),
            None => Err(Error::Table("no evaluator for g supplied".into())),
        }
    }

    /// g(z)e^{−φ(z)}, exactly 0 on Λ.
    pub fn g_weighted(&self, z: Complex64) -> Result<Complex64> {
        if self.on_lattice(z) {
            return Ok(Complex64::new(0.0, 0.0));
        }
        Ok((self.log_g(z)? - self.lattice.weight.phi(z)).exp())
    }

    /// |g(z)|e^{−φ(z)}, exactly 0 on Λ.
    pub fn weighted_mag(&self, z: Complex64) -> Result<f64> {
        if self.on_lattice(z) {
            return Ok(0.0);
        }
        if self.sigma.is_none() {
            if let Some(f) = &self.weighted_mag_fn {
                return Ok(f(z));
            }
        }
        Ok((self.log_g(z)?.re - self.lattice.weight.phi(z)).exp())
    }

    fn on_lattice(&self, z: Complex64) -> bool {
        match &self.sigma {
            Some(s) => s.reduce(z).1.norm() == 0.0,
            None => self.lattice.nearest(z).1 == 0.0,
        }
    }

    /// log(g(z)/(z−λ_idx)), regular near λ_idx.
    pub fn log_g_deflated(&self, z: Complex64, idx: usize) -> Result<Complex64> {
        if let (Some(s), Some(coords)) = (&self.sigma, &self.lattice.coords) {
            let (c, z0) = s.reduce(z);
            if c == coords[idx] {
                return Ok(s.log_sigma_deflated_reduced(z)?.1);
            }
            if z0.norm() == 0.0 {
                return Err(Error::OnLattice(z));
            }
        }
        let dz = z - self.lattice.points[idx];
        if dz.norm() == 0.0 {
            return Ok(self.log_g_prime[idx]);
        }
        Ok(self.log_g(z)? - dz.ln())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub c_lower: f64,
    pub c_upper: f64,
    pub ratio: f64,
    pub points_used: usize,
}

/// Envelope of |g(z)|e^{−φ(z)}/min(1, dist(z,Λ)/ρ_near) over a grid.
pub fn multiplier_bounds_check(m: &Multiplier, grid: &GridSpec) -> Result<BoundsReport> {
    let l = &m.lattice;
    let vals: Vec<Option<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let z = grid.point(k);
            let (i, d) = l.nearest(z);
            if d < BOUNDS_EXCLUSION {
                return Ok(None);
            }
            let denom = (d / l.rho_values[i]).min(1.0);
            Ok(Some(m.weighted_mag(z)? / denom))
        })
        .collect::<Result<_>>()?;
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    let mut used = 0;
    for v in vals.into_iter().flatten() {
        lo = lo.min(v);
        hi = hi.max(v);
        used += 1;
    }
    Ok(BoundsReport { c_lower: lo, c_upper: hi, ratio: hi / lo, points_used: used })
}
