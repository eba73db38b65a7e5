//! Principal-value lattice sums and the discrete Cauchy, Beurling–Ahlfors,
//! higher-order and modified transforms.

pub mod opnorm;
pub mod probe;

use crate::error::{Error, Result};
use crate::lattice::{shells_for_indices, Lattice, ShellSchedule};
use crate::numerics::fit::loglog_fit;
use crate::numerics::sum::{ComplexSum, NeumaierSum};
use crate::numerics::trajectory::{assess, Verdict};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::borrow::Cow;
use std::collections::HashMap;
use std::sync::Mutex;

/// Default p.v. tolerance, relative to the scale of the partial sums.
pub const PV_TOLERANCE: f64 = 1e-9;
/// Number of trailing partials used by the Cauchy criterion.
pub const CAUCHY_WINDOW: usize = 5;
/// Smallest log-log slope of |partial| reported as divergence.
pub const MIN_DIVERGENCE_SLOPE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PvCenterMode {
    #[default]
    Origin,
    Center,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PvConfig {
    pub tail_r: f64,
    pub tolerance: f64,
    pub center_mode: PvCenterMode,
}

impl PvConfig {
    pub fn new(tail_r: f64) -> Self {
        Self { tail_r, tolerance: PV_TOLERANCE, center_mode: PvCenterMode::Origin }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PvStatus {
    Converged,
    Diverging,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvResult {
    pub value: Complex64,
    pub shell_partials: Vec<Complex64>,
    pub shell_radii: Vec<f64>,
    pub converged: bool,
    pub cauchy_tail: f64,
    pub shells_used: usize,
    pub status: PvStatus,
    pub growth_exponent: Option<f64>,
    /// Σ|term| over the whole schedule.
    pub abs_sum: f64,
    /// Whether the running Σ|term| flattens.
    pub absolutely_convergent: bool,
}

/// Shell-ordered compensated summation with convergence diagnostics.
pub fn pv_sum<F: Fn(usize) -> Complex64>(schedule: &ShellSchedule, term: F) -> PvResult {
    pv_sum_with(schedule, term, PV_TOLERANCE)
}

pub fn pv_sum_with<F: Fn(usize) -> Complex64>(schedule: &ShellSchedule, term: F, tolerance: f64) -> PvResult {
    let mut acc = ComplexSum::new();
    let mut abs_acc = NeumaierSum::new();
    let mut partials = Vec::with_capacity(schedule.shells.len());
    let mut radii = Vec::with_capacity(schedule.shells.len());
    let mut abs_traj = Vec::with_capacity(schedule.shells.len());
    let mut scale: f64 = 0.0;
    for shell in &schedule.shells {
        let mut shell_sum = ComplexSum::new();
        let mut shell_abs = 0.0;
        for &i in &shell.members {
            let t = term(i);
            shell_sum += t;
            shell_abs += t.norm();
        }
        acc += shell_sum.sum();
        abs_acc += shell_abs;
        let p = acc.sum();
        scale = scale.max(p.norm()).max(shell_abs);
        partials.push(p);
        radii.push(shell.radius);
        abs_traj.push((shell.radius, abs_acc.sum()));
    }
    let n = partials.len();
    let window = &partials[n.saturating_sub(CAUCHY_WINDOW)..];
    let mut cauchy_tail: f64 = 0.0;
    for a in window {
        for b in window {
            cauchy_tail = cauchy_tail.max((a - b).norm());
        }
    }
    let converged = cauchy_tail <= tolerance * scale;
    let (status, growth_exponent) = if converged {
        (PvStatus::Converged, None)
    } else {
        let r_max = radii.last().cloned().unwrap_or(0.0);
        let (xs, ys): (Vec<f64>, Vec<f64>) = radii
            .iter()
            .zip(&partials)
            .filter(|(r, _)| **r >= 0.5 * r_max && **r > 0.0)
            .map(|(r, p)| (*r, p.norm()))
            .unzip();
        match loglog_fit(&xs, &ys) {
            Some(f) if f.slope > MIN_DIVERGENCE_SLOPE && f.r_squared >= 0.9 => (PvStatus::Diverging, Some(f.slope)),
            Some(f) => (PvStatus::Undetermined, Some(f.slope)),
            None => (PvStatus::Undetermined, None),
        }
    };
    let absolutely_convergent = assess(&abs_traj).verdict == Verdict::Bounded;
    PvResult {
        value: partials.last().cloned().unwrap_or_default(),
        shell_partials: partials,
        shell_radii: radii,
        converged,
        cauchy_tail,
        shells_used: n,
        status,
        growth_exponent,
        abs_sum: abs_acc.sum(),
        absolutely_convergent,
    }
}

/// Values d_λ on lattice indices, with cached weighted norms.
#[derive(Debug, Default)]
pub struct SequenceData {
    pub d: Vec<Complex64>,
    norm_cache: Mutex<HashMap<u64, f64>>,
}

impl Clone for SequenceData {
    fn clone(&self) -> Self {
        Self::new(self.d.clone())
    }
}

impl SequenceData {
    pub fn new(d: Vec<Complex64>) -> Self {
        Self { d, norm_cache: Mutex::new(HashMap::new()) }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![Complex64::new(0.0, 0.0); n])
    }

    /// ‖d‖ in ℓ^p(ρ^{−1}), i.e. the ℓ^p norm of d_λ/ρ(λ); p may be infinite.
    pub fn weighted_norm(&self, p: f64, rho: &[f64]) -> f64 {
        if let Some(v) = self.norm_cache.lock().unwrap().get(&p.to_bits()) {
            return *v;
        }
        let v = if p.is_infinite() {
            self.d.iter().zip(rho).map(|(d, r)| d.norm() / r).fold(0.0, f64::max)
        } else {
            let mut acc = NeumaierSum::new();
            for (d, r) in self.d.iter().zip(rho) {
                acc += (d.norm() / r).powf(p);
            }
            acc.sum().powf(1.0 / p)
        };
        self.norm_cache.lock().unwrap().insert(p.to_bits(), v);
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "n")]
pub enum PotentialMode {
    L,
    M(usize),
}

/// Lattice plus the cached origin-centred shell schedule of the points with |λ| ≤ tail_R.
#[derive(Debug, Clone)]
pub struct Transforms<'a> {
    pub lattice: &'a Lattice,
    pub cfg: PvConfig,
    pub active: Vec<usize>,
    origin: ShellSchedule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kernel {
    Cauchy,
    Ba,
    Higher(u32),
    ModifiedInf,
}

impl<'a> Transforms<'a> {
    pub fn new(lattice: &'a Lattice, cfg: PvConfig) -> Result<Self> {
        if !(cfg.tail_r > 0.0) || cfg.tail_r > lattice.truncation_radius * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "tail radius {} must lie in (0, truncation radius {}]",
                cfg.tail_r, lattice.truncation_radius
            )));
        }
        let active = lattice.indices_within(cfg.tail_r);
        let origin = shells_for_indices(lattice, Complex64::new(0.0, 0.0), &active);
        Ok(Self { lattice, cfg, active, origin })
    }

    pub fn origin_schedule(&self) -> &ShellSchedule {
        &self.origin
    }

    fn schedule(&self, lp: usize) -> Cow<'_, ShellSchedule> {
        match self.cfg.center_mode {
            PvCenterMode::Origin => Cow::Borrowed(&self.origin),
            PvCenterMode::Center => Cow::Owned(shells_for_indices(self.lattice, self.lattice.points[lp], &self.active)),
        }
    }

    fn term(&self, kernel: Kernel, d: &[Complex64], lp: usize, i: usize) -> Complex64 {
        let zero = Complex64::new(0.0, 0.0);
        if i == lp || d[i] == zero && !(kernel == Kernel::ModifiedInf && i == 0) {
            return zero;
        }
        let a = self.lattice.points[i] - self.lattice.points[lp];
        match kernel {
            Kernel::Cauchy => d[i] / a,
            Kernel::Ba => d[i] / (a * a),
            Kernel::Higher(n) => d[i] / a.powu(n),
            Kernel::ModifiedInf => {
                if i == 0 {
                    -d[0] / self.lattice.points[lp]
                } else {
                    d[i] * (a.inv() - self.lattice.points[i].inv())
                }
            }
        }
    }

    fn run(&self, kernel: Kernel, d: &SequenceData, lp: usize) -> PvResult {
        let sched = self.schedule(lp);
        pv_sum_with(&sched, |i| self.term(kernel, &d.d, lp, i), self.cfg.tolerance)
    }

    /// p.v. Σ_{λ≠λ′} d_λ/(λ−λ′).
    pub fn cauchy(&self, d: &SequenceData, lp: usize) -> PvResult {
        self.run(Kernel::Cauchy, d, lp)
    }

    /// p.v. Σ_{λ≠λ′} d_λ/(λ′−λ)².
    pub fn ba(&self, d: &SequenceData, lp: usize) -> PvResult {
        self.run(Kernel::Ba, d, lp)
    }

    /// p.v. Σ_{λ≠λ′} d_λ/(λ−λ′)^n.
    pub fn higher(&self, d: &SequenceData, lp: usize, n: usize, n_max: usize) -> Result<PvResult> {
        if n < 1 || n > n_max {
            return Err(Error::InvalidArgument(format!("order {n} outside 1..={n_max}")));
        }
        Ok(self.run(Kernel::Higher(n as u32), d, lp))
    }

    /// −d₀/λ′ + p.v. Σ_{λ∉{0,λ′}} d_λ(1/(λ−λ′) − 1/λ).
    pub fn modified_cauchy_inf(&self, d: &SequenceData, lp: usize) -> Result<PvResult> {
        if lp == 0 {
            return Err(Error::InvalidArgument("modified transform needs lambda' != 0".into()));
        }
        Ok(self.run(Kernel::ModifiedInf, d, lp))
    }

    /// Plain compensated sum of a kernel over the active indices, in index order.
    pub fn dense(&self, kernel_n: usize, d: &SequenceData, lp: usize) -> Complex64 {
        let kernel = match kernel_n {
            0 => Kernel::ModifiedInf,
            1 => Kernel::Cauchy,
            n => Kernel::Higher(n as u32),
        };
        let mut acc = ComplexSum::new();
        for &i in &self.active {
            acc += self.term(kernel, &d.d, lp, i);
        }
        acc.sum()
    }

    /// Positive-kernel potentials L_{λ′}(d̃) and M_{λ′}(d̃) by dense summation.
    /// M(N) needs N > 1/t for the supplied effective doubling exponent.
    pub fn potential(&self, dtilde: &[f64], mode: PotentialMode, lp: usize, t_eff: f64) -> Result<f64> {
        let rho = &self.lattice.rho_values;
        let pts = &self.lattice.points;
        if let PotentialMode::M(n) = mode {
            if !(n as f64 > 1.0 / t_eff) {
                return Err(Error::InvalidArgument(format!("M({n}) needs N > 1/t = {:.4}", 1.0 / t_eff)));
            }
        }
        let mut acc = NeumaierSum::new();
        for &i in &self.active {
            if i == lp || dtilde[i] == 0.0 {
                continue;
            }
            let r = (pts[i] - pts[lp]).norm();
            acc += dtilde[i] * match mode {
                PotentialMode::L => rho[i] * rho[lp] * rho[lp] / (r * r * r),
                PotentialMode::M(n) => rho[i] * rho[lp].powi(n as i32) / r.powi(n as i32 + 1),
            };
        }
        Ok(acc.sum())
    }

    /// Cauchy transforms at several centres, in input order.
    pub fn cauchy_batch(&self, d: &SequenceData, lps: &[usize]) -> Vec<PvResult> {
        lps.par_iter().map(|&lp| self.cauchy(d, lp)).collect()
    }
}
