//! Trace conditions and the branch table deciding which of them characterise F^p traces.

use crate::error::{Error, Result};
use crate::functions::SpaceFunction;
use crate::lattice::Lattice;
use crate::multiplier::Multiplier;
use crate::numerics::trajectory::{assess, combine, Assessment, Verdict};
use crate::transforms::{PvConfig, PvResult, PvStatus, SequenceData, Transforms};
use crate::weight::{ap_probe, choose_n_for, estimate_t, sample_pairs, WeightProfile};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Pairs drawn for the doubling-exponent fit.
pub const T_SAMPLE_PAIRS: usize = 10_000;

/// Disc radii 2^k, k = −1..=10, for the A_p probe.
pub fn default_ap_radii() -> Vec<f64> {
    (-1..=10).map(|k| 2f64.powi(k)).collect()
}

/// Values c_λ on the lattice, stored as ĉ_λ = c_λe^{−φ(λ)}.
#[derive(Clone)]
pub struct TraceData {
    pub lattice: Arc<Lattice>,
    pub multiplier: Arc<Multiplier>,
    pub c_weighted: Vec<Complex64>,
    pub p: f64,
}

impl TraceData {
    pub fn new(multiplier: Arc<Multiplier>, c_weighted: Vec<Complex64>, p: f64) -> Result<Self> {
        let lattice = multiplier.lattice.clone();
        if c_weighted.len() != lattice.len() {
            return Err(Error::InvalidArgument(format!(
                "{} values for a lattice of {} points",
                c_weighted.len(),
                lattice.len()
            )));
        }
        if let Some(i) = c_weighted.iter().position(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::InvalidArgument(format!("non-finite value at index {i}")));
        }
        if !(p >= 1.0) {
            return Err(Error::InvalidArgument(format!("p must be in [1, inf], got {p}")));
        }
        Ok(Self { lattice, multiplier, c_weighted, p })
    }

    pub fn from_function(multiplier: Arc<Multiplier>, f: &dyn SpaceFunction, p: f64) -> Result<Self> {
        let c = crate::functions::weighted_trace(f, &multiplier.lattice);
        Self::new(multiplier, c, p)
    }

    pub fn zero(multiplier: Arc<Multiplier>, p: f64) -> Result<Self> {
        let n = multiplier.lattice.len();
        Self::new(multiplier, vec![Complex64::new(0.0, 0.0); n], p)
    }

    /// c_λ = e^{φ(λ)}, so every weighted value is 1.
    pub fn exp_phi(multiplier: Arc<Multiplier>, p: f64) -> Result<Self> {
        let n = multiplier.lattice.len();
        Self::new(multiplier, vec![Complex64::new(1.0, 0.0); n], p)
    }

    pub fn weight(&self) -> &WeightProfile {
        &self.lattice.weight
    }

    /// d_λ = c_λ/g′(λ), computed from the weighted forms.
    pub fn d(&self) -> SequenceData {
        SequenceData::new(
            self.c_weighted
                .iter()
                .enumerate()
                .map(|(i, c)| c / self.multiplier.g_prime_weighted(i))
                .collect(),
        )
    }

    pub fn scaled(&self, k: Complex64) -> Self {
        Self { c_weighted: self.c_weighted.iter().map(|c| c * k).collect(), ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "id", content = "n")]
pub enum ConditionId {
    A,
    B,
    C,
    Bprime(usize),
    InfA,
    InfB,
    InfC(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: ConditionId,
    /// (outer truncation radius, accumulated Σ|·|^p or running sup).
    pub partial_trajectory: Vec<(f64, f64)>,
    pub verdict: Verdict,
    pub growth_exponent: Option<f64>,
    pub last_decade_growth: f64,
    /// Inner sums whose p.v. did not settle within tolerance.
    pub inner_unconverged: usize,
    /// Inner sums whose partials grew like a power of the radius.
    pub inner_diverging: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// p = 1: (a), absolutely summed (b), and (c).
    P1,
    /// p = 2: (a) and (b).
    P2,
    /// 1 < p < 2 with ρ^{p−2} in A_p.
    BelowTwoAp,
    /// 1 < p < 2 without the A_p property: (c) is added.
    BelowTwoNonAp,
    /// 2 < p < ∞, t > 1/2, A_p.
    AboveTwoAp,
    /// 2 < p < ∞, t > 1/2, not A_p.
    AboveTwoNonAp,
    /// 2 < p < ∞, t ≤ 1/2: (a) and the higher-order sums up to N.
    AboveTwoSlowDoubling,
    Infinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchInfo {
    pub branch: Branch,
    #[serde(with = "crate::serde_p")]
    pub p: f64,
    pub is_ap: Option<bool>,
    pub t: f64,
    pub n: usize,
    pub conditions: Vec<ConditionId>,
}

/// The condition set for (p, A_p status, effective t). `is_ap` is only consulted for 1 < p < 2
/// and for 2 < p < ∞ with t > 1/2.
pub fn select_branch(p: f64, is_ap: bool, t: f64) -> BranchInfo {
    use ConditionId::*;
    let n = choose_n_for(t);
    let (branch, conditions, ap_used) = if p.is_infinite() {
        let mut c = vec![InfA, InfB];
        c.extend((2..=n).map(InfC));
        (Branch::Infinite, c, false)
    } else if p == 1.0 {
        (Branch::P1, vec![A, B, C], false)
    } else if p == 2.0 {
        (Branch::P2, vec![A, B], false)
    } else if p < 2.0 {
        if is_ap {
            (Branch::BelowTwoAp, vec![A, B], true)
        } else {
            (Branch::BelowTwoNonAp, vec![A, B, C], true)
        }
    } else if t > 0.5 {
        if is_ap {
            (Branch::AboveTwoAp, vec![A, B], true)
        } else {
            (Branch::AboveTwoNonAp, vec![A, B, C], true)
        }
    } else {
        let mut c = vec![A];
        c.extend((1..=n).map(Bprime));
        (Branch::AboveTwoSlowDoubling, c, false)
    };
    BranchInfo { branch, p, is_ap: ap_used.then_some(is_ap), t, n, conditions }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceVerdict {
    pub branch: BranchInfo,
    pub reports: Vec<ConditionReport>,
    pub overall: Verdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub pv: PvConfig,
    pub seed: u64,
}

impl ClassifierConfig {
    pub fn new(tail_r: f64) -> Self {
        Self { pv: PvConfig::new(tail_r), seed: 0 }
    }
}

type WeightKey = (u64, u64, u64);

fn weight_key(w: &WeightProfile) -> WeightKey {
    (w.gamma.to_bits(), w.c_gamma.to_bits(), w.is_classical() as u64)
}

/// A_p verdict for ρ^{p−2}, cached per (weight, p).
pub fn ap_status(w: &WeightProfile, p: f64) -> Result<bool> {
    if w.is_classical() || p == 2.0 || p == 1.0 || p.is_infinite() {
        return Ok(true);
    }
    static CACHE: OnceLock<Mutex<HashMap<(WeightKey, u64), bool>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let key = (weight_key(w), p.to_bits());
    if let Some(v) = cache.lock().unwrap().get(&key) {
        return Ok(*v);
    }
    let v = ap_probe(w, p, &default_ap_radii(), None)?.is_ap;
    cache.lock().unwrap().insert(key, v);
    Ok(v)
}

/// Effective doubling exponent min(t_fit, t_bound), cached per (weight, seed).
pub fn effective_t(w: &WeightProfile, seed: u64) -> Result<f64> {
    static CACHE: OnceLock<Mutex<HashMap<(WeightKey, u64), f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let key = (weight_key(w), seed);
    if let Some(v) = cache.lock().unwrap().get(&key) {
        return Ok(*v);
    }
    let pairs = sample_pairs(w, T_SAMPLE_PAIRS, seed)?;
    let v = estimate_t(w, &pairs)?.effective();
    cache.lock().unwrap().insert(key, v);
    Ok(v)
}

/// Condition evaluator bound to one data set and truncation.
pub struct Classifier<'a> {
    pub data: &'a TraceData,
    pub transforms: Transforms<'a>,
    d: SequenceData,
    /// Outer centres |λ′| ≤ tail_R/2 in shell order, with their shell radius.
    outer: Vec<(f64, usize)>,
}

impl<'a> Classifier<'a> {
    pub fn new(data: &'a TraceData, cfg: &ClassifierConfig) -> Result<Self> {
        let transforms = Transforms::new(&data.lattice, cfg.pv)?;
        let half = 0.5 * cfg.pv.tail_r;
        let outer = transforms
            .origin_schedule()
            .shells
            .iter()
            .filter(|s| s.radius <= half * (1.0 + 1e-12))
            .flat_map(|s| s.members.iter().map(move |&i| (s.radius, i)))
            .collect();
        Ok(Self { data, transforms, d: data.d(), outer })
    }

    pub fn sequence(&self) -> &SequenceData {
        &self.d
    }

    fn p(&self) -> f64 {
        self.data.p
    }

    fn report(&self, id: ConditionId, values: &[(f64, f64)], inner: &[PvStatus], sup: bool) -> ConditionReport {
        let p = self.p();
        let mut traj: Vec<(f64, f64)> = Vec::new();
        let mut acc = crate::numerics::sum::NeumaierSum::new();
        let mut run: f64 = 0.0;
        for &(r, v) in values {
            let total = if sup {
                run = run.max(v);
                run
            } else {
                acc += v.powf(p);
                acc.sum()
            };
            match traj.last_mut() {
                Some(last) if last.0 == r => last.1 = total,
                _ => traj.push((r, total)),
            }
        }
        let Assessment { verdict, last_decade_growth, growth_exponent } = assess(&traj);
        let inner_diverging = inner.iter().filter(|s| **s == PvStatus::Diverging).count();
        let inner_unconverged = inner.iter().filter(|s| **s != PvStatus::Converged).count();
        let verdict = if inner_diverging > 0 { Verdict::Diverging } else { verdict };
        ConditionReport {
            condition: id,
            partial_trajectory: traj,
            verdict,
            growth_exponent,
            last_decade_growth,
            inner_unconverged,
            inner_diverging,
        }
    }

    fn outer_report<F>(&self, id: ConditionId, skip_origin: bool, sup: bool, inner: F) -> Result<ConditionReport>
    where
        F: Fn(usize) -> Result<(f64, PvStatus)> + Sync,
    {
        let centres: Vec<(f64, usize)> =
            self.outer.iter().copied().filter(|&(_, i)| !(skip_origin && i == 0)).collect();
        let rows: Vec<(f64, PvStatus)> = centres.par_iter().map(|&(_, i)| inner(i)).collect::<Result<_>>()?;
        let values: Vec<(f64, f64)> = centres.iter().zip(&rows).map(|((r, _), (v, _))| (*r, *v)).collect();
        let statuses: Vec<PvStatus> = rows.iter().map(|r| r.1).collect();
        Ok(self.report(id, &values, &statuses, sup))
    }

    fn prefactor(&self, lp: usize, n: usize) -> f64 {
        self.data.lattice.rho_values[lp].powi(n as i32 - 1)
    }

    fn inner(&self, r: PvResult, scale: f64) -> (f64, PvStatus) {
        (scale * r.value.norm(), r.status)
    }

    /// Σ|c_λ|^p e^{−pφ(λ)} (or the sup) over ascending shells up to tail_R.
    pub fn condition_a(&self) -> ConditionReport {
        let sup = self.p().is_infinite();
        let values: Vec<(f64, f64)> = self
            .transforms
            .origin_schedule()
            .shells
            .iter()
            .flat_map(|s| s.members.iter().map(move |&i| (s.radius, self.data.c_weighted[i].norm())))
            .collect();
        let id = if sup { ConditionId::InfA } else { ConditionId::A };
        self.report(id, &values, &[], sup)
    }

    /// Outer ℓ^p aggregate of the Cauchy sums; for p = 1 the inner sum is plain (absolute).
    pub fn condition_b(&self) -> Result<ConditionReport> {
        if self.p() == 1.0 {
            return self.outer_report(ConditionId::B, false, false, |i| {
                Ok((self.transforms.dense(1, &self.d, i).norm(), PvStatus::Converged))
            });
        }
        self.higher_report(ConditionId::B, 1)
    }

    /// Outer aggregate of ρ(λ′) times the second-order sums.
    pub fn condition_c(&self) -> Result<ConditionReport> {
        if self.p() == 1.0 {
            return self.outer_report(ConditionId::C, false, false, |i| {
                Ok((self.prefactor(i, 2) * self.transforms.dense(2, &self.d, i).norm(), PvStatus::Converged))
            });
        }
        self.higher_report(ConditionId::C, 2)
    }

    fn higher_report(&self, id: ConditionId, n: usize) -> Result<ConditionReport> {
        let sup = self.p().is_infinite();
        self.outer_report(id, false, sup, |i| {
            let r = self.transforms.higher(&self.d, i, n, n.max(2))?;
            Ok(self.inner(r, self.prefactor(i, n)))
        })
    }

    /// Reports for n = 1..=N of ρ(λ′)^{n−1} p.v.Σ d_λ/(λ−λ′)^n.
    pub fn condition_bprime(&self, big_n: usize) -> Result<Vec<ConditionReport>> {
        if big_n < 1 {
            return Err(Error::InvalidArgument("N must be at least 1".into()));
        }
        (1..=big_n).map(|n| self.higher_report(ConditionId::Bprime(n), n)).collect()
    }

    /// sup over λ′ ≠ 0 of the modified Cauchy sum.
    pub fn condition_inf_b(&self) -> Result<ConditionReport> {
        if !self.p().is_infinite() {
            return Err(Error::InvalidArgument("the modified Cauchy condition applies to p = inf only".into()));
        }
        self.outer_report(ConditionId::InfB, true, true, |i| {
            Ok(self.inner(self.transforms.modified_cauchy_inf(&self.d, i)?, 1.0))
        })
    }

    /// sup over λ′ of ρ(λ′)^{n−1} times the order-n sums.
    pub fn condition_inf_c(&self, n: usize) -> Result<ConditionReport> {
        if !self.p().is_infinite() {
            return Err(Error::InvalidArgument("sup conditions apply to p = inf only".into()));
        }
        self.higher_report(ConditionId::InfC(n), n)
    }

    pub fn evaluate(&self, id: ConditionId) -> Result<ConditionReport> {
        match id {
            ConditionId::A | ConditionId::InfA => Ok(self.condition_a()),
            ConditionId::B => self.condition_b(),
            ConditionId::C => self.condition_c(),
            ConditionId::Bprime(n) => self.higher_report(id, n),
            ConditionId::InfB => self.condition_inf_b(),
            ConditionId::InfC(n) => self.condition_inf_c(n),
        }
    }
}

/// Selects the branch from (p, A_p status, effective t) and evaluates its conditions.
pub fn classify(data: &TraceData, cfg: &ClassifierConfig) -> Result<TraceVerdict> {
    let w = data.weight();
    let p = data.p;
    let is_ap = ap_status(w, p)?;
    let t = effective_t(w, cfg.seed)?;
    classify_with(data, cfg, is_ap, t)
}

/// As [`classify`] with the A_p status and effective t supplied by the caller.
pub fn classify_with(data: &TraceData, cfg: &ClassifierConfig, is_ap: bool, t: f64) -> Result<TraceVerdict> {
    let branch = select_branch(data.p, is_ap, t);
    let c = Classifier::new(data, cfg)?;
    let reports: Vec<ConditionReport> = branch.conditions.iter().map(|&id| c.evaluate(id)).collect::<Result<_>>()?;
    let overall = combine(reports.iter().map(|r| r.verdict));
    Ok(TraceVerdict { branch, reports, overall })
}
