//! Dense operator-norm estimates for the weighted B, L and M matrices on truncated lattices.

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const POWER_ITERATIONS: usize = 50;
pub const POWER_STAGNATION: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "n")]
pub enum Operator {
    B,
    L,
    M(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NormKind {
    One,
    Two,
    Inf,
}

impl NormKind {
    pub fn from_p(p: f64) -> Result<Self> {
        if p.is_infinite() {
            Ok(Self::Inf)
        } else if p == 1.0 {
            Ok(Self::One)
        } else if p == 2.0 {
            Ok(Self::Two)
        } else {
            Err(Error::InvalidArgument(format!("operator norms are estimated for p in {{1, 2, inf}}, got {p}")))
        }
    }

    pub fn p(self) -> f64 {
        match self {
            Self::One => 1.0,
            Self::Two => 2.0,
            Self::Inf => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorNormReport {
    pub op: Operator,
    #[serde(with = "crate::serde_p")]
    pub p: f64,
    pub sizes: Vec<usize>,
    pub norms: Vec<f64>,
    pub growth_ratio: f64,
    /// Power iterations spent per size (zero for p = 1, ∞).
    pub iterations: Vec<usize>,
}

/// Dense row-major matrix of the conjugated operator on the first n points by modulus.
struct Dense {
    n: usize,
    a: Vec<Complex64>,
}

fn build(l: &Lattice, op: Operator, order: &[usize]) -> Dense {
    let n = order.len();
    let pts = &l.points;
    let rho = &l.rho_values;
    let mut a = vec![Complex64::new(0.0, 0.0); n * n];
    a.par_chunks_mut(n.max(1)).enumerate().for_each(|(r, row)| {
        let i = order[r];
        for (c, slot) in row.iter_mut().enumerate() {
            let j = order[c];
            if i == j {
                continue;
            }
            let diff = pts[i] - pts[j];
            *slot = match op {
                Operator::B => rho[i] * rho[j] / (diff * diff),
                Operator::L => Complex64::new(rho[j] * rho[i] * rho[i] / diff.norm().powi(3), 0.0),
                Operator::M(k) => Complex64::new(rho[j] * rho[i].powi(k as i32) / diff.norm().powi(k as i32 + 1), 0.0),
            };
        }
    });
    Dense { n, a }
}

impl Dense {
    fn max_col_sum(&self) -> f64 {
        let mut cols = vec![0.0; self.n];
        for row in self.a.chunks(self.n.max(1)) {
            for (c, v) in row.iter().enumerate() {
                cols[c] += v.norm();
            }
        }
        cols.into_iter().fold(0.0, f64::max)
    }

    fn max_row_sum(&self) -> f64 {
        self.a
            .par_chunks(self.n.max(1))
            .map(|row| row.iter().map(|v| v.norm()).sum::<f64>())
            .reduce(|| 0.0, f64::max)
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.a
            .par_chunks(self.n)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn apply_adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.n];
        for (row, yi) in self.a.chunks(self.n).zip(y) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a.conj() * yi;
            }
        }
        out
    }

    /// Largest singular value by power iteration on A*A; returns (estimate, iterations).
    fn spectral(&self, start: Vec<Complex64>) -> Result<(f64, usize)> {
        let mut x = start;
        normalize(&mut x);
        let mut sigma = 0.0;
        for it in 1..=POWER_ITERATIONS {
            let y = self.apply(&x);
            let s = norm2(&y);
            if !s.is_finite() {
                return Err(Error::Stagnation(format!("power iteration produced {s}")));
            }
            if s == 0.0 {
                return Ok((0.0, it));
            }
            let mut z = self.apply_adjoint(&y);
            let zn = norm2(&z);
            let next = (zn).sqrt();
            let done = (next - sigma).abs() <= POWER_STAGNATION * next;
            sigma = next;
            if zn == 0.0 {
                return Ok((s, it));
            }
            z.iter_mut().for_each(|v| *v /= zn);
            x = z;
            if done {
                return Ok((sigma, it));
            }
        }
        Ok((sigma, POWER_ITERATIONS))
    }
}

fn norm2(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

fn normalize(x: &mut [Complex64]) {
    let n = norm2(x);
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
}

/// Lattice indices sorted by modulus (stable, so shell order is kept).
pub fn modulus_order(l: &Lattice) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..l.len()).collect();
    idx.sort_by(|&a, &b| l.points[a].norm().total_cmp(&l.points[b].norm()));
    idx
}

/// Norm of the weighted operator from ℓ^p(ρ^{−1}) to ℓ^p(ρ^k) on the first n points, for each n.
/// `trials` random starts supplement the all-ones start at p = 2.
pub fn operator_norm_estimate(
    l: &Lattice,
    op: Operator,
    sizes: &[usize],
    p: f64,
    trials: usize,
    seed: u64,
) -> Result<OperatorNormReport> {
    let kind = NormKind::from_p(p)?;
    if sizes.is_empty() || sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("sizes must be nonempty and strictly ascending".into()));
    }
    if *sizes.last().unwrap() > l.len() || sizes[0] == 0 {
        return Err(Error::InvalidArgument(format!("sizes must lie in 1..={}", l.len())));
    }
    let order = modulus_order(l);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut norms = Vec::with_capacity(sizes.len());
    let mut iterations = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let m = build(l, op, &order[..n]);
        let (v, its) = match kind {
            NormKind::One => (m.max_col_sum(), 0),
            NormKind::Inf => (m.max_row_sum(), 0),
            NormKind::Two => {
                let mut best = m.spectral(vec![Complex64::new(1.0, 0.0); n])?;
                let mut total = best.1;
                for _ in 0..trials {
                    let start = (0..n)
                        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                        .collect();
                    let r = m.spectral(start)?;
                    total += r.1;
                    if r.0 > best.0 {
                        best.0 = r.0;
                    }
                }
                (best.0, total)
            }
        };
        norms.push(v);
        iterations.push(its);
    }
    let first = norms[0];
    let last = *norms.last().unwrap();
    let growth_ratio = if first == 0.0 {
        if last == 0.0 { 1.0 } else { f64::INFINITY }
    } else {
        last / first
    };
    Ok(OperatorNormReport { op, p, sizes: sizes.to_vec(), norms, growth_ratio, iterations })
}
