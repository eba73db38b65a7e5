//! The finite Taylor identity and the perturbed-point recovery of the condition sums.

use super::{SequenceData, Transforms};
use crate::error::{Error, Result};
use crate::functions::SpaceFunction;
use crate::multiplier::Multiplier;
use crate::numerics::sum::ComplexSum;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaylorCheck {
    /// |LHS − RHS|.
    pub abs: f64,
    /// abs divided by the largest magnitude among the summed terms.
    pub rel: f64,
}

/// Both sides of 1/(z−λ) + Σ_{j<n} z^j/λ^{j+1} = z^n/(λ^n(z−λ)) after translating by λ′.
pub fn taylor_kernel_check(z: Complex64, lam: Complex64, lam_prime: Complex64, n: u32) -> Result<TaylorCheck> {
    let (z, lam) = (z - lam_prime, lam - lam_prime);
    if lam.norm() == 0.0 || (z - lam).norm() == 0.0 || n == 0 {
        return Err(Error::InvalidArgument("Taylor identity needs lambda != lambda', z != lambda, n >= 1".into()));
    }
    let head = (z - lam).inv();
    let mut lhs = ComplexSum::new();
    lhs += head;
    let mut scale = head.norm();
    let mut term = lam.inv();
    for _ in 0..n {
        lhs += term;
        scale = scale.max(term.norm());
        term *= z / lam;
    }
    let rhs = (z / lam).powu(n) / (z - lam);
    let abs = (lhs.sum() - rhs).norm();
    let rel = if scale > 0.0 { abs / scale } else { 0.0 };
    Ok(TaylorCheck { abs, rel })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NecessityReport {
    #[serde(with = "crate::serde_p")]
    pub p: f64,
    pub delta: f64,
    pub n: usize,
    pub centers: Vec<usize>,
    /// Σ_{λ′}|f/g(z^k_{λ′})|^p for k = 0..N, or the sup when p = ∞.
    pub probe_sums: Vec<f64>,
    /// recovered[c][n−1]: condition-(n) sum at centre c from the N perturbed samples.
    pub recovered: Vec<Vec<Complex64>>,
    /// The same sums from the shell-ordered transform.
    pub direct: Vec<Vec<Complex64>>,
    /// Largest |recovered − direct| per order.
    pub max_abs_error: Vec<f64>,
}

/// Samples f/g at z^k = λ′ + δω_kρ(λ′), ω_k = e^{2πik/N}, subtracts the diagonal and
/// order-N remainder terms, and averages against ω_k^{−(n−1)} to recover
/// p.v. Σ d_λ/(λ−λ′)^n for n = 1..N, where d_λ = f(λ)/g′(λ).
pub fn necessity_probe(
    t: &Transforms,
    m: &Multiplier,
    f: &dyn SpaceFunction,
    p: f64,
    delta: f64,
    big_n: usize,
    centers: &[usize],
) -> Result<NecessityReport> {
    let l = t.lattice;
    if !(delta > 0.0 && delta < l.delta_sep / 2.0) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, {})", l.delta_sep / 2.0)));
    }
    if big_n == 0 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    let d: Vec<Complex64> = (0..l.len())
        .map(|i| f.weighted(l.points[i], l.weight.phi(l.points[i])) / m.g_prime_weighted(i))
        .collect();
    let seq = SequenceData::new(d);
    let omega: Vec<Complex64> = (0..big_n).map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / big_n as f64)).collect();

    type Row = (Vec<Complex64>, Vec<Complex64>, Vec<f64>);
    let rows: Vec<Row> = centers
        .par_iter()
        .map(|&lp| -> Result<Row> {
            let lam_p = l.points[lp];
            let r = delta * l.rho_values[lp];
            let mut fk = Vec::with_capacity(big_n);
            let mut mags = Vec::with_capacity(big_n);
            for w in &omega {
                let h = r * w;
                let z = lam_p + h;
                let ratio = f.weighted(z, l.weight.phi(z)) / m.g_weighted(z)?;
                mags.push(ratio.norm());
                let hn = h.powu(big_n as u32);
                let mut rem = ComplexSum::new();
                for &i in &t.active {
                    if i == lp || seq.d[i] == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    let a = l.points[i] - lam_p;
                    rem += seq.d[i] * hn / (a.powu(big_n as u32) * (z - l.points[i]));
                }
                fk.push(ratio - seq.d[lp] / h - rem.sum());
            }
            let mut rec = Vec::with_capacity(big_n);
            let mut dir = Vec::with_capacity(big_n);
            for n in 1..=big_n {
                let mut acc = ComplexSum::new();
                for (w, v) in omega.iter().zip(&fk) {
                    acc += w.powi(-(n as i32 - 1)) * v;
                }
                rec.push(-acc.sum() / (big_n as f64 * r.powi(n as i32 - 1)));
                dir.push(t.higher(&seq, lp, n, big_n)?.value);
            }
            Ok((rec, dir, mags))
        })
        .collect::<Result<_>>()?;

    let mut probe_sums = vec![0.0; big_n];
    for (_, _, mags) in &rows {
        for (s, v) in probe_sums.iter_mut().zip(mags) {
            if p.is_infinite() {
                *s = f64::max(*s, *v);
            } else {
                *s += v.powf(p);
            }
        }
    }
    let mut max_abs_error = vec![0.0; big_n];
    for (rec, dir, _) in &rows {
        for n in 0..big_n {
            max_abs_error[n] = f64::max(max_abs_error[n], (rec[n] - dir[n]).norm());
        }
    }
    let (recovered, direct) = rows.into_iter().map(|(a, b, _)| (a, b)).unzip();
    Ok(NecessityReport { p, delta, n: big_n, centers: centers.to_vec(), probe_sums, recovered, direct, max_abs_error })
}
