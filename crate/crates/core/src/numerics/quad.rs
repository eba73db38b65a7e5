//! Adaptive Gauss–Legendre quadrature on finite intervals.

use crate::error::{Error, Result};
use std::sync::OnceLock;

const ORDER: usize = 16;
const MAX_PANELS: usize = 20_000;

fn rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| legendre_rule(ORDER))
}

/// Nodes and weights on [-1, 1] by Newton iteration on P_n.
pub fn legendre_rule(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

fn panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let h = 0.5 * (b - a);
    let m = 0.5 * (a + b);
    rule().iter().map(|(x, w)| w * f(m + h * x)).sum::<f64>() * h
}

/// Integrates `f` over [a, b] to `rel_tol` relative to the running total
/// (or `abs_tol`, whichever is looser).
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let whole = panel(&f, a, b);
    let mut stack = vec![(a, b, whole)];
    let mut accepted: f64 = 0.0;
    let mut accepted_err: f64 = 0.0;
    let mut panels = 0usize;
    let scale_hint = whole.abs();
    while let Some((lo, hi, est)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = panel(&f, lo, mid);
        let right = panel(&f, mid, hi);
        let refined = left + right;
        let err = (refined - est).abs();
        panels += 1;
        let scale = (accepted.abs() + refined.abs()).max(scale_hint);
        let width_share = (hi - lo) / (b - a).abs();
        let tol = (rel_tol * scale).max(abs_tol) * width_share;
        if err <= tol || (hi - lo).abs() < 1e-14 * (a.abs() + b.abs() + 1.0) {
            accepted += refined;
            accepted_err += err;
        } else if panels > MAX_PANELS {
            // Budget exhausted: take what is left at face value and judge the total.
            let mut total = accepted + refined;
            let mut total_err = accepted_err + err;
            for (lo, hi, est) in stack.drain(..) {
                let mid = 0.5 * (lo + hi);
                let r = panel(&f, lo, mid) + panel(&f, mid, hi);
                total += r;
                total_err += (r - est).abs();
            }
            let achieved = total_err / total.abs().max(f64::MIN_POSITIVE);
            if achieved <= rel_tol || total_err <= abs_tol {
                return Ok(total);
            }
            return Err(Error::Quadrature { achieved, requested: rel_tol });
        } else {
            stack.push((lo, mid, left));
            stack.push((mid, hi, right));
        }
    }
    if !accepted.is_finite() {
        return Err(Error::Quadrature { achieved: f64::INFINITY, requested: rel_tol });
    }
    Ok(accepted)
}
