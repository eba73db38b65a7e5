//! Tri-state verdicts for partial-sum trajectories observed at finite truncation.

use super::fit::loglog_fit;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Bounded,
    Diverging,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assessment {
    pub verdict: Verdict,
    /// Relative increase over the final tenth of the radius range.
    pub last_decade_growth: f64,
    pub growth_exponent: Option<f64>,
}

/// Fraction of the radius range treated as the "last decade".
pub const TAIL_FRACTION: f64 = 0.1;
/// Maximal relative increase accepted as flattening.
pub const FLAT_TOLERANCE: f64 = 0.01;
pub const MIN_R_SQUARED: f64 = 0.9;

/// Judges a nondecreasing (radius, value) trajectory.
pub fn assess(traj: &[(f64, f64)]) -> Assessment {
    let Some(&(r_max, v_last)) = traj.last() else {
        return Assessment { verdict: Verdict::Bounded, last_decade_growth: 0.0, growth_exponent: None };
    };
    if v_last == 0.0 {
        return Assessment { verdict: Verdict::Bounded, last_decade_growth: 0.0, growth_exponent: None };
    }
    let cut = (1.0 - TAIL_FRACTION) * r_max;
    let v_before = traj
        .iter()
        .rev()
        .find(|(r, _)| *r < cut)
        .map(|&(_, v)| v)
        .unwrap_or(traj[0].1);
    let growth = (v_last - v_before) / v_last.abs();
    let upper: Vec<&(f64, f64)> = traj.iter().filter(|(r, v)| *r >= 0.5 * r_max && *v > 0.0).collect();
    let xs: Vec<f64> = upper.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = upper.iter().map(|p| p.1).collect();
    let fit = loglog_fit(&xs, &ys);
    let exponent = fit.map(|f| f.slope);
    let verdict = if growth.abs() <= FLAT_TOLERANCE {
        Verdict::Bounded
    } else {
        match fit {
            Some(f) if f.slope > 0.0 && f.r_squared >= MIN_R_SQUARED => Verdict::Diverging,
            _ => Verdict::Undetermined,
        }
    };
    Assessment { verdict, last_decade_growth: growth, growth_exponent: exponent }
}

/// Combines verdicts: bounded only if all are, diverging dominates undetermined.
pub fn combine<I: IntoIterator<Item = Verdict>>(vs: I) -> Verdict {
    let mut out = Verdict::Bounded;
    for v in vs {
        match v {
            Verdict::Diverging => return Verdict::Diverging,
            Verdict::Undetermined => out = Verdict::Undetermined,
            Verdict::Bounded => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_is_bounded() {
        let t: Vec<(f64, f64)> = (1..50).map(|k| (k as f64, 1.0 - (-(k as f64)).exp())).collect();
        assert_eq!(assess(&t).verdict, Verdict::Bounded);
    }

    #[test]
    fn quadratic_growth_diverges() {
        let t: Vec<(f64, f64)> = (1..50).map(|k| (k as f64, 2.0 * (k * k) as f64)).collect();
        let a = assess(&t);
        assert_eq!(a.verdict, Verdict::Diverging);
        assert!((a.growth_exponent.unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn combine_rules() {
        assert_eq!(combine([Verdict::Bounded, Verdict::Bounded]), Verdict::Bounded);
        assert_eq!(combine([Verdict::Undetermined, Verdict::Bounded]), Verdict::Undetermined);
        assert_eq!(combine([Verdict::Undetermined, Verdict::Diverging]), Verdict::Diverging);
    }
}
