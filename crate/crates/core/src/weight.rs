//! Radial subharmonic weights φ(z) = C|z|^γ, their Laplacian measure and ρ-function.

use crate::error::{Error, Result};
use crate::numerics::fit::{fit_line, loglog_fit};
use crate::numerics::quad::integrate;
use crate::numerics::roots::brent;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;

/// Relative tolerance of the radial quadratures behind μ and ρ.
pub const QUAD_TOL: f64 = 1e-12;
/// Relative tolerance of the A_p disc moments.
pub const AP_QUAD_TOL: f64 = 1e-9;
/// Slack keeping the fitted doubling exponent strictly inside (0, 1).
pub const FIT_SLACK: f64 = 0.05;
/// Growth exponent above which a weight is declared not A_p.
pub const AP_EXPONENT_TOL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    Classical,
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightProfile {
    pub kind: WeightKind,
    pub gamma: f64,
    pub c_gamma: f64,
    pub rho_origin: f64,
}

impl WeightProfile {
    /// φ(z) = |z|².
    pub fn classical() -> Self {
        Self { kind: WeightKind::Classical, gamma: 2.0, c_gamma: 1.0, rho_origin: (4.0 * PI).powf(-0.5) }
    }

    pub fn power(gamma: f64, c_gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) || !(c_gamma > 0.0 && c_gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!("power weight needs gamma, c_gamma > 0 (got {gamma}, {c_gamma})")));
        }
        // μ(D(0,r)) = 2πCγ r^γ, so ρ(0) is explicit.
        let rho_origin = (2.0 * PI * c_gamma * gamma).powf(-1.0 / gamma);
        Ok(Self { kind: WeightKind::Power, gamma, c_gamma, rho_origin })
    }

    /// Power weight normalised so that ρ(0) = `rho_origin`.
    pub fn power_with_rho_origin(gamma: f64, rho_origin: f64) -> Result<Self> {
        if !(rho_origin > 0.0) {
            return Err(Error::InvalidArgument("rho_origin must be positive".into()));
        }
        Self::power(gamma, c_gamma_for_rho_origin(gamma, rho_origin))
    }

    pub fn is_classical(&self) -> bool {
        self.kind == WeightKind::Classical
    }

    pub fn phi(&self, z: Complex64) -> f64 {
        match self.kind {
            WeightKind::Classical => z.norm_sqr(),
            WeightKind::Power => self.c_gamma * z.norm().powf(self.gamma),
        }
    }

    pub fn laplacian(&self, z: Complex64) -> Result<f64> {
        match self.kind {
            WeightKind::Classical => Ok(4.0),
            WeightKind::Power => {
                let s = z.norm();
                if s == 0.0 && self.gamma < 2.0 {
                    return Err(Error::OriginSingularity { gamma: self.gamma });
                }
                if s == 0.0 {
                    return Ok(if self.gamma == 2.0 { 4.0 * self.c_gamma } else { 0.0 });
                }
                Ok(self.c_gamma * self.gamma * self.gamma * s.powf(self.gamma - 2.0))
            }
        }
    }

    /// μ(D(center, radius)) for μ = Δφ dm.
    pub fn mu_disc(&self, center: Complex64, radius: f64) -> Result<f64> {
        if !(radius > 0.0) {
            return Err(Error::InvalidArgument(format!("disc radius must be positive, got {radius}")));
        }
        if self.is_classical() {
            return Ok(4.0 * PI * radius * radius);
        }
        let (c, g) = (self.c_gamma, self.gamma);
        disc_radial_integral(
            center.norm(),
            radius,
            |s| c * g * g * s.powf(g - 1.0),
            |t| Ok(2.0 * PI * c * g * t.powf(g)),
            QUAD_TOL,
        )
    }

    pub fn rho(&self, z: Complex64) -> Result<f64> {
        self.rho_radial(z.norm())
    }

    /// ρ at any point of modulus `s` (the weights are radial).
    pub fn rho_radial(&self, s: f64) -> Result<f64> {
        if self.is_classical() {
            return Ok(self.rho_origin);
        }
        if s == 0.0 {
            return Ok(self.rho_origin);
        }
        let z = Complex64::new(s, 0.0);
        let asym = (PI * self.c_gamma * self.gamma * self.gamma).powf(-0.5) * s.powf(1.0 - 0.5 * self.gamma);
        let guess = if s > 3.0 * self.rho_origin { asym } else { self.rho_origin };
        let f = |r: f64| Ok(self.mu_disc(z, r)? - 1.0);
        let mut lo = 0.5 * guess;
        let mut hi = 2.0 * guess;
        let mut k = 0;
        while f(lo)? > 0.0 {
            lo *= 0.5;
            k += 1;
            if k > 200 {
                return Err(Error::Bracket { lo, hi });
            }
        }
        while f(hi)? < 0.0 {
            hi *= 2.0;
            k += 1;
            if k > 400 {
                return Err(Error::Bracket { lo, hi });
            }
        }
        brent(f, lo, hi, 1e-14 * hi)
    }
}

/// C_γ such that ρ(0) = `rho_origin`.
pub fn c_gamma_for_rho_origin(gamma: f64, rho_origin: f64) -> f64 {
    1.0 / (2.0 * PI * gamma * rho_origin.powf(gamma))
}

/// ∫_{D(c, r)} F(|z|) dm(z) with |c| = `a`, given the radial density `f(s) = F(s)·s`
/// and the centred integral `full(t) = ∫_{|z|<t} F dm`.
///
/// A circle |z| = s meets the disc in an arc of angular size 2·acos((s²+a²−r²)/(2as)),
/// which leaves a one-dimensional integral. The cosine substitution absorbs the
/// square-root behaviour of that arc length at both ends.
pub fn disc_radial_integral<F, G>(a: f64, r: f64, f: F, full: G, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> Result<f64>,
{
    if a <= 1e-14 * r {
        return full(r);
    }
    let inner = if a < r { full(r - a)? } else { 0.0 };
    let s0 = (a - r).abs();
    let s1 = a + r;
    let half = 0.5 * (s1 - s0);
    let outside = a >= r;
    let integrand = |u: f64| {
        // `lift` is s − |a − r| up to sign conventions: s + a − r in both cases.
        let (s, gap, lift) = if outside {
            let su = u.sin();
            let h = (0.5 * u).sin();
            let s = (a - r) + 2.0 * r * h * h;
            (s, r * r * su * su, (a - r) + s)
        } else {
            let h = (0.5 * u).sin();
            let rise = 2.0 * half * h * h;
            let s = s0 + rise;
            (s, (r - (s - a)) * (s0 + s), rise)
        };
        if s <= 0.0 {
            return 0.0;
        }
        // Half-angle of the arc via atan2, which stays accurate where the arc closes up.
        let sine = (gap.max(0.0) * lift.max(0.0) * (s + a + r)).sqrt();
        let alpha = sine.atan2(s * s + (a - r) * (a + r));
        2.0 * alpha * f(s) * half * u.sin()
    };
    let ring = integrate(integrand, 0.0, PI, tol, 0.0)?;
    Ok(inner + ring)
}

/// ρ tabulated on a smooth radial grid for repeated evaluation.
#[derive(Debug, Clone)]
pub struct RhoTable {
    weight: WeightProfile,
    u_max: f64,
    du: f64,
    log_rho: Vec<f64>,
    second: Vec<f64>,
}

impl RhoTable {
    pub fn new(weight: &WeightProfile, s_max: f64, nodes: usize) -> Result<Self> {
        let n = nodes.max(8);
        let u_max = (s_max / weight.rho_origin).asinh().max(1e-3);
        let du = u_max / (n - 1) as f64;
        let mut log_rho = Vec::with_capacity(n);
        for i in 0..n {
            let s = weight.rho_origin * (i as f64 * du).sinh();
            log_rho.push(weight.rho_radial(s)?.ln());
        }
        // ln ρ is even in u, so the spline uses a zero-slope clamp at the origin.
        let second = clamped_spline(&log_rho, du);
        Ok(Self { weight: *weight, u_max, du, log_rho, second })
    }

    pub fn rho_radial(&self, s: f64) -> f64 {
        if self.weight.is_classical() {
            return self.weight.rho_origin;
        }
        let u = (s / self.weight.rho_origin).asinh();
        if u >= self.u_max {
            return self.weight.rho_radial(s).unwrap_or(f64::NAN);
        }
        let i = ((u / self.du) as usize).min(self.log_rho.len() - 2);
        let t = u / self.du - i as f64;
        let (y0, y1) = (self.log_rho[i], self.log_rho[i + 1]);
        let (m0, m1) = (self.second[i], self.second[i + 1]);
        let h2 = self.du * self.du;
        let y = (1.0 - t) * y0 + t * y1 + ((1.0 - t).powi(3) - (1.0 - t)) * m0 * h2 / 6.0 + (t.powi(3) - t) * m1 * h2 / 6.0;
        y.exp()
    }

    pub fn rho(&self, z: Complex64) -> f64 {
        self.rho_radial(z.norm())
    }
}

/// Second derivatives of a cubic spline with zero slope at the left end, natural at the right.
fn clamped_spline(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    b[0] = h / 3.0;
    c[0] = h / 6.0;
    d[0] = (y[1] - y[0]) / h;
    for i in 1..n - 1 {
        a[i] = h / 6.0;
        b[i] = 2.0 * h / 3.0;
        c[i] = h / 6.0;
        d[i] = (y[i + 1] - 2.0 * y[i] + y[i - 1]) / h;
    }
    b[n - 1] = 1.0;
    // Thomas algorithm.
    for i in 1..n {
        let m = a[i] / b[i - 1];
        b[i] -= m * c[i - 1];
        d[i] -= m * d[i - 1];
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1] / b[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = (d[i] - c[i] * x[i + 1]) / b[i];
    }
    x
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApReport {
    pub p: f64,
    pub disc_radii: Vec<f64>,
    pub disc_centers: Vec<[f64; 2]>,
    pub ratios: Vec<f64>,
    pub fitted_exponent: f64,
    pub is_ap: bool,
}

/// Centres used by default for a probe: the origin and eight points on the ring |c| = r.
pub fn default_centers(r: f64) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0)];
    out.extend((0..8).map(|k| Complex64::from_polar(r, k as f64 * PI / 4.0)));
    out
}

/// Disc-ratio probe of whether ρ^{p−2} is an A_p weight.
///
/// `centers` are used for every radius; pass `None` to use [`default_centers`] per radius.
pub fn ap_probe(w: &WeightProfile, p: f64, radii: &[f64], centers: Option<&[Complex64]>) -> Result<ApReport> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("ap_probe needs 1 < p < inf, got {p}")));
    }
    if radii.is_empty() || radii.windows(2).any(|v| v[1] <= v[0]) {
        return Err(Error::InvalidArgument("radii must be nonempty and ascending".into()));
    }
    let q = p / (p - 1.0);
    let r_max = *radii.last().unwrap();
    let c_max = centers
        .map(|cs| cs.iter().map(|c| c.norm()).fold(0.0, f64::max))
        .unwrap_or(r_max);
    let table = RhoTable::new(w, 1.01 * (c_max + r_max) + 1.0, 1500)?;
    let mut disc_radii = Vec::new();
    let mut disc_centers = Vec::new();
    let mut ratios = Vec::new();
    let mut per_radius_max = Vec::new();
    for &r in radii {
        let cs = match centers {
            Some(cs) => cs.to_vec(),
            None => default_centers(r),
        };
        let mut best: f64 = 0.0;
        for c in cs {
            let ratio = disc_ratio(w, &table, p, q, c, r)?;
            best = best.max(ratio);
            disc_radii.push(r);
            disc_centers.push([c.re, c.im]);
            ratios.push(ratio);
        }
        per_radius_max.push(best);
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = radii
        .iter()
        .zip(&per_radius_max)
        .filter(|(r, _)| **r >= r_max / 10.0 * (1.0 - 1e-12))
        .map(|(r, v)| (*r, *v))
        .unzip();
    let fitted_exponent = loglog_fit(&xs, &ys).map(|f| f.slope).unwrap_or(0.0);
    Ok(ApReport { p, disc_radii, disc_centers, ratios, fitted_exponent, is_ap: fitted_exponent <= AP_EXPONENT_TOL })
}

fn disc_ratio(w: &WeightProfile, table: &RhoTable, p: f64, q: f64, c: Complex64, r: f64) -> Result<f64> {
    if w.is_classical() || p == 2.0 {
        return Ok(1.0);
    }
    if r <= table.rho(c) / 4.0 {
        return Ok(1.0);
    }
    let moment = |e: f64| -> Result<f64> {
        disc_radial_integral(
            c.norm(),
            r,
            |s| table.rho_radial(s).powf(e) * s,
            |t| Ok(2.0 * PI * integrate(|s| table.rho_radial(s).powf(e) * s, 0.0, t, AP_QUAD_TOL, 0.0)?),
            AP_QUAD_TOL,
        )
    };
    let ip = moment(p - 2.0)?;
    let iq = moment(q - 2.0)?;
    Ok(ip.powf(1.0 / p) * iq.powf(1.0 / q) / (PI * r * r))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoublingExponent {
    pub t_fit: f64,
    pub t_bound: Option<f64>,
    pub sample_count: usize,
    pub envelope_slope: f64,
}

impl DoublingExponent {
    pub fn effective(&self) -> f64 {
        match self.t_bound {
            Some(b) => self.t_fit.min(b),
            None => self.t_fit,
        }
    }
}

/// Analytic ceiling for t for a power weight (`None` when it is not below 1).
pub fn t_bound(w: &WeightProfile) -> Option<f64> {
    if w.is_classical() {
        return None;
    }
    let b = (0.5 * w.gamma).min(2.0 / w.gamma);
    (b < 1.0).then_some(b)
}

/// Random pairs (z, ζ) with |z−ζ| > ρ(z), drawn from a fixed set of log-spaced moduli.
pub fn sample_pairs(w: &WeightProfile, count: usize, seed: u64) -> Result<Vec<(Complex64, Complex64)>> {
    let r0 = w.rho_origin;
    // Outer modulus chosen so that |z−ζ|/ρ(ζ) spans well over two decades.
    let mut s_max = 10.0 * r0;
    while s_max / w.rho_radial(s_max)? < 1e5 && s_max < 1e12 {
        s_max *= 2.0;
    }
    let s_min = r0 / 10.0;
    let mags: Vec<f64> = (0..200).map(|i| s_min * (s_max / s_min).powf(i as f64 / 199.0)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut rho_cache = HashMap::new();
    let mut tries = 0usize;
    while out.len() < count && tries < 100 * count {
        tries += 1;
        let z = Complex64::from_polar(mags[rng.gen_range(0..mags.len())], rng.gen_range(0.0..2.0 * PI));
        let zeta = Complex64::from_polar(mags[rng.gen_range(0..mags.len())], rng.gen_range(0.0..2.0 * PI));
        let rz = cached_rho(w, z.norm(), &mut rho_cache)?;
        if (z - zeta).norm() > rz {
            out.push((z, zeta));
        }
    }
    Ok(out)
}

fn cached_rho(w: &WeightProfile, s: f64, cache: &mut HashMap<u64, f64>) -> Result<f64> {
    if let Some(v) = cache.get(&s.to_bits()) {
        return Ok(*v);
    }
    let v = w.rho_radial(s)?;
    cache.insert(s.to_bits(), v);
    Ok(v)
}

/// Envelope regression of log(ρ(z)/ρ(ζ)) against log(|z−ζ|/ρ(ζ)).
pub fn estimate_t(w: &WeightProfile, pairs: &[(Complex64, Complex64)]) -> Result<DoublingExponent> {
    let mut cache = HashMap::new();
    let mut xs = Vec::with_capacity(pairs.len());
    let mut ys = Vec::with_capacity(pairs.len());
    for &(z, zeta) in pairs {
        let rz = cached_rho(w, z.norm(), &mut cache)?;
        let rzeta = cached_rho(w, zeta.norm(), &mut cache)?;
        let d = (z - zeta).norm();
        if d <= rz {
            return Err(Error::InvalidArgument("pair with zeta inside D(z, rho(z))".into()));
        }
        xs.push((d / rzeta).ln());
        ys.push((rz / rzeta).ln());
    }
    let (x_lo, x_hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if !(x_hi - x_lo >= 100f64.ln()) {
        return Err(Error::SampleSpread(format!("distance ratios span only {:.2} decades", (x_hi - x_lo) / 10f64.ln())));
    }
    const BINS: usize = 24;
    let width = (x_hi - x_lo) / BINS as f64;
    let mut env = vec![(f64::NAN, f64::NEG_INFINITY); BINS];
    for (&x, &y) in xs.iter().zip(&ys) {
        let b = (((x - x_lo) / width) as usize).min(BINS - 1);
        if y > env[b].1 {
            env[b] = (x, y);
        }
    }
    let mid = 0.5 * (x_lo + x_hi);
    let (ex, ey): (Vec<f64>, Vec<f64>) = env.iter().filter(|(x, y)| y.is_finite() && *x >= mid).cloned().unzip();
    let slope = fit_line(&ex, &ey).map(|f| f.slope).unwrap_or(0.0);
    let t_fit = (1.0 - slope).clamp(FIT_SLACK, 1.0 - FIT_SLACK);
    Ok(DoublingExponent { t_fit, t_bound: t_bound(w), sample_count: pairs.len(), envelope_slope: slope })
}

/// Smallest integer strictly greater than 1/t for the effective exponent.
pub fn choose_n(t: &DoublingExponent) -> usize {
    choose_n_for(t.effective())
}

pub fn choose_n_for(t: f64) -> usize {
    (1.0 / t).floor() as usize + 1
}
