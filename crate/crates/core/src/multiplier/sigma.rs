//! Weierstrass σ for the square lattice s(ℤ+iℤ), in log form.
//!
//! The truncated product over |λ| ≤ T is completed by the analytic tail
//! −Σ_{k≡0 (4)} z^k/k · Σ_{|λ|>T} λ^{−k}: the order-4 remainder comes from the
//! exact Eisenstein value G_4 and higher orders from an annulus out to 3T.

use crate::error::{Error, Result};
use crate::numerics::sum::ComplexSum;
use num_complex::Complex64;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// Highest order kept in the tail series (orders 4, 8, …, TAIL_ORDER).
pub const TAIL_ORDER: usize = 48;
/// Tail radius used for points reduced to the fundamental cell.
pub const CELL_TAIL: f64 = 16.0;
/// Tail radii used internally are rounded up to multiples of this.
pub const TAIL_LADDER_STEP: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaLog {
    /// log z + Σ_{0<|λ|≤T} [Log(1−z/λ) + z/λ + z²/2λ²].
    pub partial: Complex64,
    /// Analytic completion of the product beyond T.
    pub tail: Complex64,
    /// Bound on |Σ_{|λ|>T} log-terms|, i.e. the error of `partial` alone.
    pub tail_bound: f64,
}

impl SigmaLog {
    pub fn value(&self) -> Complex64 {
        self.partial + self.tail
    }
}

#[derive(Debug)]
struct SigmaShell {
    key: i64,
    coords: Vec<(i32, i32)>,
    inv: Vec<Complex64>,
}

#[derive(Debug)]
pub struct SquareSigma {
    scale: f64,
    max_tail: f64,
    g: Vec<f64>,
    shells: Vec<SigmaShell>,
    tails: Mutex<HashMap<i64, Arc<Vec<Complex64>>>>,
}

/// Σ'(m+in)^{−4} over ℤ[i] from the q-expansion of E_4 at τ = i.
pub fn eisenstein_g4_gaussian_integers() -> f64 {
    let q = (-2.0 * PI).exp();
    let mut s = 0.0;
    let mut qn = 1.0;
    for n in 1..40u64 {
        qn *= q;
        let sigma3: u64 = (1..=n).filter(|d| n % d == 0).map(|d| d * d * d).sum();
        s += sigma3 as f64 * qn;
    }
    PI.powi(4) / 45.0 * (1.0 + 240.0 * s)
}

/// G_4, G_8, …, G_order of the lattice s·ℤ[i] (G_k = 0 unless 4 | k).
///
/// Uses the ℘ coefficient recurrence c_k = 3/((2k+1)(k−3)) Σ_{m=2}^{k−2} c_m c_{k−m},
/// with c_k = (2k−1) G_{2k} and G_6 = 0 for the square lattice.
pub fn eisenstein_series(scale: f64, order: usize) -> Vec<f64> {
    let kmax = order / 2;
    let mut c = vec![0.0; kmax + 1];
    let g4 = eisenstein_g4_gaussian_integers() / scale.powi(4);
    c[2] = 3.0 * g4;
    for k in 4..=kmax {
        let s: f64 = (2..=k - 2).map(|m| c[m] * c[k - m]).sum();
        c[k] = 3.0 * s / (((2 * k + 1) * (k - 3)) as f64);
    }
    // Index by order: g[k] = G_k.
    let mut g = vec![0.0; order + 1];
    for k in 2..=kmax {
        g[2 * k] = c[k] / (2 * k - 1) as f64;
    }
    g
}

impl SquareSigma {
    pub fn new(scale: f64, max_tail: f64) -> Self {
        let kmax = ((max_tail / scale).powi(2) * (1.0 + 1e-12)).floor() as i64;
        let r = (kmax as f64).sqrt().floor() as i32 + 1;
        let mut by_key: HashMap<i64, Vec<(i32, i32)>> = HashMap::new();
        for m in -r..=r {
            for n in -r..=r {
                let k = (m * m + n * n) as i64;
                if k > 0 && k <= kmax {
                    by_key.entry(k).or_default().push((m, n));
                }
            }
        }
        let mut keys: Vec<i64> = by_key.keys().cloned().collect();
        keys.sort();
        let shells = keys
            .into_iter()
            .map(|key| {
                let mut coords = by_key.remove(&key).unwrap();
                coords.sort();
                let inv = coords.iter().map(|&(m, n)| Complex64::new(scale * m as f64, scale * n as f64).inv()).collect();
                SigmaShell { key, coords, inv }
            })
            .collect();
        Self { scale, max_tail, g: eisenstein_series(scale, TAIL_ORDER), shells, tails: Mutex::new(HashMap::new()) }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn max_tail(&self) -> f64 {
        self.max_tail
    }

    /// G_4 of this lattice.
    pub fn g4(&self) -> f64 {
        self.g[4]
    }

    fn key_bound(&self, tail_r: f64) -> i64 {
        ((tail_r / self.scale).powi(2) * (1.0 + 1e-12)).floor() as i64
    }

    /// Coefficients a_j with tail(z) = Σ_j a_j z^{4(j+1)}.
    fn tail_coefficients(&self, kb: i64) -> Arc<Vec<Complex64>> {
        if let Some(c) = self.tails.lock().unwrap().get(&kb) {
            return c.clone();
        }
        let mut p4 = ComplexSum::new();
        for sh in self.shells.iter().take_while(|s| s.key <= kb) {
            for &inv in &sh.inv {
                p4 += inv.powi(4);
            }
        }
        // Orders ≥ 8: the annulus T < |λ| ≤ 3T carries everything that matters.
        let norders = TAIL_ORDER / 4;
        let mut annulus = vec![ComplexSum::new(); norders];
        let outer = 9 * kb;
        let r = (outer as f64).sqrt().floor() as i32 + 1;
        for m in -r..=r {
            for n in -r..=r {
                let k = (m * m + n * n) as i64;
                if k <= kb || k > outer {
                    continue;
                }
                let w = Complex64::new(self.scale * m as f64, self.scale * n as f64).inv().powi(4);
                let mut wk = w;
                for acc in annulus.iter_mut().skip(1) {
                    wk *= w;
                    *acc += wk;
                }
            }
        }
        let mut coeffs = Vec::with_capacity(norders);
        let s4 = Complex64::new(self.g[4], 0.0) - p4.sum();
        coeffs.push(-s4 / 4.0);
        for (j, acc) in annulus.iter().enumerate().skip(1) {
            let k = 4 * (j + 1);
            coeffs.push(-acc.sum() / k as f64);
        }
        let arc = Arc::new(coeffs);
        self.tails.lock().unwrap().insert(kb, arc.clone());
        arc
    }

    fn tail_series(&self, z: Complex64, kb: i64) -> Complex64 {
        let coeffs = self.tail_coefficients(kb);
        let w = z.powi(4);
        let mut acc = Complex64::new(0.0, 0.0);
        for c in coeffs.iter().rev() {
            acc = acc * w + c;
        }
        acc * w
    }

    fn check(&self, z: Complex64, tail_r: f64) -> Result<i64> {
        if tail_r < 4.0 * z.norm() {
            return Err(Error::TailTooSmall { tail_r, z_abs: z.norm() });
        }
        if tail_r > self.max_tail * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!("tail radius {tail_r} beyond prepared {}", self.max_tail)));
        }
        Ok(self.key_bound(tail_r))
    }

    fn tail_bound(z: Complex64, tail_r: f64) -> f64 {
        let a = z.norm();
        // |Log(1−u)+u+u²/2| ≤ |u|³/(3(1−|u|)) and Σ_{|λ|>T}|λ|^{−3} ≈ 4/T at density 2/π.
        4.0 * a.powi(3) / (3.0 * tail_r * (1.0 - a / tail_r))
    }

    /// log σ(z) with the product truncated at `tail_r` plus the analytic tail.
    pub fn log_sigma(&self, z: Complex64, tail_r: f64) -> Result<SigmaLog> {
        let kb = self.check(z, tail_r)?;
        if z.norm() < 1e-300 {
            return Err(Error::OnLattice(z));
        }
        let mut acc = ComplexSum::new();
        acc += z.ln();
        for sh in self.shells.iter().take_while(|s| s.key <= kb) {
            let mut prod = Complex64::new(1.0, 0.0);
            let mut lin = Complex64::new(0.0, 0.0);
            for &inv in &sh.inv {
                let u = z * inv;
                prod *= Complex64::new(1.0, 0.0) - u;
                lin += u + 0.5 * u * u;
            }
            if prod == Complex64::new(0.0, 0.0) {
                return Err(Error::OnLattice(z));
            }
            acc += prod.ln();
            acc += lin;
        }
        Ok(SigmaLog { partial: acc.sum(), tail: self.tail_series(z, kb), tail_bound: Self::tail_bound(z, tail_r) })
    }

    /// log(σ(z)/(z−λ₀)) for λ₀ = s(m₀+in₀), regular at z = λ₀.
    pub fn log_sigma_deflated(&self, z: Complex64, at: (i32, i32), tail_r: f64) -> Result<Complex64> {
        let kb = self.check(z, tail_r)?;
        let lambda0 = Complex64::new(self.scale * at.0 as f64, self.scale * at.1 as f64);
        let mut acc = ComplexSum::new();
        if at != (0, 0) {
            // z·(1−z/λ₀)/(z−λ₀) = −z/λ₀, with the compensator of the removed factor kept.
            let u0 = z / lambda0;
            acc += (-u0).ln();
            acc += u0 + 0.5 * u0 * u0;
        }
        for sh in self.shells.iter().take_while(|s| s.key <= kb) {
            let mut prod = Complex64::new(1.0, 0.0);
            let mut lin = Complex64::new(0.0, 0.0);
            for (&inv, &c) in sh.inv.iter().zip(&sh.coords) {
                if c == at {
                    continue;
                }
                let u = z * inv;
                prod *= Complex64::new(1.0, 0.0) - u;
                lin += u + 0.5 * u * u;
            }
            if prod == Complex64::new(0.0, 0.0) {
                return Err(Error::OnLattice(z));
            }
            acc += prod.ln();
            acc += lin;
        }
        acc += self.tail_series(z, kb);
        Ok(acc.sum())
    }

    /// Nearest lattice coordinates and the offset z − λ.
    pub fn reduce(&self, z: Complex64) -> ((i32, i32), Complex64) {
        let m = (z.re / self.scale).round();
        let n = (z.im / self.scale).round();
        let lambda = Complex64::new(self.scale * m, self.scale * n);
        ((m as i32, n as i32), z - lambda)
    }

    /// log of the quasi-periodicity factor ε_λ e^{2λ̄z₀+|λ|²}.
    fn shift_log(&self, c: (i32, i32), z0: Complex64) -> Complex64 {
        let lambda = Complex64::new(self.scale * c.0 as f64, self.scale * c.1 as f64);
        let (m, n) = (c.0 as i64, c.1 as i64);
        let odd = (m + n + m * n).rem_euclid(2) == 1;
        let mut out = 2.0 * lambda.conj() * z0 + lambda.norm_sqr();
        if odd {
            out += Complex64::new(0.0, PI);
        }
        out
    }

    /// log σ(z) through σ(z₀+λ) = ε_λ e^{2λ̄z₀+|λ|²} σ(z₀) with z₀ in the fundamental cell.
    pub fn log_sigma_reduced(&self, z: Complex64) -> Result<Complex64> {
        let (c, z0) = self.reduce(z);
        if z0.norm() == 0.0 {
            return Err(Error::OnLattice(z));
        }
        Ok(self.log_sigma(z0, CELL_TAIL)?.value() + self.shift_log(c, z0))
    }

    /// log(σ(z)/(z−λ)) for the lattice point λ nearest to z, through the same reduction.
    pub fn log_sigma_deflated_reduced(&self, z: Complex64) -> Result<((i32, i32), Complex64)> {
        let (c, z0) = self.reduce(z);
        Ok((c, self.log_sigma_deflated(z0, (0, 0), CELL_TAIL)? + self.shift_log(c, z0)))
    }

    /// Tail radius used internally for a query at modulus `a`.
    pub fn ladder_tail(a: f64) -> f64 {
        (TAIL_LADDER_STEP * ((4.0 * a + 1.0) / TAIL_LADDER_STEP).ceil()).max(CELL_TAIL)
    }
}

/// Process-wide σ evaluator, rebuilt with a larger tail capacity on demand.
pub fn shared_sigma(scale: f64, min_tail: f64) -> Arc<SquareSigma> {
    static CELL: OnceLock<Mutex<Option<Arc<SquareSigma>>>> = OnceLock::new();
    let cell = CELL.get_or_init(|| Mutex::new(None));
    let mut guard = cell.lock().unwrap();
    if let Some(s) = guard.as_ref() {
        if s.scale == scale && s.max_tail >= min_tail {
            return s.clone();
        }
    }
    let prev = guard.as_ref().filter(|s| s.scale == scale).map(|s| s.max_tail).unwrap_or(0.0);
    let cap = min_tail.max(2.0 * prev).max(4.0 * CELL_TAIL);
    let s = Arc::new(SquareSigma::new(scale, cap));
    *guard = Some(s.clone());
    s
}
