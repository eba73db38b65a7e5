//! Entire functions used as test data, evaluated in φ-weighted form to avoid overflow.

use crate::lattice::Lattice;
use crate::multiplier::Multiplier;
use num_complex::Complex64;
use std::sync::Arc;

pub trait SpaceFunction: Send + Sync {
    /// f(z)e^{−φ} for the supplied value φ = φ(z).
    fn weighted(&self, z: Complex64, phi: f64) -> Complex64;

    fn eval(&self, z: Complex64) -> Complex64 {
        self.weighted(z, 0.0)
    }
}

/// f_w(z) = e^{2w̄z−|w|²}, so that |f_w(z)|e^{−|z|²} = e^{−|z−w|²}.
#[derive(Debug, Clone, Copy)]
pub struct Gaussian {
    pub w: Complex64,
}

impl SpaceFunction for Gaussian {
    fn weighted(&self, z: Complex64, phi: f64) -> Complex64 {
        (2.0 * self.w.conj() * z - self.w.norm_sqr() - phi).exp()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Constant(pub Complex64);

impl SpaceFunction for Constant {
    fn weighted(&self, _z: Complex64, phi: f64) -> Complex64 {
        self.0 * (-phi).exp()
    }
}

/// The multiplier itself times a polynomial (coefficients in ascending order).
pub struct MultiplierTimes {
    pub g: Arc<Multiplier>,
    pub poly: Vec<Complex64>,
}

impl SpaceFunction for MultiplierTimes {
    fn weighted(&self, z: Complex64, phi: f64) -> Complex64 {
        let p = self.poly.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c);
        let shift = phi - self.g.lattice.weight.phi(z);
        match self.g.g_weighted(z) {
            Ok(v) => v * (-shift).exp() * p,
            Err(_) => Complex64::new(f64::NAN, f64::NAN),
        }
    }
}

/// Any closure z ↦ f(z).
pub struct Closure<F>(pub F);

impl<F: Fn(Complex64) -> Complex64 + Send + Sync> SpaceFunction for Closure<F> {
    fn weighted(&self, z: Complex64, phi: f64) -> Complex64 {
        (self.0)(z) * (-phi).exp()
    }
}

/// Weighted trace ĉ_λ = f(λ)e^{−φ(λ)} on every lattice point.
pub fn weighted_trace(f: &dyn SpaceFunction, l: &Lattice) -> Vec<Complex64> {
    l.points.iter().map(|&p| f.weighted(p, l.weight.phi(p))).collect()
}
