//! Neumaier-compensated accumulators for real and complex sums.

use num_complex::Complex64;
use std::ops::AddAssign;

#[derive(Debug, Default, Clone, Copy)]
pub struct NeumaierSum {
    s: f64,
    c: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn sum(&self) -> f64 {
        self.s + self.c
    }
}

impl AddAssign<f64> for NeumaierSum {
    #[inline]
    fn add_assign(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }
}

impl AddAssign<NeumaierSum> for NeumaierSum {
    fn add_assign(&mut self, rhs: NeumaierSum) {
        *self += rhs.s;
        *self += rhs.c;
    }
}

/// Componentwise Neumaier accumulation of complex terms.
#[derive(Debug, Default, Clone, Copy)]
pub struct ComplexSum {
    re: NeumaierSum,
    im: NeumaierSum,
}

impl ComplexSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn sum(&self) -> Complex64 {
        Complex64::new(self.re.sum(), self.im.sum())
    }
}

impl AddAssign<Complex64> for ComplexSum {
    #[inline]
    fn add_assign(&mut self, z: Complex64) {
        self.re += z.re;
        self.im += z.im;
    }
}

impl AddAssign<ComplexSum> for ComplexSum {
    fn add_assign(&mut self, rhs: ComplexSum) {
        self.re += rhs.re;
        self.im += rhs.im;
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut acc = NeumaierSum::new();
    for x in xs {
        acc += x;
    }
    acc.sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_small_terms_next_to_huge_ones() {
        let s = compensated_sum([1e100, 1.0, -1e100]);
        assert_eq!(s, 1.0);
    }

    #[test]
    fn complex_sum_cancels() {
        let mut acc = ComplexSum::new();
        acc += Complex64::new(1e17, -1e17);
        acc += Complex64::new(3.0, 2.0);
        acc += Complex64::new(-1e17, 1e17);
        assert_eq!(acc.sum(), Complex64::new(3.0, 2.0));
    }
}
