use focklattice::lattice::{square_lattice, GridSpec, Lattice, SQUARE_SCALE};
use focklattice::multiplier::*;
use focklattice::weight::WeightProfile;
use focklattice::{Complex64, Error};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn lattice(r: f64) -> Arc<Lattice> {
    Arc::new(square_lattice(r, &WeightProfile::classical()).unwrap())
}

/// z·Π (1 − z/λ)·exp(z/λ + z²/2λ²) by direct multiplication over 0 < |λ| ≤ T.
fn literal_product(l: &Lattice, z: Complex64, t: f64) -> Complex64 {
    let mut acc = z;
    for &lam in l.points.iter().skip(1) {
        if lam.norm() <= t * (1.0 + 1e-12) {
            let q = z / lam;
            acc *= (1.0 - q) * (q + 0.5 * q * q).exp();
        }
    }
    acc
}

fn random_points(n: usize, radius: f64, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let r = radius * rng.gen::<f64>().sqrt();
            Complex64::from_polar(r, rng.gen_range(0.0..std::f64::consts::TAU))
        })
        .collect()
}

#[test]
fn partial_log_matches_literal_product() {
    let l = lattice(14.0);
    for z in random_points(200, 3.0, 1) {
        let s = sigma_log(&l, z, 12.0).unwrap();
        let direct = literal_product(&l, z, 12.0);
        let rel = (s.partial.exp() - direct).norm() / direct.norm();
        assert!(rel < 1e-10, "z {z}: {rel}");
    }
}

#[test]
fn tail_bound_covers_completion() {
    let l = lattice(14.0);
    for z in random_points(50, 3.0, 2) {
        let s = sigma_log(&l, z, 12.0).unwrap();
        assert!(s.tail.norm() <= s.tail_bound, "{} > {}", s.tail.norm(), s.tail_bound);
        // Doubling the truncation moves the partial sum towards the completed value.
        let wide = sigma_log(&l, z, 24.0).unwrap();
        let far = (wide.partial - s.partial).norm();
        assert!(far <= s.tail_bound);
        assert!((wide.value() - s.value()).norm() < 1e-9 * (1.0 + s.value().norm()));
    }
}

#[test]
fn sigma_log_preconditions() {
    let l = lattice(14.0);
    assert!(matches!(sigma_log(&l, l.points[5], 20.0), Err(Error::OnLattice(_))));
    assert!(matches!(sigma_log(&l, c(4.0, 0.3), 12.0), Err(Error::TailTooSmall { .. })));
    let w = WeightProfile::classical();
    let e = Arc::new(focklattice::lattice::explicit_lattice(&[c(0.0, 0.0), c(2.0, 0.0)], &w).unwrap());
    assert!(sigma_log(&e, c(0.5, 0.5), 10.0).is_err());
}

#[test]
fn sigma_is_odd() {
    let l = lattice(14.0);
    for z in random_points(100, 3.0, 3) {
        let a = sigma_log(&l, z, 16.0).unwrap().value().exp();
        let b = sigma_log(&l, -z, 16.0).unwrap().value().exp();
        assert!((a + b).norm() <= 1e-8 * a.norm(), "{z}");
    }
}

#[test]
fn sigma_flat_at_origin() {
    let l = lattice(14.0);
    for z in [c(1e-3, 0.0), c(0.0, 1e-3), Complex64::from_polar(1e-3, 0.7)] {
        let v = sigma_log(&l, z, 16.0).unwrap().value().exp() / z;
        assert!((v - 1.0).norm() <= 1e-5);
    }
}

#[test]
fn weighted_magnitude_zero_on_lattice_and_positive_at_holes() {
    let l = lattice(14.0);
    for i in 0..l.len() {
        assert_eq!(sigma_weighted_mag(&l, l.points[i], 60.0).unwrap(), 0.0);
    }
    let hole = c(0.5 * SQUARE_SCALE, 0.5 * SQUARE_SCALE);
    let v = sigma_weighted_mag(&l, hole, 16.0).unwrap();
    let d = SQUARE_SCALE / 2f64.sqrt();
    assert!((d - 0.8862).abs() < 1e-4);
    assert!(v > 0.0 && (v / d).is_finite());
}

#[test]
fn weighted_magnitude_is_lattice_periodic() {
    let l = lattice(14.0);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let z = c(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let tail = 8.0 * (z.norm() + SQUARE_SCALE) + 8.0;
        for shift in [c(SQUARE_SCALE, 0.0), c(0.0, SQUARE_SCALE)] {
            let a = sigma_weighted_mag(&l, z, tail).unwrap();
            let b = sigma_weighted_mag(&l, z + shift, tail).unwrap();
            assert!((a - b).abs() <= 1e-6 * a, "{z}: {a} {b}");
        }
    }
}

#[test]
fn sigma_prime_values() {
    let l = lattice(14.0);
    let p0 = sigma_prime(&l, 0, 16.0).unwrap();
    assert!((p0 - 1.0).norm() < 1e-12);
    let guard = l.guard_radius();
    for i in l.indices_within(guard) {
        let lam = l.points[i];
        let lg = sigma_prime_log(&l, i, 4.0 * lam.norm() + 16.0).unwrap();
        assert!((lg.re - lam.norm_sqr()).abs() < 1e-5, "λ {lam}: {}", lg.re - lam.norm_sqr());
    }
}

#[test]
fn sigma_prime_even() {
    let l = lattice(14.0);
    let coords = l.coords.clone().unwrap();
    for (i, &(m, n)) in coords.iter().enumerate() {
        if l.points[i].norm() > 6.0 {
            continue;
        }
        let j = coords.iter().position(|&q| q == (-m, -n)).unwrap();
        let a = sigma_prime(&l, i, 32.0).unwrap();
        let b = sigma_prime(&l, j, 32.0).unwrap();
        assert!((a - b).norm() <= 1e-8 * a.norm(), "({m},{n})");
    }
}

#[test]
fn sigma_prime_matches_finite_difference_oracle() {
    let l = lattice(14.0);
    for i in l.indices_within(4.0) {
        let lam = l.points[i];
        let tail = 4.0 * lam.norm() + 20.0;
        let h = 1e-4;
        let s = |z: Complex64| sigma_log(&l, z, tail).unwrap().value().exp();
        let fd = |h: f64| (s(lam + h) - s(lam - h)) / (2.0 * h);
        let oracle = (4.0 * fd(0.5 * h) - fd(h)) / 3.0;
        let v = sigma_prime(&l, i, tail).unwrap();
        assert!((v - oracle).norm() <= 1e-5 * v.norm());
    }
}

#[test]
fn builtin_multiplier_basics() {
    let l = lattice(12.0);
    let m = Multiplier::builtin_sigma(l.clone()).unwrap();
    assert_eq!(m.source, MultiplierSource::BuiltinSigma);
    assert_eq!(m.g_second_origin, Some(c(0.0, 0.0)));
    let (lo, hi) = m.derivative_bounds;
    let rho = 1.0 / (4.0 * std::f64::consts::PI).sqrt();
    assert!((lo / rho - 1.0).abs() < 1e-5 && (hi / rho - 1.0).abs() < 1e-5, "{lo} {hi}");
    for i in 0..l.len() {
        assert_eq!(m.weighted_mag(l.points[i]).unwrap(), 0.0);
        assert!(m.g_prime(i).norm() > 0.0);
    }
    let z = c(0.4, -1.3);
    assert!((m.weighted_mag(z).unwrap() - sigma_weighted_mag(&l, z, 16.0).unwrap()).abs() < 1e-12);
}

#[test]
fn builtin_requires_classical_square_lattice() {
    let w = WeightProfile::power_with_rho_origin(1.0, 2.0).unwrap();
    let l = Arc::new(square_lattice(8.0, &w).unwrap());
    assert!(Multiplier::builtin_sigma(l).is_err());
}

#[test]
fn user_table_validation() {
    let l = lattice(6.0);
    let m = Multiplier::builtin_sigma(l.clone()).unwrap();
    let mut table: Vec<(usize, Complex64)> = (0..l.len()).map(|i| (i, m.g_prime(i))).collect();
    let u = Multiplier::user_table(l.clone(), &table, None).unwrap();
    assert_eq!(u.source, MultiplierSource::UserTable);
    for i in 0..l.len() {
        assert!((u.g_prime(i) - m.g_prime(i)).norm() <= 1e-14 * m.g_prime(i).norm());
    }
    assert!(!u.has_evaluator());
    assert!(matches!(u.log_g(c(0.3, 0.3)), Err(Error::Table(_))));

    table[3].1 = c(0.0, 0.0);
    assert!(matches!(Multiplier::user_table(l.clone(), &table, None), Err(Error::Table(_))));
    table.pop();
    table[3].1 = c(1.0, 0.0);
    assert!(matches!(Multiplier::user_table(l.clone(), &table, None), Err(Error::Table(_))));
    table.push((l.len(), c(1.0, 0.0)));
    assert!(matches!(Multiplier::user_table(l, &table, None), Err(Error::Table(_))));
}

#[test]
fn user_table_log_extends_range() {
    let l = lattice(30.0);
    let table: Vec<(usize, Complex64)> = (0..l.len()).map(|i| (i, c(l.points[i].norm_sqr(), 0.0))).collect();
    let u = Multiplier::user_table_log(l.clone(), &table, None).unwrap();
    let far = l.len() - 1;
    assert!(l.points[far].norm() > 27.0);
    assert!((u.g_prime_weighted(far).norm() - 1.0).abs() < 1e-12);
}

#[test]
fn bounds_check_envelope() {
    let l = lattice(12.0);
    let m = Multiplier::builtin_sigma(l).unwrap();
    let coarse = multiplier_bounds_check(&m, &GridSpec::square(SQUARE_SCALE, 40)).unwrap();
    let fine = multiplier_bounds_check(&m, &GridSpec::square(SQUARE_SCALE, 80)).unwrap();
    assert!(coarse.ratio.is_finite() && coarse.ratio > 1.0 && coarse.ratio < 10.0, "{coarse:?}");
    assert!((fine.c_lower / coarse.c_lower - 1.0).abs() < 0.05);
    assert!((fine.c_upper / coarse.c_upper - 1.0).abs() < 0.05);
    assert_eq!(fine.points_used, 6400);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn reduced_and_direct_logs_agree(x in -4.0..4.0f64, y in -4.0..4.0f64) {
        static M: std::sync::OnceLock<Multiplier> = std::sync::OnceLock::new();
        let m = M.get_or_init(|| Multiplier::builtin_sigma(lattice(20.0)).unwrap());
        let l = &m.lattice;
        let z = c(x, y);
        prop_assume!(l.nearest(z).1 > 1e-3);
        let a = (m.log_g(z).unwrap() - z.norm_sqr()).exp();
        let b = (sigma_log(l, z, 24.0).unwrap().value() - z.norm_sqr()).exp();
        prop_assert!((a - b).norm() <= 1e-9 * b.norm().max(1e-3));
    }
}
