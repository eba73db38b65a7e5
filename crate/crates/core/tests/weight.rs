use focklattice::weight::*;
use focklattice::{Complex64, Error};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Five-point finite-difference Laplacian of φ.
fn fd_laplacian(w: &WeightProfile, z: Complex64, h: f64) -> f64 {
    let f = |d: Complex64| w.phi(z + d);
    (f(c(h, 0.0)) + f(c(-h, 0.0)) + f(c(0.0, h)) + f(c(0.0, -h)) - 4.0 * f(c(0.0, 0.0))) / (h * h)
}

/// Polar midpoint rule for μ(D(0, r)) of a radial Laplacian.
fn brute_mu_origin(w: &WeightProfile, r: f64) -> f64 {
    let n = 200_000;
    let h = r / n as f64;
    (0..n)
        .map(|k| {
            let s = (k as f64 + 0.5) * h;
            2.0 * PI * s * w.laplacian(c(s, 0.0)).unwrap() * h
        })
        .sum()
}

#[test]
fn laplacian_examples() {
    let cl = WeightProfile::classical();
    assert_eq!(cl.laplacian(c(3.0, 4.0)).unwrap(), 4.0);
    let p2 = WeightProfile::power(2.0, 1.0).unwrap();
    assert!((p2.laplacian(c(0.0, 1.0)).unwrap() - 4.0).abs() < 1e-14);
    let p1 = WeightProfile::power(1.0, 1.0).unwrap();
    let z = c(4.0, 0.0);
    assert!((p1.laplacian(z).unwrap() - 0.25).abs() < 1e-14);
    assert!((fd_laplacian(&p1, z, 1e-3) - 0.25).abs() < 1e-6);
}

#[test]
fn laplacian_origin_singular_below_two() {
    let w = WeightProfile::power(1.0, 1.0).unwrap();
    assert!(matches!(w.laplacian(c(0.0, 0.0)), Err(Error::OriginSingularity { .. })));
}

#[test]
fn mu_disc_examples() {
    let cl = WeightProfile::classical();
    assert!((cl.mu_disc(c(2.0, -1.0), 1.0).unwrap() - 4.0 * PI).abs() < 1e-12);
    assert!((cl.mu_disc(c(5.0, 0.0), 2.0).unwrap() - 16.0 * PI).abs() < 1e-12);
    let p1 = WeightProfile::power(1.0, 1.0).unwrap();
    let v = p1.mu_disc(c(0.0, 0.0), 1.0).unwrap();
    assert!((v - 2.0 * PI).abs() < 1e-10);
    assert!((brute_mu_origin(&p1, 1.0) - 2.0 * PI).abs() < 1e-6);
}

#[test]
fn mu_disc_off_centre_matches_brute_force() {
    // Cartesian midpoint oracle on a disc that straddles the origin singularity loosely.
    let w = WeightProfile::power(0.5, 1.0).unwrap();
    let (a, r) = (c(1.5, 0.5), 1.0);
    let n = 1500;
    let h = 2.0 * r / n as f64;
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let z = a + c(-r + (i as f64 + 0.5) * h, -r + (j as f64 + 0.5) * h);
            if (z - a).norm() <= r {
                acc += w.laplacian(z).unwrap() * h * h;
            }
        }
    }
    let exact = w.mu_disc(a, r).unwrap();
    assert!((acc / exact - 1.0).abs() < 2e-3, "{acc} vs {exact}");
}

#[test]
fn rho_examples() {
    let cl = WeightProfile::classical();
    let expected = 1.0 / (4.0 * PI).sqrt();
    for z in [c(0.0, 0.0), c(7.0, -3.0)] {
        assert!((cl.rho(z).unwrap() - expected).abs() < 1e-14);
    }
    let p1 = WeightProfile::power_with_rho_origin(1.0, 2.0).unwrap();
    let ratios: Vec<f64> = [50.0, 100.0, 150.0, 200.0].iter().map(|&s| p1.rho_radial(s).unwrap() / s.sqrt()).collect();
    let (lo, hi) = ratios.iter().fold((f64::MAX, 0.0f64), |(l, h), &r| (l.min(r), h.max(r)));
    assert!(hi / lo < 1.05, "{ratios:?}");
}

#[test]
fn normalisation_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for w in [
        WeightProfile::classical(),
        WeightProfile::power_with_rho_origin(0.5, 2.0).unwrap(),
        WeightProfile::power_with_rho_origin(5.0, 2.0).unwrap(),
    ] {
        for _ in 0..100 {
            let z = c(rng.gen_range(-30.0..30.0), rng.gen_range(-30.0..30.0));
            let r = w.rho(z).unwrap();
            assert!((w.mu_disc(z, r).unwrap() - 1.0).abs() < 1e-10, "gamma {} z {z}", w.gamma);
        }
    }
}

#[test]
fn mu_disc_strictly_increasing() {
    let w = WeightProfile::power_with_rho_origin(0.5, 2.0).unwrap();
    let z = c(3.0, -2.0);
    let vals: Vec<f64> = (1..40).map(|k| w.mu_disc(z, 0.25 * k as f64).unwrap()).collect();
    assert!(vals.windows(2).all(|v| v[1] > v[0]));
}

#[test]
fn doubling_constant_is_finite() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for w in [WeightProfile::power_with_rho_origin(0.5, 2.0).unwrap(), WeightProfile::power_with_rho_origin(5.0, 2.0).unwrap()] {
        let mut worst: f64 = 0.0;
        for _ in 0..300 {
            let z = c(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0));
            let r = 10f64.powf(rng.gen_range(-2.0..2.0));
            worst = worst.max(w.mu_disc(z, 2.0 * r).unwrap() / w.mu_disc(z, r).unwrap());
        }
        // |z|^{γ−2} densities give at most 2^{γ} or so, times a modest factor near the origin.
        assert!(worst.is_finite() && worst < 64.0, "gamma {}: {worst}", w.gamma);
    }
}

#[test]
fn classical_and_power_two_agree() {
    let cl = WeightProfile::classical();
    let p2 = WeightProfile::power(2.0, 1.0).unwrap();
    let z = c(1.3, -0.4);
    assert!((cl.phi(z) - p2.phi(z)).abs() < 1e-12);
    assert!((cl.laplacian(z).unwrap() - p2.laplacian(z).unwrap()).abs() < 1e-10);
    assert!((cl.mu_disc(z, 2.0).unwrap() - p2.mu_disc(z, 2.0).unwrap()).abs() < 1e-10 * 16.0 * PI);
    assert!((cl.rho(z).unwrap() - p2.rho(z).unwrap()).abs() < 1e-10);
    let radii = [0.5, 1.0, 2.0, 4.0, 8.0];
    let a = ap_probe(&cl, 4.0 / 3.0, &radii, None).unwrap();
    let b = ap_probe(&p2, 4.0 / 3.0, &radii, None).unwrap();
    for (x, y) in a.ratios.iter().zip(&b.ratios) {
        assert!((x - y).abs() < 1e-6, "{x} {y}");
    }
    let ta = estimate_t(&cl, &sample_pairs(&cl, 2000, 0).unwrap()).unwrap();
    let tb = estimate_t(&p2, &sample_pairs(&p2, 2000, 0).unwrap()).unwrap();
    assert_eq!(choose_n(&ta), choose_n(&tb));
    assert!((ta.t_fit - tb.t_fit).abs() < 1e-6);
}

#[test]
fn ap_probe_examples() {
    let radii: Vec<f64> = (-1..=10).map(|k| 2f64.powi(k)).collect();
    let cl = ap_probe(&WeightProfile::classical(), 4.0 / 3.0, &radii, None).unwrap();
    assert!(cl.is_ap && cl.fitted_exponent.abs() < 1e-9);
    assert!(cl.ratios.iter().all(|r| (r - 1.0).abs() < 1e-9));

    let w5 = WeightProfile::power_with_rho_origin(5.0, 2.0).unwrap();
    let origin = [c(0.0, 0.0)];
    let r = ap_probe(&w5, 4.0 / 3.0, &radii, Some(&origin)).unwrap();
    assert!((r.fitted_exponent - 0.25).abs() < 0.05, "{}", r.fitted_exponent);
    assert!(!r.is_ap);

    let r2 = ap_probe(&w5, 2.0, &radii, None).unwrap();
    assert!(r2.ratios.iter().all(|v| (v - 1.0).abs() < 1e-9));
}

#[test]
fn ap_ratios_symmetric_in_conjugate_exponent() {
    let w = WeightProfile::power_with_rho_origin(0.5, 2.0).unwrap();
    let radii = [1.0, 4.0, 16.0, 64.0];
    let centres = [c(0.0, 0.0), c(10.0, 3.0)];
    let p = 1.5;
    let a = ap_probe(&w, p, &radii, Some(&centres)).unwrap();
    let b = ap_probe(&w, p / (p - 1.0), &radii, Some(&centres)).unwrap();
    for (x, y) in a.ratios.iter().zip(&b.ratios) {
        assert!((x / y - 1.0).abs() < 1e-7, "{x} {y}");
    }
}

#[test]
fn ap_probe_rejects_bad_input() {
    let w = WeightProfile::classical();
    assert!(ap_probe(&w, 1.0, &[1.0], None).is_err());
    assert!(ap_probe(&w, 3.0, &[2.0, 1.0], None).is_err());
}

#[test]
fn doubling_exponent_examples() {
    let cl = WeightProfile::classical();
    let t = estimate_t(&cl, &sample_pairs(&cl, 10_000, 0).unwrap()).unwrap();
    assert!((t.t_fit - (1.0 - FIT_SLACK)).abs() < 1e-12 && t.t_bound.is_none());

    let g1 = WeightProfile::power_with_rho_origin(1.0, 2.0).unwrap();
    let t1 = estimate_t(&g1, &sample_pairs(&g1, 10_000, 0).unwrap()).unwrap();
    assert!(t1.t_fit <= 0.5 + FIT_SLACK, "{t1:?}");

    let g05 = WeightProfile::power_with_rho_origin(0.5, 2.0).unwrap();
    let t05 = estimate_t(&g05, &sample_pairs(&g05, 10_000, 0).unwrap()).unwrap();
    assert_eq!(t05.t_bound, Some(0.25));
    assert!(t05.t_fit <= 0.25 + FIT_SLACK);
    assert_eq!(choose_n(&t05), 5);
}

#[test]
fn estimate_t_needs_spread() {
    let w = WeightProfile::power_with_rho_origin(1.0, 2.0).unwrap();
    let pairs = vec![(c(0.0, 0.0), c(10.0, 0.0)), (c(1.0, 0.0), c(12.0, 0.0))];
    assert!(matches!(estimate_t(&w, &pairs), Err(Error::SampleSpread(_))));
}

#[test]
fn choose_n_examples() {
    assert_eq!(choose_n_for(0.6), 2);
    assert_eq!(choose_n_for(0.5), 3);
    assert_eq!(choose_n_for(0.25), 5);
}

#[test]
fn rho_table_tracks_direct_rho() {
    let w = WeightProfile::power_with_rho_origin(0.5, 2.0).unwrap();
    let t = RhoTable::new(&w, 300.0, 1500).unwrap();
    for s in [0.0, 0.1, 2.0, 35.0, 280.0] {
        assert!((t.rho_radial(s) / w.rho_radial(s).unwrap() - 1.0).abs() < 1e-7);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn rho_is_one_lipschitz(x1 in -40.0..40.0f64, y1 in -40.0..40.0f64, x2 in -40.0..40.0f64, y2 in -40.0..40.0f64) {
        let w = WeightProfile::power_with_rho_origin(0.5, 2.0).unwrap();
        let (z, zeta) = (c(x1, y1), c(x2, y2));
        let d = (w.rho(z).unwrap() - w.rho(zeta).unwrap()).abs();
        prop_assert!(d <= (z - zeta).norm() + 1e-12);
    }

    #[test]
    fn rho_is_one_lipschitz_steep(x1 in -20.0..20.0f64, y1 in -20.0..20.0f64, dx in -1.0..1.0f64, dy in -1.0..1.0f64) {
        let w = WeightProfile::power_with_rho_origin(5.0, 2.0).unwrap();
        let (z, zeta) = (c(x1, y1), c(x1 + dx, y1 + dy));
        let d = (w.rho(z).unwrap() - w.rho(zeta).unwrap()).abs();
        prop_assert!(d <= (z - zeta).norm() + 1e-12);
    }
}
