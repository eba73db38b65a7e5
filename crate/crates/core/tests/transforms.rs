use focklattice::functions::{weighted_trace, Gaussian, MultiplierTimes};
use focklattice::lattice::{shells_for, square_lattice, Lattice, SQUARE_SCALE};
use focklattice::multiplier::Multiplier;
use focklattice::transforms::opnorm::{operator_norm_estimate, Operator};
use focklattice::transforms::probe::{necessity_probe, taylor_kernel_check};
use focklattice::transforms::*;
use focklattice::weight::WeightProfile;
use focklattice::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn zero() -> Complex64 {
    c(0.0, 0.0)
}

fn classical(r: f64) -> Lattice {
    square_lattice(r, &WeightProfile::classical()).unwrap()
}

/// Σ'(m+in)^{−4} = Γ(1/4)^8 / (960π²).
fn g4_closed_form() -> f64 {
    let gamma_quarter: f64 = 3.625_609_908_221_908;
    gamma_quarter.powi(8) / (960.0 * PI * PI)
}

fn ones(n: usize) -> SequenceData {
    SequenceData::new(vec![c(1.0, 0.0); n])
}

fn random_data(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

#[test]
fn symmetric_power_sums_vanish_per_shell() {
    let l = classical(30.0);
    let s = shells_for(&l, zero());
    for k in [2u32, 3] {
        let r = pv_sum(&s, |i| if i == 0 { zero() } else { l.points[i].powu(k).inv() });
        assert!(r.converged);
        for (p, sh) in r.shell_partials.iter().zip(&s.shells) {
            assert!(p.norm() <= 1e-15 * (1.0 + sh.radius.powi(-(k as i32))), "k {k}: {p}");
        }
    }
}

#[test]
fn fourth_power_sum_is_eisenstein_value() {
    let expected = g4_closed_form() / SQUARE_SCALE.powi(4);
    let mut vals = Vec::new();
    // The disc-truncated sum settles like R^{-3}, so the comparison needs large radii.
    for r in [320.0, 640.0] {
        let l = classical(r);
        let s = shells_for(&l, zero());
        let res = pv_sum(&s, |i| if i == 0 { zero() } else { l.points[i].powu(4).inv() });
        assert!(res.converged);
        assert!(res.value.im.abs() < 1e-15 && res.value.re > 0.0);
        vals.push(res.value.re);
    }
    assert!((vals[1] / vals[0] - 1.0).abs() < 1e-8, "{vals:?}");
    assert!((vals[1] / expected - 1.0).abs() < 1e-8, "{} vs {expected}", vals[1]);
}

#[test]
fn cauchy_of_zero_is_zero() {
    let l = classical(10.0);
    let t = Transforms::new(&l, PvConfig::new(10.0)).unwrap();
    let r = t.cauchy(&SequenceData::zeros(l.len()), 5);
    assert_eq!(r.value, zero());
    assert!(r.converged);
}

#[test]
fn single_support_is_exact_and_settles_at_its_shell() {
    let l = classical(10.0);
    let t = Transforms::new(&l, PvConfig::new(10.0)).unwrap();
    let (src, lp) = (17, 2);
    let mut d = vec![zero(); l.len()];
    d[src] = c(1.0, 0.0);
    let d = SequenceData::new(d);
    let r = t.cauchy(&d, lp);
    assert_eq!(r.value, (l.points[src] - l.points[lp]).inv());
    let radius = l.points[src].norm();
    for (p, rad) in r.shell_partials.iter().zip(&r.shell_radii) {
        let expect = if *rad < radius - 1e-12 { zero() } else { r.value };
        assert_eq!(*p, expect);
    }
    let b = t.ba(&d, lp);
    assert_eq!(b.value, ((l.points[lp] - l.points[src]).powu(2)).inv());
}

#[test]
fn ba_of_constant_vanishes_about_each_centre() {
    let l = classical(24.0);
    let mut cfg = PvConfig::new(24.0);
    cfg.center_mode = PvCenterMode::Center;
    let t = Transforms::new(&l, cfg).unwrap();
    let d = ones(l.len());
    for lp in [0, 3, 12, 40] {
        let r = t.ba(&d, lp);
        // Truncation at |λ| ≤ 24 breaks the symmetry about λ′ only in the outermost shells.
        let inner = r.shell_radii.iter().position(|&x| x > 24.0 - l.points[lp].norm() - 1e-9).unwrap_or(r.shell_radii.len());
        for p in &r.shell_partials[..inner] {
            assert!(p.norm() < 1e-14, "centre {lp}: {p}");
        }
    }
}

#[test]
fn ba_of_constant_origin_mode_is_stable() {
    let lp = 5;
    let vals: Vec<Complex64> = [20.0, 40.0]
        .iter()
        .map(|&r| {
            let l = classical(r);
            let t = Transforms::new(&l, PvConfig::new(r)).unwrap();
            t.ba(&ones(l.len()), lp).value
        })
        .collect();
    assert!((vals[0] - vals[1]).norm() < 1e-3 * vals[1].norm().max(1.0), "{vals:?}");
}

#[test]
fn ba_matches_dense_for_decaying_data() {
    let l = classical(24.0);
    let t = Transforms::new(&l, PvConfig::new(24.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let d: Vec<Complex64> = (0..l.len())
        .map(|i| {
            let s = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            c(s * l.rho_values[i] / (1.0 + l.points[i].norm()).powf(1.5), 0.0)
        })
        .collect();
    let d = SequenceData::new(d);
    for lp in [0, 9, 30] {
        let r = t.ba(&d, lp);
        let dense = t.dense(2, &d, lp);
        assert!((r.value - dense).norm() <= 1e-12 * r.abs_sum);
        assert!(r.absolutely_convergent);
    }
}

#[test]
fn higher_orders_are_consistent() {
    let l = classical(16.0);
    let t = Transforms::new(&l, PvConfig::new(16.0)).unwrap();
    let d = SequenceData::new(random_data(l.len(), 2));
    for lp in [0, 7] {
        assert_eq!(t.higher(&d, lp, 1, 4).unwrap().value, t.cauchy(&d, lp).value);
        assert!((t.higher(&d, lp, 2, 4).unwrap().value - t.ba(&d, lp).value).norm() < 1e-14);
    }
    let one = ones(l.len());
    assert!(t.higher(&one, 0, 3, 4).unwrap().value.norm() < 1e-15);
    let g4 = t.higher(&one, 0, 4, 4).unwrap().value;
    let s = shells_for(&l, zero());
    let direct = pv_sum(&s, |i| if i == 0 { zero() } else { l.points[i].powu(4).inv() }).value;
    assert!((g4 - direct).norm() < 1e-15);
    assert!((g4.re / (g4_closed_form() / SQUARE_SCALE.powi(4)) - 1.0).abs() < 1e-4);
    assert!(t.higher(&d, 0, 0, 4).is_err());
    assert!(t.higher(&d, 0, 5, 4).is_err());
}

#[test]
fn modified_transform_examples() {
    let l = classical(24.0);
    let t = Transforms::new(&l, PvConfig::new(24.0)).unwrap();
    assert!(t.modified_cauchy_inf(&SequenceData::zeros(l.len()), 0).is_err());
    assert_eq!(t.modified_cauchy_inf(&SequenceData::zeros(l.len()), 4).unwrap().value, zero());

    let mut d0 = vec![zero(); l.len()];
    d0[0] = c(2.0, 1.0);
    let r = t.modified_cauchy_inf(&SequenceData::new(d0.clone()), 6).unwrap();
    assert_eq!(r.value, -d0[0] / l.points[6]);

    // Bounded unimodular data: compare with a plain sum over the same truncation.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let d: Vec<Complex64> = (0..l.len()).map(|i| Complex64::from_polar(l.rho_values[i], rng.gen_range(0.0..6.3))).collect();
    let d = SequenceData::new(d);
    for lp in [1, 10, 33] {
        let shell = t.modified_cauchy_inf(&d, lp).unwrap().value;
        let dense = t.dense(0, &d, lp);
        assert!((shell - dense).norm() < 1e-12 * (1.0 + dense.norm()));
    }
}

fn sigma_multiplier(r: f64) -> Arc<Multiplier> {
    let l = Arc::new(classical(r));
    Arc::new(Multiplier::builtin_sigma(l).unwrap())
}

fn shared_m20() -> Arc<Multiplier> {
    static M: OnceLock<Arc<Multiplier>> = OnceLock::new();
    M.get_or_init(|| sigma_multiplier(20.0)).clone()
}

fn gaussian_d(m: &Multiplier, w: Complex64) -> SequenceData {
    let l = &m.lattice;
    let chat = weighted_trace(&Gaussian { w }, l);
    SequenceData::new(chat.iter().enumerate().map(|(i, v)| v / m.g_prime_weighted(i)).collect())
}

#[test]
fn modified_transform_of_trace_is_stable_in_truncation() {
    let m = shared_m20();
    let l = &m.lattice;
    let d = gaussian_d(&m, c(0.3, 0.1));
    let sup = |tail: f64| {
        let t = Transforms::new(l, PvConfig::new(tail)).unwrap();
        l.indices_within(4.0)
            .into_iter()
            .filter(|&i| i != 0)
            .map(|lp| t.modified_cauchy_inf(&d, lp).unwrap().value.norm() * l.rho_values[lp])
            .fold(0.0, f64::max)
    };
    let (a, b) = (sup(10.0), sup(20.0));
    assert!((a / b - 1.0).abs() < 1e-8, "{a} {b}");
}

#[test]
fn potentials() {
    let l = classical(24.0);
    let t = Transforms::new(&l, PvConfig::new(24.0)).unwrap();
    let n = l.len();
    assert_eq!(t.potential(&vec![0.0; n], PotentialMode::L, 3, 0.95).unwrap(), 0.0);

    let mut one = vec![0.0; n];
    one[11] = 2.5;
    let r = (l.points[11] - l.points[4]).norm();
    let rho = l.rho_values[0];
    let v = t.potential(&one, PotentialMode::L, 4, 0.95).unwrap();
    assert!((v - 2.5 * rho.powi(3) / r.powi(3)).abs() < 1e-15 * v);
    let v = t.potential(&one, PotentialMode::M(3), 4, 0.95).unwrap();
    assert!((v - 2.5 * rho.powi(4) / r.powi(4)).abs() < 1e-15 * v);

    assert!(t.potential(&one, PotentialMode::M(2), 4, 0.5).is_err());
    assert!(t.potential(&one, PotentialMode::M(3), 4, 0.5).is_ok());
}

#[test]
fn potential_of_ones_is_stable_under_doubling() {
    let sup = |r: f64| {
        let l = classical(r);
        let t = Transforms::new(&l, PvConfig::new(r)).unwrap();
        let ones = vec![1.0; l.len()];
        l.indices_within(5.0).into_iter().map(|lp| t.potential(&ones, PotentialMode::L, lp, 0.95).unwrap()).fold(0.0, f64::max)
    };
    let (a, b) = (sup(15.0), sup(30.0));
    assert!((b / a - 1.0).abs() < 0.05, "{a} {b}");
}

#[test]
fn weighted_norms_of_sequences() {
    let d = SequenceData::new(vec![c(3.0, 4.0), c(0.0, -1.0)]);
    let rho = [0.5, 2.0];
    assert!((d.weighted_norm(1.0, &rho) - 10.5).abs() < 1e-14);
    assert!((d.weighted_norm(2.0, &rho) - (100.0f64 + 0.25).sqrt()).abs() < 1e-14);
    assert_eq!(d.weighted_norm(f64::INFINITY, &rho), 10.0);
    assert_eq!(d.weighted_norm(1.0, &rho), d.weighted_norm(1.0, &rho));
}

#[test]
fn transforms_need_tail_inside_lattice() {
    let l = classical(10.0);
    assert!(Transforms::new(&l, PvConfig::new(12.0)).is_err());
    assert!(Transforms::new(&l, PvConfig::new(0.0)).is_err());
}

#[test]
fn operator_norm_examples() {
    let w = WeightProfile::classical();
    let single = focklattice::lattice::explicit_lattice(&[zero()], &w).unwrap();
    for op in [Operator::B, Operator::L, Operator::M(2)] {
        for p in [1.0, 2.0, f64::INFINITY] {
            let r = operator_norm_estimate(&single, op, &[1], p, 2, 0).unwrap();
            assert_eq!(r.norms, vec![0.0]);
        }
    }
    let l = classical(22.0);
    let b = operator_norm_estimate(&l, Operator::B, &[100, 300, 800], 2.0, 2, 0).unwrap();
    assert!(b.growth_ratio <= 1.1, "{b:?}");
    for op in [Operator::L, Operator::M(3)] {
        let one = operator_norm_estimate(&l, op, &[100, 800], 1.0, 0, 0).unwrap();
        let inf = operator_norm_estimate(&l, op, &[100, 800], f64::INFINITY, 0, 0).unwrap();
        let two = operator_norm_estimate(&l, op, &[100, 800], 2.0, 2, 0).unwrap();
        for k in 0..2 {
            assert!(two.norms[k] <= one.norms[k].max(inf.norms[k]) * 1.1);
        }
    }
    assert!(operator_norm_estimate(&l, Operator::B, &[100], 3.0, 0, 0).is_err());
    assert!(operator_norm_estimate(&l, Operator::B, &[300, 100], 1.0, 0, 0).is_err());
    assert!(operator_norm_estimate(&l, Operator::B, &[l.len() + 1], 1.0, 0, 0).is_err());
}

#[test]
fn taylor_identity_examples() {
    let lam = c(1.3, -0.4);
    let r = taylor_kernel_check(zero(), lam, zero(), 3).unwrap();
    assert_eq!(r.abs, 0.0);
    let z = lam * 0.99 * Complex64::from_polar(1.0, 0.3);
    for n in 2..=6 {
        assert!(taylor_kernel_check(z, lam, zero(), n).unwrap().rel <= 1e-8);
    }
    assert!(taylor_kernel_check(c(1.0, 0.0), c(1.0, 0.0), zero(), 2).is_err());
    assert!(taylor_kernel_check(c(1.0, 0.0), c(0.5, 0.0), c(0.5, 0.0), 2).is_err());
}

#[test]
fn necessity_probe_with_f_equal_g() {
    let m = shared_m20();
    let l = &m.lattice;
    let t = Transforms::new(l, PvConfig::new(20.0)).unwrap();
    let f = MultiplierTimes { g: m.clone(), poly: vec![c(1.0, 0.0)] };
    let centers = l.indices_within(3.0);
    let rep = necessity_probe(&t, &m, &f, 2.0, 0.2, 3, &centers).unwrap();
    for s in &rep.probe_sums {
        assert!((s / centers.len() as f64 - 1.0).abs() < 1e-10);
    }
    for row in &rep.recovered {
        assert!((row[0] + 1.0).norm() < 1e-10);
        for v in &row[1..] {
            assert!(v.norm() < 1e-10);
        }
    }
}

#[test]
fn necessity_probe_recovers_gaussian_condition_sums() {
    let m = shared_m20();
    let l = &m.lattice;
    let t = Transforms::new(l, PvConfig::new(20.0)).unwrap();
    let centers = l.indices_within(3.0);
    for n in [1, 2, 4] {
        let rep = necessity_probe(&t, &m, &Gaussian { w: c(0.3, 0.1) }, 2.0, 0.5, n, &centers).unwrap();
        for e in &rep.max_abs_error {
            assert!(*e < 1e-6, "N {n}: {:?}", rep.max_abs_error);
        }
        let d = gaussian_d(&m, c(0.3, 0.1));
        for (row, &lp) in rep.direct.iter().zip(&centers) {
            assert_eq!(row[0], t.cauchy(&d, lp).value);
        }
    }
}

#[test]
fn necessity_probe_rejects_bad_delta() {
    let m = shared_m20();
    let t = Transforms::new(&m.lattice, PvConfig::new(20.0)).unwrap();
    let f = Gaussian { w: zero() };
    let half = m.lattice.delta_sep / 2.0;
    assert!(necessity_probe(&t, &m, &f, 2.0, half, 2, &[0]).is_err());
    assert!(necessity_probe(&t, &m, &f, 2.0, 0.0, 2, &[0]).is_err());
    assert!(necessity_probe(&t, &m, &f, 2.0, 0.1, 0, &[0]).is_err());
}

fn lattice12() -> &'static Lattice {
    static L: OnceLock<Lattice> = OnceLock::new();
    L.get_or_init(|| classical(12.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn transforms_are_linear(seed in 0u64..1000, a in -2.0..2.0f64, b in -2.0..2.0f64, lp in 1usize..60) {
        let l = lattice12();
        let t = Transforms::new(l, PvConfig::new(12.0)).unwrap();
        let (x, y) = (random_data(l.len(), seed), random_data(l.len(), seed + 7919));
        let (ca, cb) = (c(a, 0.5), c(b, -1.0));
        let mix = SequenceData::new(x.iter().zip(&y).map(|(u, v)| ca * u + cb * v).collect());
        let (x, y) = (SequenceData::new(x), SequenceData::new(y));
        let checks = [
            (t.cauchy(&mix, lp), t.cauchy(&x, lp), t.cauchy(&y, lp)),
            (t.ba(&mix, lp), t.ba(&x, lp), t.ba(&y, lp)),
            (t.higher(&mix, lp, 3, 3).unwrap(), t.higher(&x, lp, 3, 3).unwrap(), t.higher(&y, lp, 3, 3).unwrap()),
            (t.modified_cauchy_inf(&mix, lp).unwrap(), t.modified_cauchy_inf(&x, lp).unwrap(), t.modified_cauchy_inf(&y, lp).unwrap()),
        ];
        for (m, u, v) in checks {
            let scale = m.abs_sum + u.abs_sum + v.abs_sum;
            prop_assert!((m.value - (ca * u.value + cb * v.value)).norm() <= 1e-13 * scale);
        }
    }

    #[test]
    fn taylor_identity_holds(zr in -3.0..3.0f64, zi in -3.0..3.0f64, lr in -3.0..3.0f64, li in -3.0..3.0f64, n in 2u32..=6) {
        let (z, lam) = (c(zr, zi), c(lr, li));
        prop_assume!(lam.norm() > 0.1 && (z - lam).norm() > 0.1 && z.norm() < 0.9 * lam.norm());
        prop_assert!(taylor_kernel_check(z, lam, zero(), n).unwrap().rel <= 1e-12);
    }

    #[test]
    fn odd_sums_of_constants_vanish_by_shell(k in prop::sample::select(vec![1u32, 3, 5])) {
        let l = lattice12();
        let s = shells_for(l, zero());
        let r = pv_sum(&s, |i| if i == 0 { zero() } else { l.points[i].powu(k).inv() });
        for p in &r.shell_partials {
            prop_assert!(p.norm() < 1e-14);
        }
    }
}
