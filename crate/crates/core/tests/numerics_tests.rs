//! Numerics module tests. Independent oracles (bisection root finder,
//! sign-change counter, series/identity checks) are defined first and
//! the library is tested against them.

use feedbacklab::error::Error;
use feedbacklab::numerics::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

/// Bisection oracle: root of `f` in `[lo, hi]` (requires a sign change),
/// to absolute tolerance `tol`.
fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut flo = f(lo);
    assert!(
        flo * f(hi) <= 0.0,
        "bisection oracle needs a sign change on [{lo}, {hi}]"
    );
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if flo * fm < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    0.5 * (lo + hi)
}

/// Counts distinct sign-change-bracketed roots of the polynomial on a
/// dense grid over [-radius, radius]; a lower bound on the number of
/// distinct real roots that is exact for simple roots separated by more
/// than the cell width.
fn sign_change_count(c: &QuarticCoeffs, radius: f64, cells: usize) -> usize {
    let mut count = 0;
    let step = 2.0 * radius / cells as f64;
    let mut prev = c.eval(-radius);
    for i in 1..=cells {
        let x = -radius + step * i as f64;
        let f = c.eval(x);
        if prev == 0.0 || prev * f < 0.0 {
            count += 1;
        }
        prev = f;
    }
    count
}

// ---------------------------------------------------------------------------
// Capacity / dispersion
// ---------------------------------------------------------------------------

#[test]
fn capacity_goldens() {
    assert_eq!(gaussian_capacity(Snr::new(0.0).unwrap()), 0.0);
    assert!((gaussian_capacity(Snr::new(1.0).unwrap()) - 0.5 * 2.0f64.ln()).abs() < 1e-15);
    assert!((gaussian_capacity(Snr::new(3.0).unwrap()) - 0.5 * 4.0f64.ln()).abs() < 1e-15);
    // Printed-constant goldens.
    assert!((gaussian_capacity(Snr::new(1.0).unwrap()) - 0.346_573_590_279_972_7).abs() < 1e-12);
    assert!((gaussian_capacity(Snr::new(3.0).unwrap()) - 0.693_147_180_559_945_3).abs() < 1e-12);
}

#[test]
fn dispersion_goldens() {
    assert_eq!(gaussian_dispersion(Snr::new(0.0).unwrap()), 0.0);
    assert!((gaussian_dispersion(Snr::new(1.0).unwrap()) - 0.375).abs() < 1e-15);
    assert!((gaussian_dispersion(Snr::new(1e6).unwrap()) - 0.5).abs() < 1e-5);
}

#[test]
fn snr_rejects_invalid() {
    assert!(matches!(Snr::new(-0.1), Err(Error::Domain(_))));
    assert!(Snr::new(f64::NAN).is_err());
    assert!(Snr::new(f64::INFINITY).is_err());
}

#[test]
fn capacity_and_dispersion_monotone_on_grid() {
    let mut prev_c = -1.0;
    let mut prev_v = -1.0;
    for i in 0..10_000 {
        let x = 100.0 * i as f64 / 9_999.0;
        let snr = Snr::new(x).unwrap();
        let c = gaussian_capacity(snr);
        let v = gaussian_dispersion(snr);
        assert!(c > prev_c || (i == 0 && c >= prev_c));
        assert!(v > prev_v || (i == 0 && v >= prev_v));
        prev_c = c;
        prev_v = v;
    }
}

// ---------------------------------------------------------------------------
// Normal distribution utilities
// ---------------------------------------------------------------------------

#[test]
fn normal_basics() {
    assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
    assert!(normal_quantile(0.5).unwrap().abs() < 1e-14);
    // Q(1.96) golden from an erfc evaluation at higher working precision.
    assert!((q_function(1.96) - 0.024_997_895_148_220_43).abs() < 1e-10);
    assert!(normal_quantile(0.0).is_err());
    assert!(normal_quantile(1.0).is_err());
}

#[test]
fn quantile_roundtrip_accuracy() {
    for i in 1..=999 {
        let p = i as f64 / 1000.0;
        let x = normal_quantile(p).unwrap();
        assert!(
            (normal_cdf(x) - p).abs() < 1e-10,
            "roundtrip failed at p = {p}"
        );
    }
    // Deep tails.
    for &p in &[1e-10, 1e-8, 1e-4, 1.0 - 1e-4, 1.0 - 1e-8] {
        let x = normal_quantile(p).unwrap();
        assert!((normal_cdf(x) - p).abs() < 1e-12 + 1e-6 * p.min(1.0 - p));
    }
}

#[test]
fn q_function_chernoff_dominated() {
    for i in 0..=500 {
        let u = i as f64 * 0.02;
        assert!(q_function(u) <= (-0.5 * u * u).exp() + 1e-15);
    }
}

// ---------------------------------------------------------------------------
// Nested log / exp
// ---------------------------------------------------------------------------

#[test]
fn nested_log_exp_basics() {
    assert!((nested_log(1, std::f64::consts::E).unwrap() - 1.0).abs() < 1e-12);
    let ee = std::f64::consts::E.exp();
    assert!((nested_log(2, ee).unwrap() - 1.0).abs() < 1e-12);
    assert!((nested_exp(3, 0.0) - std::f64::consts::E.exp()).abs() < 1e-10);
}

#[test]
fn nested_log_exp_inverse() {
    for k in 1..=4u32 {
        for &t in &[0.1, 0.5, 1.0, 1.5] {
            let x = nested_exp(k, t);
            if x.is_finite() {
                let back = nested_log(k, x).unwrap();
                assert!(
                    (back - t).abs() <= 1e-9 * t.abs().max(1.0),
                    "k={k} t={t} back={back}"
                );
            }
        }
    }
}

#[test]
fn nested_log_reports_failing_level() {
    // ln(ln(1.5)) ok at level 2, but level 3 sees a negative argument.
    match nested_log(3, 1.5) {
        Err(Error::NestedLogDomain { level, levels }) => {
            assert_eq!(levels, 3);
            assert_eq!(level, 3);
        }
        other => panic!("expected nested-log domain error, got {other:?}"),
    }
    match nested_log(2, 0.5) {
        Err(Error::NestedLogDomain { level, .. }) => assert_eq!(level, 2),
        other => panic!("expected level-2 failure, got {other:?}"),
    }
}

// ---------------------------------------------------------------------------
// Quartic solver
// ---------------------------------------------------------------------------

#[test]
fn quartic_simple_cases() {
    // z^4 - 1: real roots -1, 1.
    let c = QuarticCoeffs::new(-1.0, 0.0, 0.0, 0.0, 1.0);
    let roots = solve_quartic_real(&c).unwrap();
    assert_eq!(roots.len(), 2);
    assert!((roots[0] + 1.0).abs() < 1e-9 && (roots[1] - 1.0).abs() < 1e-9);

    // z^4 = 0: quadruple root at 0.
    let c = QuarticCoeffs::new(0.0, 0.0, 0.0, 0.0, 1.0);
    let roots = solve_quartic_real(&c).unwrap();
    assert_eq!(roots.len(), 4);
    assert!(roots.iter().all(|r| r.abs() < 1e-9));

    // All-zero input.
    assert!(matches!(
        solve_quartic_real(&QuarticCoeffs::new(0.0, 0.0, 0.0, 0.0, 0.0)),
        Err(Error::Degenerate(_))
    ));

    // Nonzero constant: no roots.
    assert!(solve_quartic_real(&QuarticCoeffs::new(3.0, 0.0, 0.0, 0.0, 0.0))
        .unwrap()
        .is_empty());

    // Degenerate degrees.
    let lin = solve_quartic_real(&QuarticCoeffs::new(-6.0, 2.0, 0.0, 0.0, 0.0)).unwrap();
    assert_eq!(lin.len(), 1);
    assert!((lin[0] - 3.0).abs() < 1e-9);
    let quad = solve_quartic_real(&QuarticCoeffs::new(2.0, -3.0, 1.0, 0.0, 0.0)).unwrap();
    assert_eq!(quad.len(), 2);
    assert!((quad[0] - 1.0).abs() < 1e-9 && (quad[1] - 2.0).abs() < 1e-9);
}

#[test]
fn quartic_symmetric_correlation_equation_vs_bisection() {
    // z^4 - 4z^2 - 2z + 1 = 0, the symmetric two-user case.
    let c = QuarticCoeffs::new(1.0, -2.0, -4.0, 0.0, 1.0);
    let oracle = bisect(|z| c.eval(z), 0.0, 1.0, 1e-12);
    let roots = solve_quartic_real(&c).unwrap();
    let in_unit = largest_root_in_unit_interval(&roots).unwrap();
    assert!(
        (in_unit - oracle).abs() < 1e-9,
        "solver {in_unit} vs oracle {oracle}"
    );
}

#[test]
fn quartic_random_residuals_and_root_counts() {
    let mut rng = ChaCha12Rng::seed_from_u64(0xFEED_0001);
    for _ in 0..10_000 {
        let a: [f64; 5] = std::array::from_fn(|_| rng.gen_range(-10.0..10.0));
        let c = QuarticCoeffs { a };
        if a.iter().all(|&x| x == 0.0) {
            continue;
        }
        let roots = solve_quartic_real(&c).unwrap();
        for &r in &roots {
            let scale: f64 = a
                .iter()
                .enumerate()
                .map(|(j, &coeff)| coeff.abs() * r.abs().powi(j as i32))
                .sum::<f64>()
                .max(1.0);
            assert!(
                c.eval(r).abs() <= 1e-9 * scale,
                "residual too large at root {r} for {a:?}"
            );
        }
        // Distinct-root count vs sign-change oracle (oracle only sees
        // simple roots, so it lower-bounds distinct roots).
        let deg = (0..5).rev().find(|&j| a[j] != 0.0).unwrap();
        if deg > 0 {
            let radius = 1.0
                + (0..deg)
                    .map(|j| (a[j] / a[deg]).abs())
                    .fold(0.0f64, f64::max);
            let oracle_count = sign_change_count(&c, radius, 40_000);
            let mut distinct: Vec<f64> = Vec::new();
            for &r in &roots {
                if distinct
                    .iter()
                    .all(|&d| (d - r).abs() > 1e-6 * (1.0 + r.abs()))
                {
                    distinct.push(r);
                }
            }
            assert!(
                distinct.len() >= oracle_count,
                "missed roots: solver {distinct:?} vs {oracle_count} sign changes for {a:?}"
            );
        }
    }
}

#[test]
fn quartic_root_continuity_under_coefficient_drift() {
    // Perturb the symmetric correlation quartic by d/n per coefficient
    // and fit the drift constant c in |z_n - z*| <= c/n.
    let base = QuarticCoeffs::new(1.0, -2.0, -4.0, 0.0, 1.0);
    let z_star =
        largest_root_in_unit_interval(&solve_quartic_real(&base).unwrap()).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(0xFEED_0002);
    let mut max_c = 0.0f64;
    for _ in 0..1_000 {
        let d: [f64; 5] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        for exp in 2..=6u32 {
            let n = 10f64.powi(exp as i32);
            let a: [f64; 5] = std::array::from_fn(|j| base.a[j] + d[j] / n);
            let roots = solve_quartic_real(&QuarticCoeffs { a }).unwrap();
            let nearest = roots
                .iter()
                .copied()
                .min_by(|x, y| {
                    (x - z_star).abs().partial_cmp(&(y - z_star).abs()).unwrap()
                })
                .expect("perturbed quartic lost its real root");
            let c_fit = (nearest - z_star).abs() * n;
            max_c = max_c.max(c_fit);
        }
    }
    // The fitted constant stays uniformly bounded over the n-grid.
    assert!(max_c < 10.0, "drift constant blew up: {max_c}");
}

#[test]
fn unit_interval_filter_excludes_endpoints() {
    assert_eq!(largest_root_in_unit_interval(&[0.0, 1.0]), None);
    assert_eq!(largest_root_in_unit_interval(&[1e-10, 1.0 - 1e-10]), None);
    assert_eq!(largest_root_in_unit_interval(&[0.25, 0.75, 1.5]), Some(0.75));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]
    #[test]
    fn quartic_residuals_hold_for_arbitrary_coefficients(
        a0 in -100.0..100.0f64,
        a1 in -100.0..100.0f64,
        a2 in -100.0..100.0f64,
        a3 in -100.0..100.0f64,
        a4 in -100.0..100.0f64,
    ) {
        let c = QuarticCoeffs::new(a0, a1, a2, a3, a4);
        prop_assume!(c.a.iter().any(|&x| x != 0.0));
        let roots = solve_quartic_real(&c).unwrap();
        for &r in &roots {
            let scale: f64 = c.a
                .iter()
                .enumerate()
                .map(|(j, &coeff)| coeff.abs() * r.abs().powi(j as i32))
                .sum::<f64>()
                .max(1.0);
            prop_assert!(c.eval(r).abs() <= 1e-9 * scale);
        }
    }
}

// ---------------------------------------------------------------------------
// Berry-Esseen statistics
// ---------------------------------------------------------------------------

#[test]
fn berry_esseen_goldens() {
    let s = berry_esseen_stats(Snr::new(1.0).unwrap()).unwrap();
    assert_eq!(s.mu, 0.0);
    assert!((s.sigma - (3.0f64 / 8.0).sqrt()).abs() < 1e-15);
    // Independent re-evaluation of the third-moment bound at q = 1.
    let expect = ((15f64.cbrt() + 2.0 * (2.0 * (2.0 / std::f64::consts::PI).sqrt()).cbrt()
        + 1.0)
        / 4.0)
        .powi(3);
    assert!((s.t_bound - expect).abs() < 1e-12);
    assert!(berry_esseen_stats(Snr::new(0.0).unwrap()).is_err());
}

#[test]
fn berry_esseen_sigma_matches_dispersion() {
    for i in 1..=100 {
        let q = Snr::new(i as f64 * 0.37).unwrap();
        let s = berry_esseen_stats(q).unwrap();
        assert_eq!(s.mu, 0.0);
        assert!((s.sigma * s.sigma - gaussian_dispersion(q)).abs() < 1e-14);
        assert!(s.t_bound.is_finite() && s.t_bound > 0.0);
    }
}
